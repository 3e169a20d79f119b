use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Book class. The numeric class id orders `Other` before `Success`;
/// every "ties go to the smaller class id" rule resolves towards `Other`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Other,
    Success,
}

impl Label {
    pub fn class_id(self) -> usize {
        match self {
            Label::Other => 0,
            Label::Success => 1,
        }
    }

    pub fn from_class_id(id: usize) -> Label {
        if id == 0 {
            Label::Other
        } else {
            Label::Success
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Other => Label::Success,
            Label::Success => Label::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Other => "other",
            Label::Success => "success",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLabel(pub String);

impl fmt::Display for UnknownLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown label {:?} (expected `success` or `other`)", self.0)
    }
}

impl std::error::Error for UnknownLabel {}

impl FromStr for Label {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "success" => Ok(Label::Success),
            "other" => Ok(Label::Other),
            other => Err(UnknownLabel(other.to_string())),
        }
    }
}

/// Number of `(other, success)` labels.
pub fn class_counts(labels: &[Label]) -> [usize; 2] {
    let mut counts = [0usize; 2];
    for l in labels {
        counts[l.class_id()] += 1;
    }
    counts
}

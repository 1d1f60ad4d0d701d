use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Anatomical level of a short-axis slice.
///
/// The declaration order is the fixed class order used for vote tie-breaks
/// and for array indexing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SliceClass {
    Basal,
    MidVentricle,
    Apical,
}

impl SliceClass {
    pub const ALL: [SliceClass; 3] = [SliceClass::Basal, SliceClass::MidVentricle, SliceClass::Apical];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Short lowercase token used in manifests and CSV files.
    pub fn token(self) -> &'static str {
        match self {
            SliceClass::Basal => "basal",
            SliceClass::MidVentricle => "mid",
            SliceClass::Apical => "apical",
        }
    }
}

impl fmt::Display for SliceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for SliceClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "basal" | "b" => Ok(SliceClass::Basal),
            "mid" | "midventricle" | "mid-ventricle" | "mid_ventricle" | "m" => Ok(SliceClass::MidVentricle),
            "apical" | "a" => Ok(SliceClass::Apical),
            other => Err(Error::Parse(format!("unknown slice class {other:?}"))),
        }
    }
}

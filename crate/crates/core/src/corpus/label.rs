use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Moral foundation labels, named by their virtue pole.
///
/// `NonMoral` only occurs as a gold label in training corpora. `None` and
/// `Unknown` only occur in predictions: `None` means the document expresses no
/// foundation, `Unknown` means the approach could not produce an answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoundationLabel {
    Care,
    Fairness,
    Loyalty,
    Authority,
    Sanctity,
    #[serde(rename = "nonmoral")]
    NonMoral,
    None,
    Unknown,
}

/// The five foundations in canonical order.
pub const FOUNDATIONS: [FoundationLabel; 5] = [
    FoundationLabel::Care,
    FoundationLabel::Fairness,
    FoundationLabel::Loyalty,
    FoundationLabel::Authority,
    FoundationLabel::Sanctity,
];

/// Foundations in report column order (Auth, Care, Fair, Loya, Sanc).
pub const REPORT_ORDER: [FoundationLabel; 5] = [
    FoundationLabel::Authority,
    FoundationLabel::Care,
    FoundationLabel::Fairness,
    FoundationLabel::Loyalty,
    FoundationLabel::Sanctity,
];

impl FoundationLabel {
    pub fn is_foundation(self) -> bool {
        matches!(
            self,
            Self::Care | Self::Fairness | Self::Loyalty | Self::Authority | Self::Sanctity
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Care => "care",
            Self::Fairness => "fairness",
            Self::Loyalty => "loyalty",
            Self::Authority => "authority",
            Self::Sanctity => "sanctity",
            Self::NonMoral => "nonmoral",
            Self::None => "none",
            Self::Unknown => "unknown",
        }
    }

    /// Four-letter column header used in report tables.
    pub fn short(self) -> &'static str {
        match self {
            Self::Care => "Care",
            Self::Fairness => "Fair",
            Self::Loyalty => "Loya",
            Self::Authority => "Auth",
            Self::Sanctity => "Sanc",
            Self::NonMoral => "Nonm",
            Self::None => "None",
            Self::Unknown => "Unkn",
        }
    }

    /// Index into [`FOUNDATIONS`], if this is a foundation.
    pub fn index(self) -> Option<usize> {
        FOUNDATIONS.iter().position(|f| *f == self)
    }
}

impl fmt::Display for FoundationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseLabelError(pub String);

impl fmt::Display for ParseLabelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown label {:?}", self.0)
    }
}

impl std::error::Error for ParseLabelError {}

impl FromStr for FoundationLabel {
    type Err = ParseLabelError;

    /// Accepts the lowercase canonical names (case-insensitive, trimmed) plus
    /// the hyphenated and spaced spellings of non-moral.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_lowercase();
        Ok(match norm.as_str() {
            "care" => Self::Care,
            "fairness" => Self::Fairness,
            "loyalty" => Self::Loyalty,
            "authority" => Self::Authority,
            "sanctity" => Self::Sanctity,
            "nonmoral" | "non-moral" | "non moral" => Self::NonMoral,
            "none" => Self::None,
            "unknown" => Self::Unknown,
            _ => return Err(ParseLabelError(s.to_string())),
        })
    }
}

/// Virtue or vice pole of a foundation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Virtue,
    Vice,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Virtue => "virtue",
            Polarity::Vice => "vice",
        }
    }
}

impl FromStr for Polarity {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "virtue" => Ok(Polarity::Virtue),
            "vice" => Ok(Polarity::Vice),
            _ => Err(ParseLabelError(s.to_string())),
        }
    }
}

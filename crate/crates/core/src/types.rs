use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::simmat::{PairFeatures, SimilarityMatrix};

/// Relationship between a left and a right book, read as "left <label> right".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationshipLabel {
    /// Same work, whether or not the same manifestation.
    #[serde(rename = "SW")]
    SameWork,
    /// Different volumes of the same multi-volume work.
    #[serde(rename = "DV")]
    DifferentVolume,
    /// The left book is wholly contained in the right book.
    #[serde(rename = "PARTOF")]
    PartOf,
    /// The left book wholly contains the right book.
    #[serde(rename = "CONTAINS")]
    Contains,
    /// Unrelated works.
    #[serde(rename = "DIFF")]
    Different,
    /// Shared content where neither book subsumes the other.
    #[serde(rename = "OVERLAPS")]
    Overlaps,
}

impl RelationshipLabel {
    pub const ALL: [RelationshipLabel; 6] = [
        RelationshipLabel::SameWork,
        RelationshipLabel::DifferentVolume,
        RelationshipLabel::PartOf,
        RelationshipLabel::Contains,
        RelationshipLabel::Different,
        RelationshipLabel::Overlaps,
    ];

    /// The five classes that have real ground truth.
    pub const BASE_CLASSES: [RelationshipLabel; 5] = [
        RelationshipLabel::SameWork,
        RelationshipLabel::DifferentVolume,
        RelationshipLabel::PartOf,
        RelationshipLabel::Contains,
        RelationshipLabel::Different,
    ];

    pub const WHOLE_PART: [RelationshipLabel; 2] =
        [RelationshipLabel::PartOf, RelationshipLabel::Contains];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationshipLabel::SameWork => "SW",
            RelationshipLabel::DifferentVolume => "DV",
            RelationshipLabel::PartOf => "PARTOF",
            RelationshipLabel::Contains => "CONTAINS",
            RelationshipLabel::Different => "DIFF",
            RelationshipLabel::Overlaps => "OVERLAPS",
        }
    }

    /// Label of the same pair read right-to-left.
    pub fn inverse(self) -> Self {
        match self {
            RelationshipLabel::PartOf => RelationshipLabel::Contains,
            RelationshipLabel::Contains => RelationshipLabel::PartOf,
            other => other,
        }
    }

    pub fn is_whole_part(self) -> bool {
        matches!(self, RelationshipLabel::PartOf | RelationshipLabel::Contains)
    }
}

impl fmt::Display for RelationshipLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationshipLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SW" => Ok(RelationshipLabel::SameWork),
            "DV" => Ok(RelationshipLabel::DifferentVolume),
            "PARTOF" => Ok(RelationshipLabel::PartOf),
            "CONTAINS" => Ok(RelationshipLabel::Contains),
            "DIFF" => Ok(RelationshipLabel::Different),
            "OVERLAPS" => Ok(RelationshipLabel::Overlaps),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Synthetic,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Real => "real",
            Provenance::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "real" => Ok(Provenance::Real),
            "synthetic" => Ok(Provenance::Synthetic),
            other => Err(Error::Config(format!("unknown provenance {other:?}"))),
        }
    }
}

/// An ordered, labeled book pair before featurization.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledPair {
    pub left_id: String,
    pub right_id: String,
    pub label: RelationshipLabel,
    pub provenance: Provenance,
}

impl LabeledPair {
    pub fn new(
        left_id: impl Into<String>,
        right_id: impl Into<String>,
        label: RelationshipLabel,
        provenance: Provenance,
    ) -> Self {
        Self {
            left_id: left_id.into(),
            right_id: right_id.into(),
            label,
            provenance,
        }
    }
}

/// A featurized pair ready for the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct PairExample {
    pub left_id: String,
    pub right_id: String,
    pub matrix: SimilarityMatrix,
    pub features: PairFeatures,
    pub label: RelationshipLabel,
    pub provenance: Provenance,
}

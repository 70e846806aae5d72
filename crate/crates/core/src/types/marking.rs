use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The nine road-marking classes the detector can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkingLabel {
    DashedLane,
    SolidLane,
    StopLine,
    Text,
    Arrow,
    DiamondSign,
    TriangleSign,
    Curb,
    Crosswalk,
}

impl MarkingLabel {
    pub const ALL: [MarkingLabel; 9] = [
        MarkingLabel::DashedLane,
        MarkingLabel::SolidLane,
        MarkingLabel::StopLine,
        MarkingLabel::Text,
        MarkingLabel::Arrow,
        MarkingLabel::DiamondSign,
        MarkingLabel::TriangleSign,
        MarkingLabel::Curb,
        MarkingLabel::Crosswalk,
    ];

    pub fn category(self) -> ConstraintCategory {
        use MarkingLabel::*;
        match self {
            SolidLane | Curb => ConstraintCategory::Lines,
            DashedLane | Crosswalk | StopLine => ConstraintCategory::LineSegments,
            Text | Arrow | DiamondSign | TriangleSign => ConstraintCategory::Others,
        }
    }

    pub fn as_str(self) -> &'static str {
        use MarkingLabel::*;
        match self {
            DashedLane => "dashed_lane",
            SolidLane => "solid_lane",
            StopLine => "stop_line",
            Text => "text",
            Arrow => "arrow",
            DiamondSign => "diamond_sign",
            TriangleSign => "triangle_sign",
            Curb => "curb",
            Crosswalk => "crosswalk",
        }
    }

    /// Dense index in `0..9`, stable across releases.
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|l| *l == self).unwrap()
    }
}

impl fmt::Display for MarkingLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MarkingLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown marking label `{s}`"))
    }
}

/// How strongly a marking constrains the pose along its main direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintCategory {
    /// Endless linear markings: no constraint along the line.
    Lines,
    /// Linear markings with endpoints.
    LineSegments,
    /// Non-linear shapes that constrain both directions.
    Others,
}

impl ConstraintCategory {
    /// Minor-axis value of the shape covariance `diag(1, ε)`.
    pub fn epsilon(self) -> f64 {
        match self {
            ConstraintCategory::Lines => 1e-6,
            ConstraintCategory::LineSegments => 1e-1,
            ConstraintCategory::Others => 1.0,
        }
    }

    pub fn is_linear(self) -> bool {
        !matches!(self, ConstraintCategory::Others)
    }
}

/// Total label-to-category mapping.
pub fn category_of(label: MarkingLabel) -> ConstraintCategory {
    label.category()
}

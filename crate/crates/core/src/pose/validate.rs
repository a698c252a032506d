use std::fmt;

use super::PoseSequence;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IssueCode {
    NonFiniteCoord,
    InvisibleNonZero,
    JointCountMismatch,
    EdgeOutOfRange,
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NonFiniteCoord => "non_finite_coord",
            Self::InvisibleNonZero => "invisible_non_zero",
            Self::JointCountMismatch => "joint_count_mismatch",
            Self::EdgeOutOfRange => "edge_out_of_range",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Issue {
    pub frame: usize,
    /// `None` for frame-level problems.
    pub joint: Option<usize>,
    pub code: IssueCode,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Collects every data problem in `seq` without failing.
pub fn validate_sequence(seq: &PoseSequence) -> ValidationReport {
    let mut issues = Vec::new();
    let joints = seq.topology.joint_count();
    for &(p, c) in seq.topology.edges() {
        if p >= joints || c >= joints {
            issues.push(Issue {
                frame: 0,
                joint: None,
                code: IssueCode::EdgeOutOfRange,
                message: format!("edge {p}:{c} exceeds joint count {joints}"),
            });
        }
    }
    for (fi, frame) in seq.frames.iter().enumerate() {
        if frame.coords.len() != joints || frame.visibility.len() != joints {
            issues.push(Issue {
                frame: fi,
                joint: None,
                code: IssueCode::JointCountMismatch,
                message: format!(
                    "{} coords / {} flags for a {joints}-joint topology",
                    frame.coords.len(),
                    frame.visibility.len()
                ),
            });
            continue;
        }
        for (j, (c, &v)) in frame.coords.iter().zip(&frame.visibility).enumerate() {
            if !c[0].is_finite() || !c[1].is_finite() {
                issues.push(Issue {
                    frame: fi,
                    joint: Some(j),
                    code: IssueCode::NonFiniteCoord,
                    message: format!("coordinate ({}, {}) is not finite", c[0], c[1]),
                });
            } else if !v && (c[0] != 0.0 || c[1] != 0.0) {
                issues.push(Issue {
                    frame: fi,
                    joint: Some(j),
                    code: IssueCode::InvisibleNonZero,
                    message: format!("invisible joint has coords ({}, {}) instead of (0, 0)", c[0], c[1]),
                });
            }
        }
    }
    ValidationReport { issues }
}

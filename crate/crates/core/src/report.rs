//! Result rows shared by the verification harnesses and the CLI writers.

use serde::Serialize;

use crate::montecarlo::Estimate;

/// Absolute slack added to every Monte-Carlo comparison.
pub const ABS_TOL: f64 = 1e-3;

/// One verification outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub model_id: String,
    pub check_id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub stderr: f64,
    pub pass: bool,
}

impl CheckRow {
    /// Equality of two independent estimates at three pooled sigma.
    pub fn equality(model_id: &str, check_id: &str, lhs: Estimate, rhs: Estimate) -> Self {
        let stderr = lhs.stderr + rhs.stderr;
        Self {
            model_id: model_id.into(),
            check_id: check_id.into(),
            lhs: lhs.mean,
            rhs: rhs.mean,
            stderr,
            pass: (lhs.mean - rhs.mean).abs() <= 3.0 * stderr + ABS_TOL,
        }
    }

    /// `lhs ≤ rhs` up to three sigma.
    pub fn at_most(model_id: &str, check_id: &str, lhs: Estimate, rhs: Estimate) -> Self {
        let stderr = lhs.stderr + rhs.stderr;
        Self {
            model_id: model_id.into(),
            check_id: check_id.into(),
            lhs: lhs.mean,
            rhs: rhs.mean,
            stderr,
            pass: lhs.mean <= rhs.mean + 3.0 * stderr + ABS_TOL,
        }
    }
}

/// One distance estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceRow {
    pub pair_id: String,
    pub estimator: String,
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
}

//! Certificate reports: the outcome of a sampled verification of one
//! inequality, with the minimum margin and the point attaining it.

use serde::{Deserialize, Serialize};

use crate::phase_space::PolarState;
use crate::real::Real;

/// Margin the "empty set" certificates must clear: floating point cannot
/// witness emptiness, only strictly positive margins.
pub const STRICT_MARGIN: f64 = 1e-12;

/// Slack for inequalities that may be attained with equality on the grid.
pub const EQUALITY_SLACK: f64 = -1e-12;

/// Result of one sampled check.
///
/// `pass` holds iff the margins cleared their configured tolerances.
/// Serialized as `{check, pass, margin, worst_point, samples, ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport<R> {
    /// Which inequality was checked.
    #[serde(rename = "check")]
    pub name: String,
    pub pass: bool,
    /// Minimum of the primary margin over all samples.
    #[serde(rename = "margin")]
    pub min_margin: R,
    /// Sample attaining the primary minimum, in polar coordinates.
    pub worst_point: Option<PolarState<R>>,
    /// Number of admissible samples the minima were taken over.
    pub samples: u64,
    /// Minimum of a secondary margin (e.g. the proof's analytic lower bound),
    /// when the check carries one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_margin: Option<R>,
}

impl<R: Real> CertificateReport<R> {
    pub fn new(
        name: impl Into<String>,
        pass: bool,
        min_margin: R,
        worst_point: Option<PolarState<R>>,
        samples: u64,
    ) -> Self {
        Self {
            name: name.into(),
            pass,
            min_margin,
            worst_point,
            samples,
            bound_margin: None,
        }
    }

    pub fn with_bound_margin(mut self, margin: R) -> Self {
        self.bound_margin = Some(margin);
        self
    }
}

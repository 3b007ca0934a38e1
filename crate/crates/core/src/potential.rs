//! Decaying potentials on the plane.
//!
//! A model provides `V(r, theta) >= 0` together with its radial and angular
//! derivatives and the decay constants `(a, R1)`, subject to the two decay
//! conditions for `r > R1`:
//!
//! ```text
//! V(r, theta) <= a / r          and          dV/dr + (2/r) V >= 0.
//! ```
//!
//! Outside `R1` the models are exact closed forms. Inside, the singular core
//! is replaced by a smooth bounded cap, blended over `[cap_fraction * R1, R1]`
//! with the same C-infinity profile used by the cutoff construction; the decay
//! conditions only constrain `r > R1`, so any smooth bounded extension is
//! admissible. The extension used here is documented on each constructor.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cutoff::{step_down, step_down_slope};
use crate::phase_space::PolarState;
use crate::real::Real;
use crate::report::{CertificateReport, EQUALITY_SLACK};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("mass ratio must lie in (0, 1/2] (got {0})")]
    InvalidMassRatio(f64),
    #[error("decay radius {r1} is below the smooth-range bound {min} for this mass ratio")]
    RadiusTooSmall { r1: f64, min: f64 },
}

/// Contract every potential model satisfies.
pub trait Potential<R: Real> {
    /// `V(r, theta)`, nonnegative everywhere.
    fn value(&self, r: R, theta: R) -> R;
    /// `dV/dr`.
    fn d_r(&self, r: R, theta: R) -> R;
    /// `dV/dtheta`.
    fn d_theta(&self, r: R, theta: R) -> R;
    /// Decay coefficient `a` in `V <= a/r`.
    fn decay_coefficient(&self) -> R;
    /// Radius beyond which the decay conditions hold.
    fn decay_radius(&self) -> R;
    /// Finite upper bound for `V` over the whole plane.
    fn sup_value(&self) -> R;
}

/// Concrete potential models, serializable as a JSON descriptor
/// `{kind, ...constants..., cap parameters}` for CLI round trips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum PotentialModel<R> {
    /// `V = a/r` outside `R1`, capped to the constant `a / (cap_fraction R1)`
    /// near the origin by a monotone blend. Rotationally invariant.
    #[serde(rename = "powerlaw")]
    PowerLaw {
        a: R,
        #[serde(rename = "R1")]
        r1: R,
        cap_fraction: R,
    },
    /// Rotating-frame gravity of two primaries of mass ratio `mu` at
    /// `(-mu, 0)` and `(1-mu, 0)`, exact outside `R1`, blended to the constant
    /// `cap_value` near the origin (which removes the collision
    /// singularities). `a` is the decay coefficient evaluated at `R1`;
    /// `sup_v` is the numerically determined supremum.
    #[serde(rename = "cr3bp")]
    ThreeBody {
        mu: R,
        #[serde(rename = "R1")]
        r1: R,
        a: R,
        cap_fraction: R,
        cap_value: R,
        sup_v: R,
    },
}

/// Constants attached to the three-body potential: mass ratio, decay radius
/// and decay coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cr3bpParams<R> {
    pub mu: R,
    #[serde(rename = "R1")]
    pub r1: R,
    pub a: R,
}

/// Decay coefficient of the three-body potential at radius `r`:
/// `(1-mu) r / (r-mu) + mu r / (r-(1-mu))`. Strictly decreasing in `r`
/// beyond `1-mu`, so its value at `R1` bounds `r V` on all of `r >= R1`.
pub fn cr3bp_decay_bound<R: Real>(mu: R, r: R) -> R {
    let one = R::one();
    (one - mu) * r / (r - mu) + mu * r / (r - (one - mu))
}

/// Decay constants for the three-body problem with both endpoints inside the
/// ball of radius `R1 = max{2(1-mu), |q0|, |q1|}`.
pub fn cr3bp_constants<R: Real>(
    mu: R,
    q0: [R; 2],
    q1: [R; 2],
) -> Result<Cr3bpParams<R>, PotentialError> {
    check_mass_ratio(mu)?;
    let r1 = (R::of(2.0) * (R::one() - mu))
        .max(q0[0].hypot(q0[1]))
        .max(q1[0].hypot(q1[1]));
    Ok(Cr3bpParams {
        mu,
        r1,
        a: cr3bp_decay_bound(mu, r1),
    })
}

fn check_mass_ratio<R: Real>(mu: R) -> Result<(), PotentialError> {
    if mu > R::zero() && mu <= R::of(0.5) {
        Ok(())
    } else {
        Err(PotentialError::InvalidMassRatio(mu.as_f64()))
    }
}

const DEFAULT_CAP_FRACTION: f64 = 0.9;

impl<R: Real> PotentialModel<R> {
    /// Power-law model `V = a/r` beyond `R1`.
    ///
    /// The cap blends `a/r` with the constant `a / (0.9 R1)` over
    /// `[0.9 R1, R1]`; the blend is monotone nonincreasing, so the constant is
    /// also the supremum.
    pub fn power_law(a: R, r1: R) -> Self {
        assert!(
            a > R::zero() && r1 > R::zero(),
            "power-law constants must be positive"
        );
        PotentialModel::PowerLaw {
            a,
            r1,
            cap_fraction: R::of(DEFAULT_CAP_FRACTION),
        }
    }

    /// Three-body model with mass ratio `mu`; `r1` defaults to
    /// `max{2(1-mu), 1}` and must be at least `2(1-mu)`, which keeps the cap
    /// region clear of both primaries and makes the second decay condition
    /// hold on `r >= R1`.
    pub fn cr3bp(mu: R, r1: Option<R>) -> Result<Self, PotentialError> {
        check_mass_ratio(mu)?;
        let min_r1 = R::of(2.0) * (R::one() - mu);
        let r1 = r1.unwrap_or_else(|| min_r1.max(R::one()));
        if r1 < min_r1 {
            return Err(PotentialError::RadiusTooSmall {
                r1: r1.as_f64(),
                min: min_r1.as_f64(),
            });
        }
        let cap_fraction = R::of(DEFAULT_CAP_FRACTION);
        // The exact potential decreases radially at every angle beyond the
        // primaries, so the supremum of the capped model is the maximum over
        // the cap circle.
        let cap_value = max_over_angle(|theta| cr3bp_exact(mu, cap_fraction * r1, theta).0);
        let sup_v = cap_value * (R::one() + R::of(1e-9));
        Ok(PotentialModel::ThreeBody {
            mu,
            r1,
            a: cr3bp_decay_bound(mu, r1),
            cap_fraction,
            cap_value,
            sup_v,
        })
    }

    fn cap_radius(&self) -> R {
        match *self {
            PotentialModel::PowerLaw {
                r1, cap_fraction, ..
            } => cap_fraction * r1,
            PotentialModel::ThreeBody {
                r1, cap_fraction, ..
            } => cap_fraction * r1,
        }
    }

    /// Blend weight: 1 on the cap plateau, 0 outside `R1`.
    fn blend(&self, r: R) -> R {
        let lo = self.cap_radius();
        let hi = self.decay_radius();
        step_down((r - lo) / (hi - lo))
    }

    fn blend_slope(&self, r: R) -> R {
        let lo = self.cap_radius();
        let hi = self.decay_radius();
        step_down_slope((r - lo) / (hi - lo)) / (hi - lo)
    }
}

/// `(value, d_r, d_theta)` of the exact rotating-frame two-primary potential.
fn cr3bp_exact<R: Real>(mu: R, r: R, theta: R) -> (R, R, R) {
    let one = R::one();
    let m1 = one - mu; // primary of mass 1-mu at (-mu, 0)
    let cos = theta.cos();
    let sin = theta.sin();
    let d1_sq = r * r + R::of(2.0) * r * mu * cos + mu * mu;
    let d2_sq = r * r - R::of(2.0) * r * m1 * cos + m1 * m1;
    let d1 = d1_sq.sqrt();
    let d2 = d2_sq.sqrt();
    let d1_cubed = d1_sq * d1;
    let d2_cubed = d2_sq * d2;
    let value = m1 / d1 + mu / d2;
    let d_r = -m1 * (r + mu * cos) / d1_cubed - mu * (r - m1 * cos) / d2_cubed;
    let d_theta = m1 * mu * r * sin * (d1_cubed.recip() - d2_cubed.recip());
    (value, d_r, d_theta)
}

/// Deterministic maximum of an even, 2pi-periodic function over the angle:
/// dense scan of [0, pi] followed by golden-section refinement.
fn max_over_angle<R: Real>(f: impl Fn(R) -> R) -> R {
    let n = 2048usize;
    let mut best_i = 0usize;
    let mut best = R::neg_infinity();
    for i in 0..=n {
        let theta = R::PI() * R::of(i as f64 / n as f64);
        let v = f(theta);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let step = R::PI() * R::of(1.0 / n as f64);
    let mut lo = R::PI() * R::of(best_i.saturating_sub(1) as f64 / n as f64);
    let mut hi = (R::PI() * R::of((best_i + 1) as f64 / n as f64)).min(R::PI());
    let inv_phi = R::of(0.618_033_988_749_894_9);
    let mut x1 = hi - (hi - lo) * inv_phi;
    let mut x2 = lo + (hi - lo) * inv_phi;
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo < R::of(1e-15) * step.max(R::one()) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + (hi - lo) * inv_phi;
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - (hi - lo) * inv_phi;
            f1 = f(x1);
        }
    }
    best.max(f1).max(f2)
}

impl<R: Real> Potential<R> for PotentialModel<R> {
    fn value(&self, r: R, theta: R) -> R {
        match *self {
            PotentialModel::PowerLaw { a, r1, .. } => {
                if r >= r1 {
                    a / r
                } else {
                    let cap = a / self.cap_radius();
                    let w = self.blend(r);
                    if w == R::one() {
                        cap
                    } else {
                        w * cap + (R::one() - w) * (a / r)
                    }
                }
            }
            PotentialModel::ThreeBody {
                mu, r1, cap_value, ..
            } => {
                if r >= r1 {
                    cr3bp_exact(mu, r, theta).0
                } else {
                    let w = self.blend(r);
                    if w == R::one() {
                        cap_value
                    } else {
                        w * cap_value + (R::one() - w) * cr3bp_exact(mu, r, theta).0
                    }
                }
            }
        }
    }

    fn d_r(&self, r: R, theta: R) -> R {
        match *self {
            PotentialModel::PowerLaw { a, r1, .. } => {
                if r >= r1 {
                    -a / (r * r)
                } else {
                    let w = self.blend(r);
                    if w == R::one() {
                        R::zero()
                    } else {
                        let cap = a / self.cap_radius();
                        self.blend_slope(r) * (cap - a / r) + (R::one() - w) * (-a / (r * r))
                    }
                }
            }
            PotentialModel::ThreeBody {
                mu, r1, cap_value, ..
            } => {
                if r >= r1 {
                    cr3bp_exact(mu, r, theta).1
                } else {
                    let w = self.blend(r);
                    if w == R::one() {
                        R::zero()
                    } else {
                        let (v, dv, _) = cr3bp_exact(mu, r, theta);
                        self.blend_slope(r) * (cap_value - v) + (R::one() - w) * dv
                    }
                }
            }
        }
    }

    fn d_theta(&self, r: R, theta: R) -> R {
        match *self {
            PotentialModel::PowerLaw { .. } => R::zero(),
            PotentialModel::ThreeBody { mu, r1, .. } => {
                if r >= r1 {
                    cr3bp_exact(mu, r, theta).2
                } else {
                    let w = self.blend(r);
                    if w == R::one() {
                        R::zero()
                    } else {
                        (R::one() - w) * cr3bp_exact(mu, r, theta).2
                    }
                }
            }
        }
    }

    fn decay_coefficient(&self) -> R {
        match *self {
            PotentialModel::PowerLaw { a, .. } | PotentialModel::ThreeBody { a, .. } => a,
        }
    }

    fn decay_radius(&self) -> R {
        match *self {
            PotentialModel::PowerLaw { r1, .. } | PotentialModel::ThreeBody { r1, .. } => r1,
        }
    }

    fn sup_value(&self) -> R {
        match *self {
            PotentialModel::PowerLaw { a, .. } => a / self.cap_radius(),
            PotentialModel::ThreeBody { sup_v, .. } => sup_v,
        }
    }
}

/// Grid used by [`verify_decay_conditions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayGrid {
    pub n_r: usize,
    pub n_theta: usize,
}

impl Default for DecayGrid {
    fn default() -> Self {
        Self {
            n_r: 512,
            n_theta: 128,
        }
    }
}

/// Checks both decay conditions on the grid `r in [R1, r_max]`,
/// `theta in [0, 2pi)`.
///
/// The report's primary margin is `min(a/r - V)` and the secondary margin is
/// `min(dV/dr + (2/r) V)`; the check passes iff both clear `-1e-12`.
/// Violations are reported, never thrown.
pub fn verify_decay_conditions<R: Real>(
    v: &(impl Potential<R> + Sync),
    r_max: R,
    grid: &DecayGrid,
) -> CertificateReport<R> {
    let r1 = v.decay_radius();
    let a = v.decay_coefficient();
    assert!(r_max > r1, "r_max must exceed the decay radius");
    let (n_r, n_t) = (grid.n_r.max(2), grid.n_theta.max(1));

    let per_row: Vec<(R, Option<PolarState<R>>, R)> = (0..n_r)
        .into_par_iter()
        .map(|i| {
            let r = r1 + (r_max - r1) * R::of(i as f64 / (n_r - 1) as f64);
            let mut min1 = R::infinity();
            let mut min2 = R::infinity();
            let mut worst = None;
            for j in 0..n_t {
                let theta = R::of(2.0) * R::PI() * R::of(j as f64 / n_t as f64);
                let val = v.value(r, theta);
                let m1 = a / r - val;
                let m2 = v.d_r(r, theta) + R::of(2.0) / r * val;
                if m1 < min1 {
                    min1 = m1;
                    worst = Some(PolarState::new(r, theta, R::zero(), R::zero()));
                }
                min2 = min2.min(m2);
            }
            (min1, worst, min2)
        })
        .collect();

    let mut min1 = R::infinity();
    let mut min2 = R::infinity();
    let mut worst = None;
    for (m1, w, m2) in per_row {
        if m1 < min1 {
            min1 = m1;
            worst = w;
        }
        min2 = min2.min(m2);
    }
    let tol = R::of(EQUALITY_SLACK);
    let pass = min1 >= tol && min2 >= tol;
    CertificateReport::new("decay-conditions", pass, min1, worst, (n_r * n_t) as u64)
        .with_bound_margin(min2)
}

//! Sampled certification of the confinement machinery: energy thresholds,
//! the energy-gap bound on level sets, and emptiness of the three "no-return"
//! sets.
//!
//! Floating point cannot witness that a set is empty; what these verifiers
//! certify is that on a large seeded sample of the would-be set the defining
//! inequality holds with a strictly positive margin, and that the analytic
//! lower bound from the corresponding proof holds pointwise. Points on the
//! constraint sets are constructed directly (solving the level-set quadratic
//! for `p_theta` at `p_r = 0`, or for `p_r` given `p_theta`), which beats
//! rejection sampling on codimension-1 sets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamiltonian::{HamiltonianError, HamiltonianModel, ModelKind};
use crate::phase_space::PolarState;
use crate::potential::{Potential, PotentialModel};
use crate::real::Real;
use crate::report::{CertificateReport, EQUALITY_SLACK, STRICT_MARGIN};
use crate::sampling::{coin, sample_margins, uniform, SampleSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateError {
    #[error("radius {r} is outside the admissible range [{lo}, {hi})")]
    OutOfRange { r: f64, lo: f64, hi: f64 },
    #[error("no admissible sample satisfied the set's constraints")]
    EmptySample,
    #[error("energy {c} does not exceed the threshold {threshold}")]
    EnergyBelowThreshold { c: f64, threshold: f64 },
    #[error("this verifier needs a model with a potential")]
    MissingPotential,
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
}

/// Energy thresholds and derived radii for decay constants `(a, R1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet<R> {
    pub a: R,
    #[serde(rename = "R1")]
    pub r1: R,
    /// Threshold for confinement with an arbitrary decaying potential:
    /// `max{(32 a^2)^(1/3), sqrt(4a (3 R1 + 2 (2a)^(1/3)))}`.
    pub cond_c: R,
    /// Threshold for the rotationally invariant branch: `sqrt(2 a R1)`.
    pub rot_threshold: R,
    /// `max{sqrt(2 a R1), sqrt(2 a R1^2)}`. The source statements use the two
    /// forms interchangeably; both are exposed and the stricter maximum is
    /// what the solver consults by default.
    pub rot_threshold_strict: R,
    /// Energy value the derived quantities below are evaluated at.
    pub c: Option<R>,
    /// Energy gap `(c^2 - 2 a R1) / (2 (c + R1^2))` retained on leaving the
    /// inner ball (positive iff `c > rot_threshold`).
    pub e_rot: Option<R>,
    /// Truncation radius `R1 + 2a / e_rot` for the rotational branch.
    #[serde(rename = "R2_rot")]
    pub r2_rot: Option<R>,
    /// Truncation radius `(c^2 + 2 a R1) / (8a)` for the annulus certificate;
    /// meaningful once `c > cond_c`.
    #[serde(rename = "R2_no_max")]
    pub r2_no_max: Option<R>,
}

/// Computes the threshold set; `c` optionally evaluates the derived
/// energy-dependent quantities.
pub fn thresholds<R: Real>(a: R, r1: R, c: Option<R>) -> ThresholdSet<R> {
    assert!(
        a > R::zero() && r1 > R::zero(),
        "decay constants must be positive"
    );
    let two = R::of(2.0);
    let cond_c = (R::of(32.0) * a * a)
        .cbrt()
        .max((R::of(4.0) * a * (R::of(3.0) * r1 + two * (two * a).cbrt())).sqrt());
    let rot_threshold = (two * a * r1).sqrt();
    let rot_threshold_strict = rot_threshold.max((two * a).sqrt() * r1);
    let (e_rot, r2_rot, r2_no_max) = match c {
        None => (None, None, None),
        Some(c) => {
            let e = (c * c - two * a * r1) / (two * (c + r1 * r1));
            let r2_rot = (e > R::zero()).then(|| r1 + two * a / e);
            let r2_no_max = (c * c + two * a * r1) / (R::of(8.0) * a);
            (Some(e), r2_rot, Some(r2_no_max))
        }
    };
    ThresholdSet {
        a,
        r1,
        cond_c,
        rot_threshold,
        rot_threshold_strict,
        c,
        e_rot,
        r2_rot,
        r2_no_max,
    }
}

/// Lower bound `(c^2 - 2 a r) / (2 (c + r^2))` for `c - p_theta` on the
/// energy-`c` level set at radius `r`; strictly decreasing in `r` and positive
/// for `r < c^2 / (2a)`.
pub fn energy_gap_bound<R: Real>(c: R, a: R, r: R) -> Result<R, CertificateError> {
    let hi = c * c / (R::of(2.0) * a);
    if r >= hi {
        return Err(CertificateError::OutOfRange {
            r: r.as_f64(),
            lo: 0.0,
            hi: hi.as_f64(),
        });
    }
    Ok((c * c - R::of(2.0) * a * r) / (R::of(2.0) * (c + r * r)))
}

fn require_potential<R: Real>(
    model: &HamiltonianModel<R>,
) -> Result<&PotentialModel<R>, CertificateError> {
    if model.kind() == ModelKind::Free {
        return Err(CertificateError::MissingPotential);
    }
    model.potential().ok_or(CertificateError::MissingPotential)
}

/// Roots in `p_theta` of the level-set equation `p_theta^2/(2r^2) + p_theta = c + w`
/// at `p_r = 0`, where `w` is the (possibly cut off) potential value.
fn p_theta_roots<R: Real>(r: R, c_plus_w: R) -> (R, R) {
    let disc = r * (r * r + R::of(2.0) * c_plus_w).max(R::zero()).sqrt();
    (-r * r - disc, -r * r + disc)
}

/// Samples the energy-`c` level set of a full model over `r in [r_lo, r_hi]`
/// and checks the energy gap `c - p_theta > (c^2 - 2ar)/(2(c + r^2))` at every
/// point; the secondary margin is the minimum forward difference of the bound
/// on a radial grid, which must be positive (the bound decreases in `r`).
pub fn verify_energy_gap<R: Real>(
    model: &HamiltonianModel<R>,
    c: R,
    r_lo: R,
    r_hi: R,
    spec: &SampleSpec,
) -> Result<CertificateReport<R>, CertificateError> {
    let v = require_potential(model)?;
    let a = v.decay_coefficient();
    let r1 = v.decay_radius();
    let turning = c * c / (R::of(2.0) * a);
    if r_lo < r1 || r_hi >= turning || r_lo >= r_hi {
        return Err(CertificateError::OutOfRange {
            r: r_hi.as_f64(),
            lo: r_lo.as_f64(),
            hi: turning.as_f64(),
        });
    }

    // Monotonicity of the bound over the sampled range.
    let n_grid = 1024;
    let mut min_decrease = R::infinity();
    let mut prev = energy_gap_bound(c, a, r_lo)?;
    for k in 1..=n_grid {
        let r = r_lo + (r_hi - r_lo) * R::of(k as f64 / n_grid as f64);
        let b = energy_gap_bound(c, a, r)?;
        min_decrease = min_decrease.min(prev - b);
        prev = b;
    }

    let two = R::of(2.0);
    let stats = sample_margins(spec, |rng| {
        let r = uniform(rng, r_lo, r_hi);
        let theta = uniform(rng, R::zero(), two * R::PI());
        let val = v.value(r, theta);
        let (lo, hi) = p_theta_roots(r, c + val);
        let p_theta = uniform(rng, lo, hi);
        let kinetic = (two * (c + val - p_theta) - p_theta * p_theta / (r * r)).max(R::zero());
        let p_r = if coin(rng) {
            kinetic.sqrt()
        } else {
            -kinetic.sqrt()
        };
        let bound = (c * c - two * a * r) / (two * (c + r * r));
        let margin = c - p_theta - bound;
        Some((margin, margin, PolarState::new(r, theta, p_r, p_theta)))
    });
    if stats.accepted == 0 {
        return Err(CertificateError::EmptySample);
    }
    let pass = stats.min_margin >= R::of(STRICT_MARGIN) && min_decrease > R::zero();
    Ok(CertificateReport::new(
        "energy-gap",
        pass,
        stats.min_margin,
        stats.worst,
        stats.accepted,
    )
    .with_bound_margin(min_decrease))
}

/// Certifies emptiness of the no-return set of a full model: on sampled
/// level-set points with `p_r = 0`, `r > R1` and `c - p_theta > 0`, the
/// second bracket `p_theta^2/r^3 + dV/dr` is strictly positive. The secondary
/// margin checks the proof's pointwise lower bound `(2/r)(c - p_theta)`.
pub fn verify_no_return_full<R: Real>(
    model: &HamiltonianModel<R>,
    c: R,
    spec: &SampleSpec,
) -> Result<CertificateReport<R>, CertificateError> {
    let v = require_potential(model)?;
    let a = v.decay_coefficient();
    let r1 = v.decay_radius();
    let r_max = (R::of(2.0) * r1).max(c * c / a);
    let two = R::of(2.0);

    let stats = sample_margins(spec, |rng| {
        let r = uniform(rng, r1 * (R::one() + R::of(1e-12)), r_max);
        let theta = uniform(rng, R::zero(), two * R::PI());
        let val = v.value(r, theta);
        let (lo, hi) = p_theta_roots(r, c + val);
        let p_theta = if coin(rng) { lo } else { hi };
        if !(c - p_theta > R::zero()) {
            return None;
        }
        let bracket = p_theta * p_theta / (r * r * r) + v.d_r(r, theta);
        let chain = bracket - two / r * (c - p_theta);
        Some((
            bracket,
            chain,
            PolarState::new(r, theta, R::zero(), p_theta),
        ))
    });
    if stats.accepted == 0 {
        return Err(CertificateError::EmptySample);
    }
    let pass = stats.min_margin >= R::of(STRICT_MARGIN) && stats.min_bound >= R::of(EQUALITY_SLACK);
    Ok(CertificateReport::new(
        "no-return",
        pass,
        stats.min_margin,
        stats.worst,
        stats.accepted,
    )
    .with_bound_margin(stats.min_bound))
}

/// Certifies emptiness of the no-return set of the truncated model built with
/// `R2 = R1 + 2a/e`: on sampled level-set points with `p_r = 0`, `r > R1` and
/// `c - p_theta >= e`, the second bracket
/// `p_theta^2/r^3 + chi0 dV/dr + chi0' V` clears `e / r`. The primary margin
/// is the clearance over `e/r`; the secondary margin is the bracket itself,
/// which must be strictly positive.
pub fn verify_no_return_truncated<R: Real>(
    potential: &PotentialModel<R>,
    c: R,
    e: R,
    spec: &SampleSpec,
) -> Result<CertificateReport<R>, CertificateError> {
    let a = potential.decay_coefficient();
    let r1 = potential.decay_radius();
    let r2 = r1 + R::of(2.0) * a / e;
    let model = HamiltonianModel::truncated(potential.clone(), c, r2)?;
    let cutoff = *model.cutoff().expect("truncated model has a cutoff");
    let v = model.potential().expect("truncated model has a potential");
    let r_max = R::of(2.0) * r2;
    let two = R::of(2.0);

    let stats = sample_margins(spec, |rng| {
        let r = uniform(rng, r1 * (R::one() + R::of(1e-12)), r_max);
        let theta = uniform(rng, R::zero(), two * R::PI());
        let val = v.value(r, theta);
        let chi0 = cutoff.radial(r);
        let (lo, hi) = p_theta_roots(r, c + chi0 * val);
        let p_theta = if coin(rng) { lo } else { hi };
        if !(c - p_theta >= e) {
            return None;
        }
        let bracket =
            p_theta * p_theta / (r * r * r) + chi0 * v.d_r(r, theta) + cutoff.radial_slope(r) * val;
        Some((
            bracket - e / r,
            bracket,
            PolarState::new(r, theta, R::zero(), p_theta),
        ))
    });
    if stats.accepted == 0 {
        return Err(CertificateError::EmptySample);
    }
    let pass = stats.min_margin >= R::of(EQUALITY_SLACK) && stats.min_bound >= R::of(STRICT_MARGIN);
    Ok(CertificateReport::new(
        "no-return-truncated",
        pass,
        stats.min_margin,
        stats.worst,
        stats.accepted,
    )
    .with_bound_margin(stats.min_bound))
}

/// Certifies that the radial coordinate has no interior maximum on the
/// energy-`c` level set of the truncated model in the annulus
/// `R1 < r < R2 = (c^2 + 2 a R1)/(8a)`: the second bracket clears the proof's
/// lower bound `a R1^2 / (4 r (c + R2^2)(R2 - R1))` at every sampled point.
/// Requires `c` above the general confinement threshold.
pub fn verify_no_max_annulus<R: Real>(
    potential: &PotentialModel<R>,
    c: R,
    spec: &SampleSpec,
) -> Result<CertificateReport<R>, CertificateError> {
    let a = potential.decay_coefficient();
    let r1 = potential.decay_radius();
    let ts = thresholds(a, r1, None);
    if c <= ts.cond_c {
        return Err(CertificateError::EnergyBelowThreshold {
            c: c.as_f64(),
            threshold: ts.cond_c.as_f64(),
        });
    }
    let r2 = (c * c + R::of(2.0) * a * r1) / (R::of(8.0) * a);
    let model = HamiltonianModel::truncated(potential.clone(), c, r2)?;
    let cutoff = *model.cutoff().expect("truncated model has a cutoff");
    let v = model.potential().expect("truncated model has a potential");
    let two = R::of(2.0);
    let denom = R::of(4.0) * (c + r2 * r2) * (r2 - r1);

    let stats = sample_margins(spec, |rng| {
        let r = uniform(
            rng,
            r1 * (R::one() + R::of(1e-12)),
            r2 * (R::one() - R::of(1e-12)),
        );
        let theta = uniform(rng, R::zero(), two * R::PI());
        let val = v.value(r, theta);
        let chi0 = cutoff.radial(r);
        let (lo, hi) = p_theta_roots(r, c + chi0 * val);
        let p_theta = if coin(rng) { lo } else { hi };
        let bracket =
            p_theta * p_theta / (r * r * r) + chi0 * v.d_r(r, theta) + cutoff.radial_slope(r) * val;
        let lower = a * r1 * r1 / (r * denom);
        Some((
            bracket - lower,
            bracket,
            PolarState::new(r, theta, R::zero(), p_theta),
        ))
    });
    if stats.accepted == 0 {
        return Err(CertificateError::EmptySample);
    }
    let pass = stats.min_margin >= R::of(EQUALITY_SLACK) && stats.min_bound >= R::of(STRICT_MARGIN);
    Ok(CertificateReport::new(
        "no-max-annulus",
        pass,
        stats.min_margin,
        stats.worst,
        stats.accepted,
    )
    .with_bound_margin(stats.min_bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::h0_polar;
    use crate::phase_space::{poisson_bracket_fd, CartesianState};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference_model() -> HamiltonianModel<f64> {
        HamiltonianModel::full(PotentialModel::power_law(2.0, 1.0))
    }

    #[test]
    fn threshold_frozen_values() {
        let ts = thresholds(2.0, 1.0, Some(3.0));
        // direct evaluation of the two branches
        let branch1 = 128f64.cbrt();
        let branch2 = (8.0 * (3.0 + 2.0 * 4f64.cbrt())).sqrt();
        assert_relative_eq!(ts.cond_c, branch1.max(branch2), max_relative = 1e-15);
        assert_relative_eq!(branch1, 5.039684199579493, max_relative = 1e-12);
        assert!((ts.cond_c - 7.0284).abs() < 1e-4);
        assert_eq!(ts.rot_threshold, 2.0);
        assert_eq!(ts.rot_threshold_strict, 2.0);
        assert_relative_eq!(ts.e_rot.unwrap(), 0.625, max_relative = 1e-15);
        assert_relative_eq!(ts.r2_rot.unwrap(), 7.4, max_relative = 1e-15);
        assert_relative_eq!(ts.r2_no_max.unwrap(), 13.0 / 16.0, max_relative = 1e-15);
    }

    #[test]
    fn no_c_means_no_derived_radii() {
        let ts = thresholds(2.0, 1.0, None);
        assert!(ts.e_rot.is_none() && ts.r2_rot.is_none() && ts.r2_no_max.is_none());
    }

    #[test]
    fn rot_threshold_strict_takes_the_larger_form() {
        // for R1 > 1 the R1^2 form dominates
        let ts = thresholds(2.0, 3.0, None);
        assert_relative_eq!(ts.rot_threshold, 12f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(
            ts.rot_threshold_strict,
            2f64.sqrt() * 2f64.sqrt() * 3.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn gap_bound_frozen_values() {
        assert_relative_eq!(
            energy_gap_bound(3.0, 2.0, 1.0).unwrap(),
            0.625,
            max_relative = 1e-15
        );
        let c = 7.0284f64;
        let expected = (c * c - 4.0) / (2.0 * (c + 1.0));
        assert_relative_eq!(
            energy_gap_bound(c, 2.0, 1.0).unwrap(),
            expected,
            max_relative = 1e-15
        );
        assert!((expected - 2.8272).abs() < 1e-3);
    }

    #[test]
    fn gap_bound_vanishes_at_the_turning_radius() {
        let (c, a) = (3.0, 2.0);
        let turning = c * c / (2.0 * a);
        assert!(matches!(
            energy_gap_bound(c, a, turning),
            Err(CertificateError::OutOfRange { .. })
        ));
        let near = energy_gap_bound(c, a, turning - 1e-9).unwrap();
        assert!(near > 0.0 && near < 1e-8);
    }

    #[test]
    fn energy_gap_certificate_passes_and_is_monotone() {
        let report = verify_energy_gap(
            &reference_model(),
            3.0,
            1.0,
            2.0,
            &SampleSpec::new(0, 20_000),
        )
        .unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.min_margin > 0.0);
        assert!(report.bound_margin.unwrap() > 0.0);
        // frozen endpoints of the monotonicity example
        assert_relative_eq!(energy_gap_bound(3.0, 2.0, 1.0).unwrap(), 0.625);
        assert_relative_eq!(
            energy_gap_bound(3.0, 2.0, 2.0).unwrap(),
            1.0 / 14.0,
            max_relative = 1e-15
        );
        assert!(
            energy_gap_bound(3.0, 2.0, 1.0).unwrap() > energy_gap_bound(3.0, 2.0, 2.0).unwrap()
        );
    }

    #[test]
    fn energy_gap_rejects_bad_ranges() {
        let m = reference_model();
        // r_hi at the turning radius + 1
        assert!(matches!(
            verify_energy_gap(&m, 3.0, 1.0, 9.0 / 4.0 + 1.0, &SampleSpec::new(0, 10)),
            Err(CertificateError::OutOfRange { .. })
        ));
        // r_lo below the decay radius
        assert!(matches!(
            verify_energy_gap(&m, 3.0, 0.5, 2.0, &SampleSpec::new(0, 10)),
            Err(CertificateError::OutOfRange { .. })
        ));
    }

    #[test]
    fn energy_gap_sampled_points_sit_on_the_level_set() {
        let v = PotentialModel::power_law(2.0, 1.0);
        let m = HamiltonianModel::full(v.clone());
        let report = verify_energy_gap(&m, 3.0, 1.0, 2.0, &SampleSpec::new(3, 100)).unwrap();
        let w = report.worst_point.unwrap();
        let h = h0_polar(w.r, w.p_r, w.p_theta) - v.value(w.r, w.theta);
        assert_relative_eq!(h, 3.0, max_relative = 1e-10);
    }

    #[test]
    fn no_return_certificate_passes_at_both_energies() {
        for c in [3.0, 7.1] {
            let report =
                verify_no_return_full(&reference_model(), c, &SampleSpec::new(0, 30_000)).unwrap();
            assert!(report.pass, "c={c}: {report:?}");
            assert!(report.min_margin > 0.0);
            assert!(report.bound_margin.unwrap() >= 0.0);
        }
    }

    #[test]
    fn no_return_frozen_point_checks() {
        // At (r=2, p_theta=4, p_r=0) with V = 2/r: the second bracket is
        // p_theta^2/r^3 + dV/dr = 2 - 0.5 = 1.5, and the proof's lower bound
        // (2/r)(H - p_theta) there is (2/2)(5 - 4) = 1.
        let v = PotentialModel::power_law(2.0, 1.0);
        let (r, p_theta) = (2.0, 4.0);
        let bracket = p_theta * p_theta / (r * r * r) + v.d_r(r, 0.0);
        assert_relative_eq!(bracket, 1.5, max_relative = 1e-15);
        let h = h0_polar(r, 0.0, p_theta) - v.value(r, 0.0);
        assert_relative_eq!(h, 5.0, max_relative = 1e-15);
        assert!(bracket >= 2.0 / r * (h - p_theta));
        // and the identity bracket = (2/r)(H - p_theta) + (2V/r + dV/dr)
        let identity = 2.0 / r * (h - p_theta) + 2.0 * v.value(r, 0.0) / r + v.d_r(r, 0.0);
        assert_relative_eq!(bracket, identity, max_relative = 1e-14);
    }

    #[test]
    fn free_models_are_rejected() {
        let free = HamiltonianModel::<f64>::free();
        assert!(matches!(
            verify_no_return_full(&free, 3.0, &SampleSpec::new(0, 10)),
            Err(CertificateError::MissingPotential)
        ));
    }

    #[test]
    fn truncated_no_return_passes_with_the_rotational_radius() {
        let v = PotentialModel::power_law(2.0, 1.0);
        let report =
            verify_no_return_truncated(&v, 3.0, 0.625, &SampleSpec::new(0, 30_000)).unwrap();
        assert!(report.pass, "{report:?}");
        // R2 = R1 + 2a/e = 7.4 was used; margins clear e/r and stay positive.
        assert!(report.min_margin >= -1e-12);
        assert!(report.bound_margin.unwrap() > 0.0);
    }

    #[test]
    fn truncated_no_return_pointwise_slope_bounds() {
        // chi0' V >= -(2/(R2-R1)) V >= -2a/((R2-R1) r) at sampled points.
        let v = PotentialModel::power_law(2.0, 1.0);
        let (c, e) = (3.0, 0.625);
        let r2 = 1.0 + 2.0 * 2.0 / e;
        let model = HamiltonianModel::truncated(v.clone(), c, r2).unwrap();
        let cutoff = model.cutoff().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let r = rng.gen_range(1.0 + 1e-9..2.0 * r2);
            let val = v.value(r, 0.0);
            let slope_term = cutoff.radial_slope(r) * val;
            assert!(slope_term >= -2.0 / (r2 - 1.0) * val - 1e-15);
            assert!(-2.0 / (r2 - 1.0) * val >= -2.0 * 2.0 / ((r2 - 1.0) * r) - 1e-15);
        }
    }

    #[test]
    fn degenerate_truncation_radius_propagates_bad_radii() {
        let v = PotentialModel::power_law(2.0, 1.0);
        let err = verify_no_return_truncated(&v, 3.0, f64::INFINITY, &SampleSpec::new(0, 10));
        assert!(
            matches!(err, Err(CertificateError::Hamiltonian(_))),
            "{err:?}"
        );
    }

    #[test]
    fn no_max_annulus_passes_above_the_threshold() {
        let v = PotentialModel::power_law(2.0, 1.0);
        let report = verify_no_max_annulus(&v, 7.1, &SampleSpec::new(0, 30_000)).unwrap();
        assert!(report.pass, "{report:?}");
        // frozen radius and its sanity interval
        let r2 = (7.1f64 * 7.1 + 4.0) / 16.0;
        assert_relative_eq!(r2, 3.400625, max_relative = 1e-15);
        assert!((1.75..7.1 * 7.1 / 4.0).contains(&r2));
    }

    #[test]
    fn no_max_annulus_rejects_low_energy() {
        let v = PotentialModel::power_law(2.0, 1.0);
        assert!(matches!(
            verify_no_max_annulus(&v, 2.0, &SampleSpec::new(0, 10)),
            Err(CertificateError::EnergyBelowThreshold { .. })
        ));
    }

    #[test]
    fn reports_are_byte_identical_for_identical_seeds() {
        let m = reference_model();
        let a = verify_no_return_full(&m, 3.0, &SampleSpec::new(42, 50_000)).unwrap();
        let b = verify_no_return_full(&m, 3.0, &SampleSpec::new(42, 50_000)).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = verify_no_return_full(&m, 3.0, &SampleSpec::new(43, 50_000)).unwrap();
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&c).unwrap()
        );
    }

    #[test]
    fn closed_form_brackets_match_finite_differences() {
        let v = PotentialModel::power_law(2.0, 1.0);
        let model = reference_model();
        let eval = |s: &CartesianState<f64>| model.eval_cartesian(s);
        let radius = |s: &CartesianState<f64>| s.radius();
        let p_r_fn = |s: &CartesianState<f64>| (s.q1 * s.p1 + s.q2 * s.p2) / s.radius();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let polar = PolarState::new(
                rng.gen_range(1.0..10.0),
                rng.gen_range(-3.1..3.1),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
            );
            let s = polar.to_cartesian().unwrap();
            let fd1 = poisson_bracket_fd(eval, radius, &s, 1e-5);
            assert_relative_eq!(fd1, polar.p_r, max_relative = 1e-6, epsilon = 1e-6);
            let fd2 = poisson_bracket_fd(eval, p_r_fn, &s, 1e-5);
            let analytic = polar.p_theta * polar.p_theta / (polar.r * polar.r * polar.r)
                + v.d_r(polar.r, polar.theta);
            assert_relative_eq!(fd2, analytic, max_relative = 1e-6, epsilon = 1e-5);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn threshold_algebra_above_cond_c(
            a in 0.1f64..10.0,
            r1 in 0.1f64..10.0,
            bump in 1e-6f64..2.0,
        ) {
            let ts = thresholds(a, r1, None);
            let c = ts.cond_c * (1.0 + bump);
            let derived = thresholds(a, r1, Some(c));
            let r2 = derived.r2_no_max.unwrap();
            prop_assert!(r2 >= 1.75 * r1 * (1.0 - 1e-12));
            prop_assert!(r2 < c * c / (2.0 * a));
            // above the rotational threshold the gap and its radius exist
            prop_assert!(derived.e_rot.unwrap() > 0.0);
            prop_assert!(derived.r2_rot.unwrap() > r1);
        }
    }
}

//! The three Hamiltonian models on T*R^2 and the compactly supported
//! truncation of the potential.
//!
//! * `Free`: the magnetic Hamiltonian `H0 = |p|^2/2 + p1 q2 - p2 q1`, equal to
//!   `p_r^2/2 + p_theta^2/(2 r^2) + p_theta` in the polar chart.
//! * `Full`: `H = H0 - V` for a decaying potential `V`.
//! * `Truncated`: `H1 = H0 - chi0 chi1 V`, where `chi0` switches the potential
//!   off radially between `R1` and `R2` and `chi1` switches it off above the
//!   free energy `sup V + c`. The level sets of all three models at energy `c`
//!   lie where `chi1 = 1`, and inside the inner ball the truncated and full
//!   models agree exactly on their common level set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cutoff::{CutoffConfig, CutoffError};
use crate::phase_space::{CartesianState, ChartError, PolarState};
use crate::potential::{Potential, PotentialModel};
use crate::real::Real;
use crate::report::{CertificateReport, EQUALITY_SLACK};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HamiltonianError {
    #[error(transparent)]
    Cutoff(#[from] CutoffError),
    #[error(transparent)]
    Chart(#[from] ChartError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Free,
    Full,
    Truncated,
}

/// One of the three Hamiltonian models, evaluable in both charts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianModel<R> {
    kind: ModelKind,
    potential: Option<PotentialModel<R>>,
    cutoff: Option<CutoffConfig<R>>,
}

/// Free Hamiltonian in the Cartesian chart.
pub fn h0_cartesian<R: Real>(s: &CartesianState<R>) -> R {
    R::of(0.5) * (s.p1 * s.p1 + s.p2 * s.p2) + s.p1 * s.q2 - s.p2 * s.q1
}

/// Free Hamiltonian in the polar chart.
pub fn h0_polar<R: Real>(r: R, p_r: R, p_theta: R) -> R {
    R::of(0.5) * p_r * p_r + R::of(0.5) * p_theta * p_theta / (r * r) + p_theta
}

impl<R: Real> HamiltonianModel<R> {
    /// The free magnetic Hamiltonian `H0`.
    pub fn free() -> Self {
        Self {
            kind: ModelKind::Free,
            potential: None,
            cutoff: None,
        }
    }

    /// The full Hamiltonian `H = H0 - V`.
    pub fn full(potential: PotentialModel<R>) -> Self {
        Self {
            kind: ModelKind::Full,
            potential: Some(potential),
            cutoff: None,
        }
    }

    /// The truncated Hamiltonian `H1 = H0 - chi0 chi1 V` for energy `c` and
    /// outer radius `r2 > R1`.
    pub fn truncated(potential: PotentialModel<R>, c: R, r2: R) -> Result<Self, HamiltonianError> {
        let cutoff = CutoffConfig::new(potential.decay_radius(), r2, c, potential.sup_value())?;
        Ok(Self {
            kind: ModelKind::Truncated,
            potential: Some(potential),
            cutoff: Some(cutoff),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn potential(&self) -> Option<&PotentialModel<R>> {
        self.potential.as_ref()
    }

    pub fn cutoff(&self) -> Option<&CutoffConfig<R>> {
        self.cutoff.as_ref()
    }

    /// Energy in the Cartesian chart (smooth on all of T*R^2).
    pub fn eval_cartesian(&self, s: &CartesianState<R>) -> R {
        let h0 = h0_cartesian(s);
        match self.kind {
            ModelKind::Free => h0,
            ModelKind::Full => {
                let (r, theta) = cartesian_to_r_theta(s);
                h0 - self.potential_value(r, theta)
            }
            ModelKind::Truncated => {
                let (r, theta) = cartesian_to_r_theta(s);
                let cutoff = self.cutoff.as_ref().expect("truncated model has a cutoff");
                h0 - cutoff.radial(r) * cutoff.energy_cap(h0) * self.potential_value(r, theta)
            }
        }
    }

    /// Energy in the polar chart; fails off the chart (`r <= 0`).
    pub fn eval_polar(&self, s: &PolarState<R>) -> Result<R, ChartError> {
        if s.r <= R::zero() {
            return Err(ChartError::OriginSingularity);
        }
        let h0 = h0_polar(s.r, s.p_r, s.p_theta);
        Ok(match self.kind {
            ModelKind::Free => h0,
            ModelKind::Full => h0 - self.potential_value(s.r, s.theta),
            ModelKind::Truncated => {
                let cutoff = self.cutoff.as_ref().expect("truncated model has a cutoff");
                h0 - cutoff.radial(s.r) * cutoff.energy_cap(h0) * self.potential_value(s.r, s.theta)
            }
        })
    }

    fn potential_value(&self, r: R, theta: R) -> R {
        self.potential
            .as_ref()
            .map_or(R::zero(), |v| v.value(r, theta))
    }

    /// Hamiltonian vector field in the Cartesian chart, as the tangent
    /// `(dq1, dq2, dp1, dp2)/dt`. This is the exact symplectic gradient of
    /// [`Self::eval_cartesian`], including the cutoff terms where they are
    /// active.
    pub fn vector_field_cartesian(&self, s: &CartesianState<R>) -> CartesianState<R> {
        let dq1 = s.p1 + s.q2;
        let dq2 = s.p2 - s.q1;
        match self.kind {
            ModelKind::Free => CartesianState::new(dq1, dq2, s.p2, -s.p1),
            ModelKind::Full => {
                let (gq1, gq2) = self.potential_gradient_cartesian(s);
                CartesianState::new(dq1, dq2, s.p2 + gq1, -s.p1 + gq2)
            }
            ModelKind::Truncated => {
                let cutoff = self.cutoff.as_ref().expect("truncated model has a cutoff");
                let v = self
                    .potential
                    .as_ref()
                    .expect("truncated model has a potential");
                let r = s.radius();
                let theta = -s.q2.atan2(s.q1);
                let h0 = h0_cartesian(s);
                let val = v.value(r, theta);
                let chi0 = cutoff.radial(r);
                let chi1 = cutoff.energy_cap(h0);
                let chi1_slope = cutoff.energy_cap_slope(h0);
                let scale = R::one() - chi0 * val * chi1_slope;
                let (gq1, gq2) = self.potential_gradient_cartesian(s);
                let radial_term = cutoff.radial_slope(r) * chi1 * val;
                let (rq1, rq2) = if radial_term == R::zero() {
                    (R::zero(), R::zero())
                } else {
                    (radial_term * s.q1 / r, radial_term * s.q2 / r)
                };
                CartesianState::new(
                    dq1 * scale,
                    dq2 * scale,
                    s.p2 * scale + rq1 + chi0 * chi1 * gq1,
                    -s.p1 * scale + rq2 + chi0 * chi1 * gq2,
                )
            }
        }
    }

    /// Gradient of the bare potential in Cartesian coordinates, by the chain
    /// rule through the polar chart. Exactly zero on the cap plateau, which
    /// also covers the chart singularity at the origin.
    fn potential_gradient_cartesian(&self, s: &CartesianState<R>) -> (R, R) {
        let v = match &self.potential {
            Some(v) => v,
            None => return (R::zero(), R::zero()),
        };
        let r = s.radius();
        let theta = -s.q2.atan2(s.q1);
        let vr = v.d_r(r, theta);
        let vt = v.d_theta(r, theta);
        if vr == R::zero() && vt == R::zero() {
            return (R::zero(), R::zero());
        }
        let r_sq = r * r;
        (
            vr * s.q1 / r + vt * s.q2 / r_sq,
            vr * s.q2 / r - vt * s.q1 / r_sq,
        )
    }

    /// Hamiltonian vector field in the polar chart, as the tangent
    /// `(dr, dtheta, dp_r, dp_theta)/dt`.
    ///
    /// Where the energy cap is identically 1 (in particular on the energy-`c`
    /// level sets) the truncated field reduces to
    /// `dr = p_r`, `dtheta = p_theta/r^2 + 1`,
    /// `dp_r = p_theta^2/r^3 + chi0 dV/dr + chi0' V`, `dp_theta = chi0 dV/dtheta`.
    pub fn vector_field_polar(&self, s: &PolarState<R>) -> Result<PolarState<R>, ChartError> {
        if s.r <= R::zero() {
            return Err(ChartError::OriginSingularity);
        }
        let r = s.r;
        let dr_free = s.p_r;
        let dtheta_free = s.p_theta / (r * r) + R::one();
        let dpr_free = s.p_theta * s.p_theta / (r * r * r);
        Ok(match self.kind {
            ModelKind::Free => PolarState::new(dr_free, dtheta_free, dpr_free, R::zero()),
            ModelKind::Full => {
                let v = self.potential.as_ref().expect("full model has a potential");
                PolarState::new(
                    dr_free,
                    dtheta_free,
                    dpr_free + v.d_r(r, s.theta),
                    v.d_theta(r, s.theta),
                )
            }
            ModelKind::Truncated => {
                let cutoff = self.cutoff.as_ref().expect("truncated model has a cutoff");
                let v = self
                    .potential
                    .as_ref()
                    .expect("truncated model has a potential");
                let h0 = h0_polar(r, s.p_r, s.p_theta);
                let val = v.value(r, s.theta);
                let chi0 = cutoff.radial(r);
                let chi1 = cutoff.energy_cap(h0);
                let scale = R::one() - chi0 * val * cutoff.energy_cap_slope(h0);
                PolarState::new(
                    dr_free * scale,
                    dtheta_free * scale,
                    dpr_free * scale
                        + chi1 * (cutoff.radial_slope(r) * val + chi0 * v.d_r(r, s.theta)),
                    chi0 * chi1 * v.d_theta(r, s.theta),
                )
            }
        })
    }
}

fn cartesian_to_r_theta<R: Real>(s: &CartesianState<R>) -> (R, R) {
    (s.radius(), -s.q2.atan2(s.q1))
}

/// Grid resolution for [`verify_hset_membership`]; the product
/// `n_r * n_p_r * n_p_theta` covers the support box, with `n_theta` angular
/// slices for potentials that depend on the angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_r: usize,
    pub n_p_r: usize,
    pub n_p_theta: usize,
    pub n_theta: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_r: 64,
            n_p_r: 64,
            n_p_theta: 64,
            n_theta: 1,
        }
    }
}

impl GridSpec {
    pub fn with_resolution(n: usize) -> Self {
        Self {
            n_r: n,
            n_p_r: n,
            n_p_theta: n,
            n_theta: 1,
        }
    }
}

/// Verifies on a grid that `h := chi0 chi1 V + c` is an admissible compact
/// perturbation: three reports, in order,
///
/// 1. `hset-positivity`: `h - c >= 0` (so `h > 0` with margin `c`);
/// 2. `hset-scaling-bound`: `h - dh(p dp) - c >= 0`, with `dh(p dp)` the
///    derivative along the fiberwise scaling field, computed in closed form
///    as `chi0 V chi1'(H0) (p_r^2/2 + p_theta^2/(2r^2) + H0)`; the secondary
///    margin records `min(-dh(p dp))`, which must be nonnegative;
/// 3. `hset-compact-support`: all four partial derivatives of `h` vanish
///    identically outside the box `{r <= R2, |p_r| <= P, |p_theta| <= R2 (R2 + P)}`
///    with `P = sqrt(R2^2 + 2 (sup V + c + 1))`; the margin is
///    `-max |dh|` over sampled exterior points.
pub fn verify_hset_membership<R: Real>(
    potential: &PotentialModel<R>,
    c: R,
    r2: R,
    grid: &GridSpec,
) -> Result<Vec<CertificateReport<R>>, HamiltonianError> {
    let cutoff = CutoffConfig::new(potential.decay_radius(), r2, c, potential.sup_value())?;
    let pr_max = (r2 * r2 + R::of(2.0) * (cutoff.potential_sup + c + R::one())).sqrt();
    let pth_max = r2 * (r2 + pr_max);

    let h_and_dhp = |r: R, theta: R, p_r: R, p_theta: R| -> (R, R) {
        let h0 = h0_polar(r, p_r, p_theta);
        let val = potential.value(r, theta);
        let chi0 = cutoff.radial(r);
        let h = chi0 * cutoff.energy_cap(h0) * val + c;
        let dhp = chi0
            * val
            * cutoff.energy_cap_slope(h0)
            * (R::of(0.5) * p_r * p_r + R::of(0.5) * p_theta * p_theta / (r * r) + h0);
        (h, dhp)
    };

    // |dh|_inf in polar coordinates.
    let dh_norm = |r: R, theta: R, p_r: R, p_theta: R| -> R {
        let h0 = h0_polar(r, p_r, p_theta);
        let val = potential.value(r, theta);
        let chi0 = cutoff.radial(r);
        let chi1 = cutoff.energy_cap(h0);
        let chi0_slope = cutoff.radial_slope(r);
        let chi1_slope = cutoff.energy_cap_slope(h0);
        let dh_dr = chi0_slope * chi1 * val
            - chi0 * chi1_slope * (p_theta * p_theta / (r * r * r)) * val
            + chi0 * chi1 * potential.d_r(r, theta);
        let dh_dtheta = chi0 * chi1 * potential.d_theta(r, theta);
        let dh_dpr = chi0 * val * chi1_slope * p_r;
        let dh_dpth = chi0 * val * chi1_slope * (p_theta / (r * r) + R::one());
        dh_dr
            .abs()
            .max(dh_dtheta.abs())
            .max(dh_dpr.abs())
            .max(dh_dpth.abs())
    };

    let n_theta = grid.n_theta.max(1);
    let n_r = grid.n_r.max(2);
    let n_p_r = grid.n_p_r.max(2);
    let n_p_theta = grid.n_p_theta.max(2);
    let thetas: Vec<R> = (0..n_theta)
        .map(|j| R::of(2.0) * R::PI() * R::of(j as f64 / n_theta as f64))
        .collect();

    struct Interior<R> {
        min_pos: R,
        worst_pos: Option<PolarState<R>>,
        min_scale: R,
        worst_scale: Option<PolarState<R>>,
        max_dhp: R,
        count: u64,
    }

    let interior = (0..n_r)
        .into_par_iter()
        .map(|i| {
            let r = r2 * R::of((i + 1) as f64 / n_r as f64);
            let mut acc = Interior {
                min_pos: R::infinity(),
                worst_pos: None,
                min_scale: R::infinity(),
                worst_scale: None,
                max_dhp: R::neg_infinity(),
                count: 0,
            };
            for jp in 0..n_p_r {
                let p_r = pr_max * R::of(2.0 * jp as f64 / (n_p_r - 1) as f64 - 1.0);
                for jt in 0..n_p_theta {
                    let p_theta = pth_max * R::of(2.0 * jt as f64 / (n_p_theta - 1) as f64 - 1.0);
                    for &theta in &thetas {
                        let (h, dhp) = h_and_dhp(r, theta, p_r, p_theta);
                        let pos = h - c;
                        let scale_margin = h - dhp - c;
                        let point = PolarState::new(r, theta, p_r, p_theta);
                        if pos < acc.min_pos {
                            acc.min_pos = pos;
                            acc.worst_pos = Some(point);
                        }
                        if scale_margin < acc.min_scale {
                            acc.min_scale = scale_margin;
                            acc.worst_scale = Some(point);
                        }
                        acc.max_dhp = acc.max_dhp.max(dhp);
                        acc.count += 1;
                    }
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .reduce(|mut a, b| {
            if b.min_pos < a.min_pos {
                a.min_pos = b.min_pos;
                a.worst_pos = b.worst_pos;
            }
            if b.min_scale < a.min_scale {
                a.min_scale = b.min_scale;
                a.worst_scale = b.worst_scale;
            }
            a.max_dhp = a.max_dhp.max(b.max_dhp);
            a.count += b.count;
            a
        })
        .expect("nonempty grid");

    // Exterior families: one coordinate pushed beyond its box bound.
    let half = |n: usize| (n / 2).max(2);
    let buffer = R::of(1.01);
    let mut max_dh = R::zero();
    let mut worst_out = None;
    let mut out_count = 0u64;
    let absorb =
        |dh: R, point: PolarState<R>, max_dh: &mut R, worst: &mut Option<PolarState<R>>| {
            if dh > *max_dh {
                *max_dh = dh;
                *worst = Some(point);
            }
        };
    for i in 0..half(n_r) {
        let frac = R::of(i as f64 / (half(n_r) - 1) as f64);
        let r_out = r2 * (buffer + frac); // (1.01 R2, 2.01 R2]
        for jp in 0..half(n_p_r) {
            let p_r =
                pr_max * R::of(2.0) * (R::of(jp as f64 / (half(n_p_r) - 1) as f64) - R::of(0.5));
            for jt in 0..half(n_p_theta) {
                let p_theta = pth_max
                    * R::of(2.0)
                    * (R::of(jt as f64 / (half(n_p_theta) - 1) as f64) - R::of(0.5));
                for &theta in &thetas {
                    absorb(
                        dh_norm(r_out, theta, p_r, p_theta),
                        PolarState::new(r_out, theta, p_r, p_theta),
                        &mut max_dh,
                        &mut worst_out,
                    );
                    out_count += 1;
                }
            }
        }
    }
    for i in 0..half(n_r) {
        let r = r2 * R::of((i + 1) as f64 / half(n_r) as f64);
        for jp in 0..half(n_p_r) {
            let frac = R::of(jp as f64 / (half(n_p_r) - 1) as f64);
            let p_r_out = pr_max * (buffer + frac);
            for jt in 0..half(n_p_theta) {
                let p_theta = pth_max
                    * R::of(2.0)
                    * (R::of(jt as f64 / (half(n_p_theta) - 1) as f64) - R::of(0.5));
                for &theta in &thetas {
                    for sign in [R::one(), -R::one()] {
                        absorb(
                            dh_norm(r, theta, sign * p_r_out, p_theta),
                            PolarState::new(r, theta, sign * p_r_out, p_theta),
                            &mut max_dh,
                            &mut worst_out,
                        );
                        out_count += 1;
                    }
                }
            }
        }
    }
    for i in 0..half(n_r) {
        let r = r2 * R::of((i + 1) as f64 / half(n_r) as f64);
        for jp in 0..half(n_p_r) {
            let p_r =
                pr_max * R::of(2.0) * (R::of(jp as f64 / (half(n_p_r) - 1) as f64) - R::of(0.5));
            for jt in 0..half(n_p_theta) {
                let frac = R::of(jt as f64 / (half(n_p_theta) - 1) as f64);
                let p_theta_out = pth_max * (buffer + frac);
                for &theta in &thetas {
                    for sign in [R::one(), -R::one()] {
                        absorb(
                            dh_norm(r, theta, p_r, sign * p_theta_out),
                            PolarState::new(r, theta, p_r, sign * p_theta_out),
                            &mut max_dh,
                            &mut worst_out,
                        );
                        out_count += 1;
                    }
                }
            }
        }
    }

    let tol = R::of(EQUALITY_SLACK);
    Ok(vec![
        CertificateReport::new(
            "hset-positivity",
            interior.min_pos >= tol,
            interior.min_pos,
            interior.worst_pos,
            interior.count,
        ),
        CertificateReport::new(
            "hset-scaling-bound",
            interior.min_scale >= tol && -interior.max_dhp >= tol,
            interior.min_scale,
            interior.worst_scale,
            interior.count,
        )
        .with_bound_margin(-interior.max_dhp),
        CertificateReport::new(
            "hset-compact-support",
            -max_dh >= R::zero(),
            -max_dh,
            worst_out,
            out_count,
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn powerlaw_full() -> HamiltonianModel<f64> {
        HamiltonianModel::full(PotentialModel::power_law(2.0, 1.0))
    }

    fn powerlaw_truncated(c: f64, r2: f64) -> HamiltonianModel<f64> {
        HamiltonianModel::truncated(PotentialModel::power_law(2.0, 1.0), c, r2).unwrap()
    }

    #[test]
    fn free_eval_examples() {
        let h = HamiltonianModel::free();
        assert_eq!(
            h.eval_cartesian(&CartesianState::new(0.0, 0.0, 1.0, 0.0)),
            0.5
        );
        let s = CartesianState::new(1.0, 0.0, 0.0, 1.0);
        assert_eq!(h.eval_cartesian(&s), -0.5);
        let polar = s.to_polar().unwrap();
        assert_relative_eq!(h.eval_polar(&polar).unwrap(), -0.5, max_relative = 1e-15);
    }

    #[test]
    fn full_eval_at_rest_point() {
        // H0 = 0 at rest in polar, V = a/r = 1 at r = 2.
        let h = powerlaw_full();
        let s = PolarState::new(2.0, 0.0, 0.0, 0.0);
        assert_relative_eq!(h.eval_polar(&s).unwrap(), -1.0, max_relative = 1e-15);
    }

    #[test]
    fn polar_eval_rejects_origin() {
        let h = HamiltonianModel::<f64>::free();
        assert!(h.eval_polar(&PolarState::new(0.0, 0.0, 0.0, 0.0)).is_err());
        assert!(h
            .vector_field_polar(&PolarState::new(-1.0, 0.0, 0.0, 0.0))
            .is_err());
    }

    #[test]
    fn free_field_example() {
        let h = HamiltonianModel::free();
        let f = h.vector_field_cartesian(&CartesianState::new(1.0, 0.0, 0.0, 1.0));
        assert_eq!((f.q1, f.q2, f.p1, f.p2), (0.0, 0.0, 1.0, 0.0));
    }

    #[test]
    fn truncated_field_on_the_cap_plateau() {
        // Energy high enough that the energy cap is 1 with zero slope at the
        // test states; dV/dr = -a/r^2 = -0.5 at r = 2, V = 1.
        let h = powerlaw_truncated(20.0, 7.4);
        let cutoff = *h.cutoff().unwrap();
        for p_theta in [4.0_f64, 8.0] {
            let s = PolarState::new(2.0, 0.0, 0.0, p_theta);
            assert_eq!(cutoff.energy_cap(h0_polar(2.0, 0.0, p_theta)), 1.0);
            let f = h.vector_field_polar(&s).unwrap();
            let chi0 = cutoff.radial(2.0);
            let chi0_slope = cutoff.radial_slope(2.0);
            let expected_dpr = p_theta * p_theta / 8.0 + chi0 * (-0.5) + chi0_slope * 1.0;
            assert_relative_eq!(f.r, 0.0);
            assert_relative_eq!(f.theta, p_theta / 4.0 + 1.0, max_relative = 1e-15);
            assert_relative_eq!(f.p_r, expected_dpr, max_relative = 1e-13);
            assert_relative_eq!(f.p_theta, 0.0);
        }
        // With the radial cutoff pinned at 1 (the full model) the components
        // are (0, 2, 1.5, 0) at p_theta = 4 and (0, 3, 7.5, 0) at p_theta = 8.
        let full = powerlaw_full();
        let f4 = full
            .vector_field_polar(&PolarState::new(2.0, 0.0, 0.0, 4.0))
            .unwrap();
        assert_relative_eq!(f4.theta, 2.0);
        assert_relative_eq!(f4.p_r, 1.5, max_relative = 1e-15);
        let f8 = full
            .vector_field_polar(&PolarState::new(2.0, 0.0, 0.0, 8.0))
            .unwrap();
        assert_relative_eq!(f8.theta, 3.0);
        assert_relative_eq!(f8.p_r, 7.5, max_relative = 1e-15);
    }

    fn random_state(rng: &mut ChaCha8Rng) -> CartesianState<f64> {
        let r = rng.gen_range(0.5..9.0);
        let theta = rng.gen_range(-3.1..3.1);
        PolarState::new(r, theta, rng.gen_range(-4.0..4.0), rng.gen_range(-6.0..6.0))
            .to_cartesian()
            .unwrap()
    }

    #[test]
    fn fields_are_the_symplectic_gradient_of_eval() {
        let models = [
            HamiltonianModel::free(),
            powerlaw_full(),
            powerlaw_truncated(3.0, 7.4),
            powerlaw_truncated(0.7, 2.5), // low energy: the energy cap is active
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h_fd = 1e-6;
        for model in &models {
            for _ in 0..300 {
                let s = random_state(&mut rng);
                let f = model.vector_field_cartesian(&s);
                let d = |i: usize| {
                    let mut plus = s.as_array();
                    let mut minus = s.as_array();
                    plus[i] += h_fd;
                    minus[i] -= h_fd;
                    (model.eval_cartesian(&CartesianState::from_array(plus))
                        - model.eval_cartesian(&CartesianState::from_array(minus)))
                        / (2.0 * h_fd)
                };
                // Hamilton's equations: dq = dH/dp, dp = -dH/dq.
                assert_relative_eq!(f.q1, d(2), max_relative = 1e-6, epsilon = 1e-7);
                assert_relative_eq!(f.q2, d(3), max_relative = 1e-6, epsilon = 1e-7);
                assert_relative_eq!(f.p1, -d(0), max_relative = 1e-6, epsilon = 1e-7);
                assert_relative_eq!(f.p2, -d(1), max_relative = 1e-6, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn polar_and_cartesian_fields_agree_through_the_chart() {
        let model = powerlaw_truncated(3.0, 7.4);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let polar = PolarState::new(
                rng.gen_range(0.4..9.0),
                rng.gen_range(-3.1..3.1),
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-6.0..6.0),
            );
            let s = polar.to_cartesian().unwrap();
            let fc = model.vector_field_cartesian(&s);
            let fp = model.vector_field_polar(&polar).unwrap();
            // push the polar tangent through the chart (q1 = r cos, q2 = -r sin)
            let (sin, cos) = polar.theta.sin_cos();
            let dq1 = fp.r * cos - polar.r * sin * fp.theta;
            let dq2 = -fp.r * sin - polar.r * cos * fp.theta;
            assert_relative_eq!(fc.q1, dq1, max_relative = 1e-11, epsilon = 1e-11);
            assert_relative_eq!(fc.q2, dq2, max_relative = 1e-11, epsilon = 1e-11);
        }
    }

    #[test]
    fn energy_is_conserved_along_the_field_direction() {
        let models = [
            HamiltonianModel::free(),
            powerlaw_full(),
            powerlaw_truncated(3.0, 7.4),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let eps = 3e-5;
        for model in &models {
            for _ in 0..1000 {
                let s = random_state(&mut rng);
                let f = model.vector_field_cartesian(&s);
                let norm = f.as_array().iter().map(|x| x * x).sum::<f64>().sqrt();
                let u = f * (1.0 / norm);
                // fourth-order stencil: the cutoff blend has large higher
                // derivatives, so a plain central difference is too coarse
                let at = |k: f64| model.eval_cartesian(&(s + u * (k * eps)));
                let dd = (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * eps);
                let scale = 1.0 + model.eval_cartesian(&s).abs();
                assert!(
                    dd.abs() <= 1e-9 * scale,
                    "directional derivative {dd} at {s:?}"
                );
            }
        }
    }

    #[test]
    fn radial_cutoff_boundary_values() {
        let h = powerlaw_truncated(3.0, 7.4);
        let cutoff = h.cutoff().unwrap();
        assert_eq!(cutoff.radial(1.0), 1.0);
        assert_eq!(cutoff.radial(7.4), 0.0);
    }

    #[test]
    fn level_set_lies_in_the_energy_cap_plateau() {
        // Solve H1 = c with p_r = 0 for p_theta across radii and check that
        // chi1 = 1 exactly there, and that the truncation agrees with the full
        // model inside the inner ball.
        let c = 3.0;
        let h1 = powerlaw_truncated(c, 7.4);
        let h = powerlaw_full();
        let v = h1.potential().unwrap().clone();
        let cutoff = *h1.cutoff().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut checked = 0;
        for _ in 0..1000 {
            let r = rng.gen_range(0.05..9.0);
            let theta = rng.gen_range(-3.1..3.1);
            let w = cutoff.radial(r) * v.value(r, theta);
            let disc = r * (r * r + 2.0 * (c + w)).sqrt();
            for p_theta in [-r * r - disc, -r * r + disc] {
                let s = PolarState::new(r, theta, 0.0, p_theta);
                let h0 = h0_polar(r, 0.0, p_theta);
                assert_eq!(
                    cutoff.energy_cap(h0),
                    1.0,
                    "chi1 != 1 on the level set at {s:?}"
                );
                let e1 = h1.eval_polar(&s).unwrap();
                assert_relative_eq!(e1, c, max_relative = 1e-12);
                if r <= 1.0 {
                    // inside the inner ball H1 and H agree exactly
                    assert_eq!(e1, h.eval_polar(&s).unwrap());
                }
                checked += 1;
            }
        }
        assert!(checked >= 2000);
    }

    #[test]
    fn truncated_equals_free_outside_outer_radius() {
        let h1 = powerlaw_truncated(3.0, 7.4);
        let h0 = HamiltonianModel::free();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..500 {
            let s = PolarState::new(
                rng.gen_range(7.4..30.0),
                rng.gen_range(-3.1..3.1),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
            )
            .to_cartesian()
            .unwrap();
            assert_eq!(h1.eval_cartesian(&s), h0.eval_cartesian(&s));
        }
    }

    #[test]
    fn hset_membership_passes_for_the_reference_truncation() {
        let v = PotentialModel::power_law(2.0, 1.0);
        let reports = verify_hset_membership(&v, 3.0, 7.4, &GridSpec::with_resolution(24)).unwrap();
        assert_eq!(reports.len(), 3);
        for report in &reports {
            assert!(report.pass, "failed: {report:?}");
        }
        assert!(
            reports[1].bound_margin.unwrap() >= 0.0,
            "dh(p dp) must be <= 0"
        );
    }

    #[test]
    fn perturbation_is_exactly_c_where_the_cutoff_vanishes() {
        let v = PotentialModel::power_law(2.0, 1.0);
        let c = 3.0;
        let r2 = 7.4;
        let cutoff = CutoffConfig::new(1.0, r2, c, v.sup_value()).unwrap();
        let r = 2.0 * r2;
        let h = cutoff.radial(r) * cutoff.energy_cap(h0_polar(r, 0.3, -2.0)) * v.value(r, 0.0) + c;
        assert_eq!(h, c);
    }

    #[test]
    fn differential_vanishes_in_the_far_field() {
        // directional finite differences of h at r = 2 R2 are exactly zero
        let v = PotentialModel::power_law(2.0, 1.0);
        let c = 3.0;
        let r2 = 7.4;
        let cutoff = CutoffConfig::new(1.0, r2, c, v.sup_value()).unwrap();
        let h = |r: f64, p_r: f64, p_theta: f64| {
            cutoff.radial(r) * cutoff.energy_cap(h0_polar(r, p_r, p_theta)) * v.value(r, 0.0) + c
        };
        let (r, p_r, p_theta) = (2.0 * r2, 1.3, -4.0);
        let d = 1e-4;
        assert_eq!(h(r + d, p_r, p_theta) - h(r - d, p_r, p_theta), 0.0);
        assert_eq!(h(r, p_r + d, p_theta) - h(r, p_r - d, p_theta), 0.0);
        assert_eq!(h(r, p_r, p_theta + d) - h(r, p_r, p_theta - d), 0.0);
    }

    #[test]
    fn scaling_derivative_matches_finite_differences() {
        // dh(p dp) equals d/ds h(r, theta, e^s p_r, e^s p_theta) at s = 0.
        let v = PotentialModel::power_law(2.0, 1.0);
        let c = 3.0;
        let cutoff = CutoffConfig::new(1.0, 7.4, c, v.sup_value()).unwrap();
        let h = |r: f64, p_r: f64, p_theta: f64| {
            cutoff.radial(r) * cutoff.energy_cap(h0_polar(r, p_r, p_theta)) * v.value(r, 0.0) + c
        };
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..300 {
            let r = rng.gen_range(0.2..9.0);
            let p_r = rng.gen_range(-6.0..6.0);
            let p_theta = rng.gen_range(-20.0..20.0);
            let h0 = h0_polar(r, p_r, p_theta);
            let analytic = cutoff.radial(r)
                * v.value(r, 0.0)
                * cutoff.energy_cap_slope(h0)
                * (0.5 * p_r * p_r + 0.5 * p_theta * p_theta / (r * r) + h0);
            let s = 1e-6f64;
            let fd = (h(r, p_r * s.exp(), p_theta * s.exp())
                - h(r, p_r * (-s).exp(), p_theta * (-s).exp()))
                / (2.0 * s);
            assert_relative_eq!(analytic, fd, max_relative = 1e-5, epsilon = 1e-9);
            assert!(analytic <= 0.0, "dh(p dp) must be nonpositive");
        }
    }

    proptest! {
        #[test]
        fn chart_invariance_of_eval(
            r in 0.1f64..12.0,
            theta in -3.1f64..3.1,
            p_r in -8.0f64..8.0,
            p_theta in -8.0f64..8.0,
        ) {
            let polar = PolarState::new(r, theta, p_r, p_theta);
            let cart = polar.to_cartesian().unwrap();
            for model in [
                HamiltonianModel::free(),
                HamiltonianModel::full(PotentialModel::power_law(2.0, 1.0)),
                HamiltonianModel::truncated(PotentialModel::power_law(2.0, 1.0), 3.0, 7.4).unwrap(),
            ] {
                let a = model.eval_cartesian(&cart);
                let b = model.eval_polar(&polar).unwrap();
                prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
            }
        }
    }
}

//! Phase-space states on T*R^2 in the Cartesian and polar charts.
//!
//! The polar angle is measured *clockwise*, `theta = -atan2(q2, q1)`, so that
//! `q1 = r cos(theta)`, `q2 = -r sin(theta)` and `p_theta = p1 q2 - p2 q1`.
//! This is the unique canonical convention under which the polar form of the
//! magnetic Hamiltonian, `p_r^2/2 + p_theta^2/(2 r^2) + p_theta`, equals its
//! Cartesian form `|p|^2/2 + p1 q2 - p2 q1`; with the usual counterclockwise
//! angle the sign of the magnetic term flips. The orientation is fixed here
//! once and the rest of the crate inherits it.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::Real;

/// Error from chart changes between Cartesian and polar coordinates.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    /// The position sits at the coordinate origin, where the polar chart is singular.
    #[error("position at the coordinate origin has no polar representation")]
    OriginSingularity,
    /// A polar state carried a non-positive radius.
    #[error("polar radius must be positive (got {0})")]
    NonpositiveRadius(f64),
}

/// A point of T*R^2 in the Cartesian chart: positions `(q1, q2)` and
/// conjugate momenta `(p1, p2)`, all in the nondimensional convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianState<R> {
    pub q1: R,
    pub q2: R,
    pub p1: R,
    pub p2: R,
}

/// A point of T*R^2 in the polar chart `(r, theta, p_r, p_theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarState<R> {
    /// Radius, positive away from the chart singularity.
    pub r: R,
    /// Clockwise angle in radians (see module docs); `to_polar` reduces it to (-pi, pi].
    pub theta: R,
    /// Radial momentum.
    pub p_r: R,
    /// Angular momentum conjugate to `theta`; equals `p1 q2 - p2 q1`.
    pub p_theta: R,
}

impl<R: Real> CartesianState<R> {
    pub fn new(q1: R, q2: R, p1: R, p2: R) -> Self {
        Self { q1, q2, p1, p2 }
    }

    /// Distance of the position from the origin.
    pub fn radius(&self) -> R {
        self.q1.hypot(self.q2)
    }

    /// Angular momentum `p1 q2 - p2 q1` (exact algebraic identity with the
    /// polar chart's `p_theta`).
    pub fn p_theta(&self) -> R {
        self.p1 * self.q2 - self.p2 * self.q1
    }

    pub fn is_finite(&self) -> bool {
        self.q1.is_finite() && self.q2.is_finite() && self.p1.is_finite() && self.p2.is_finite()
    }

    pub fn as_array(&self) -> [R; 4] {
        [self.q1, self.q2, self.p1, self.p2]
    }

    pub fn from_array(a: [R; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Chart change to polar coordinates.
    ///
    /// `r = |q|`, `theta = -atan2(q2, q1)`, `p_r = (q1 p1 + q2 p2)/r`,
    /// `p_theta = p1 q2 - p2 q1`. Fails on the origin, where the chart is
    /// singular.
    pub fn to_polar(&self) -> Result<PolarState<R>, ChartError> {
        let r = self.radius();
        if r <= R::zero() {
            return Err(ChartError::OriginSingularity);
        }
        Ok(PolarState {
            r,
            theta: -self.q2.atan2(self.q1),
            p_r: (self.q1 * self.p1 + self.q2 * self.p2) / r,
            p_theta: self.p_theta(),
        })
    }
}

impl<R: Real> PolarState<R> {
    pub fn new(r: R, theta: R, p_r: R, p_theta: R) -> Self {
        Self {
            r,
            theta,
            p_r,
            p_theta,
        }
    }

    /// Inverse chart change; `q1 = r cos(theta)`, `q2 = -r sin(theta)`.
    pub fn to_cartesian(&self) -> Result<CartesianState<R>, ChartError> {
        if self.r <= R::zero() {
            return Err(ChartError::NonpositiveRadius(self.r.as_f64()));
        }
        let (sin, cos) = self.theta.sin_cos();
        let pt_over_r = self.p_theta / self.r;
        Ok(CartesianState {
            q1: self.r * cos,
            q2: -self.r * sin,
            p1: self.p_r * cos - pt_over_r * sin,
            p2: -self.p_r * sin - pt_over_r * cos,
        })
    }
}

impl<R: Real> Add for CartesianState<R> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(
            self.q1 + rhs.q1,
            self.q2 + rhs.q2,
            self.p1 + rhs.p1,
            self.p2 + rhs.p2,
        )
    }
}

impl<R: Real> Sub for CartesianState<R> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(
            self.q1 - rhs.q1,
            self.q2 - rhs.q2,
            self.p1 - rhs.p1,
            self.p2 - rhs.p2,
        )
    }
}

impl<R: Real> Mul<R> for CartesianState<R> {
    type Output = Self;
    fn mul(self, s: R) -> Self {
        Self::new(self.q1 * s, self.q2 * s, self.p1 * s, self.p2 * s)
    }
}

/// Central-difference Poisson bracket `{f, g} = sum_i (df/dp_i dg/dq_i - df/dq_i dg/dp_i)`
/// at `s`, with step `h` owned by the caller (default used in tests: 1e-5,
/// which balances truncation against rounding at double precision).
///
/// With this sign convention `{H, f}` is the time derivative of `f` along the
/// Hamiltonian flow of `H`, e.g. `{H, r} = p_r`. Serves as the independent
/// oracle for the closed-form brackets used by the certificate module.
pub fn poisson_bracket_fd<R: Real>(
    f: impl Fn(&CartesianState<R>) -> R,
    g: impl Fn(&CartesianState<R>) -> R,
    s: &CartesianState<R>,
    h: R,
) -> R {
    let grad = |func: &dyn Fn(&CartesianState<R>) -> R| -> [R; 4] {
        let mut out = [R::zero(); 4];
        let base = s.as_array();
        for i in 0..4 {
            let mut plus = base;
            let mut minus = base;
            plus[i] = plus[i] + h;
            minus[i] = minus[i] - h;
            out[i] = (func(&CartesianState::from_array(plus))
                - func(&CartesianState::from_array(minus)))
                / (R::of(2.0) * h);
        }
        out
    };
    let df = grad(&f);
    let dg = grad(&g);
    // index order: [q1, q2, p1, p2]
    df[2] * dg[0] + df[3] * dg[1] - df[0] * dg[2] - df[1] * dg[3]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn h0(s: &CartesianState<f64>) -> f64 {
        0.5 * (s.p1 * s.p1 + s.p2 * s.p2) + s.p1 * s.q2 - s.p2 * s.q1
    }

    #[test]
    fn to_polar_zero_momentum() {
        let p = CartesianState::new(1.0, 0.0, 0.0, 0.0).to_polar().unwrap();
        assert_eq!((p.r, p.theta, p.p_r, p.p_theta), (1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn to_polar_tangential_momentum() {
        // Chart formulas evaluated by hand; the magnetic Hamiltonian takes the
        // value -1/2 in both charts at this point.
        let s = CartesianState::new(1.0, 0.0, 0.0, 1.0);
        let p = s.to_polar().unwrap();
        assert_eq!((p.r, p.theta, p.p_r, p.p_theta), (1.0, 0.0, 0.0, -1.0));
        let polar_h0 = 0.5 * p.p_r * p.p_r + 0.5 * p.p_theta * p.p_theta / (p.r * p.r) + p.p_theta;
        assert_relative_eq!(h0(&s), -0.5, max_relative = 1e-15);
        assert_relative_eq!(polar_h0, -0.5, max_relative = 1e-15);
    }

    #[test]
    fn to_polar_on_positive_q2_axis() {
        let p = CartesianState::new(0.0, 2.0, 0.0, 1.0).to_polar().unwrap();
        assert_relative_eq!(p.r, 2.0);
        assert_relative_eq!(p.theta, -std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(p.p_r, 1.0);
        assert_relative_eq!(p.p_theta, 0.0);
    }

    #[test]
    fn to_cartesian_inverts_the_examples() {
        let c = PolarState::new(1.0, 0.0, 0.0, 0.0).to_cartesian().unwrap();
        assert_eq!((c.q1, c.q2, c.p1, c.p2), (1.0, 0.0, 0.0, 0.0));

        let c = PolarState::new(2.0, -std::f64::consts::FRAC_PI_2, 1.0, 0.0)
            .to_cartesian()
            .unwrap();
        assert_relative_eq!(c.q1, 0.0, epsilon = 1e-15);
        assert_relative_eq!(c.q2, 2.0);
        assert_relative_eq!(c.p1, 0.0, epsilon = 1e-15);
        assert_relative_eq!(c.p2, 1.0);
    }

    #[test]
    fn origin_has_no_polar_chart() {
        assert_eq!(
            CartesianState::new(0.0, 0.0, 1.0, 2.0).to_polar(),
            Err(ChartError::OriginSingularity)
        );
        assert!(matches!(
            PolarState::new(0.0, 0.0, 1.0, 2.0).to_cartesian(),
            Err(ChartError::NonpositiveRadius(_))
        ));
    }

    #[test]
    fn round_trip_1000_random_states() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let s = PolarState::new(
                rng.gen_range(0.1..10.0),
                rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
            );
            let back = s.to_cartesian().unwrap().to_polar().unwrap();
            assert_relative_eq!(back.r, s.r, max_relative = 1e-12);
            assert_relative_eq!(back.theta, s.theta, max_relative = 1e-12, epsilon = 1e-12);
            assert_relative_eq!(back.p_r, s.p_r, max_relative = 1e-12, epsilon = 1e-12);
            assert_relative_eq!(
                back.p_theta,
                s.p_theta,
                max_relative = 1e-12,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn round_trip_at_f32() {
        let s = PolarState::<f32>::new(2.5, 0.7, -0.3, 1.2);
        let back = s.to_cartesian().unwrap().to_polar().unwrap();
        assert_relative_eq!(back.r, s.r, max_relative = 1e-6);
        assert_relative_eq!(back.theta, s.theta, max_relative = 1e-5);
        assert_relative_eq!(back.p_r, s.p_r, max_relative = 1e-5, epsilon = 1e-6);
        assert_relative_eq!(back.p_theta, s.p_theta, max_relative = 1e-5);
    }

    #[test]
    fn canonical_bracket_pairs() {
        // Under this crate's convention ({H, f} = df/dt along the flow, so
        // that {H, r} = p_r) the canonical pairs satisfy {p_i, q_i} = 1.
        let s = CartesianState::new(0.3, -1.2, 0.7, 2.1);
        let b = poisson_bracket_fd(|s| s.p1, |s| s.q1, &s, 1e-5);
        assert_relative_eq!(b, 1.0, epsilon = 1e-9);
        let b = poisson_bracket_fd(|s| s.q1, |s| s.p1, &s, 1e-5);
        assert_relative_eq!(b, -1.0, epsilon = 1e-9);
        let b = poisson_bracket_fd(|s| s.q1, |s| s.p2, &s, 1e-5);
        assert_relative_eq!(b, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn bracket_of_h_with_r_is_p_r() {
        // Full Hamiltonian with a radial 2/r tail; the bracket {H, r} must
        // reproduce the radial momentum of the state.
        let s = PolarState::new(2.0, 0.7, 3.0, -1.0).to_cartesian().unwrap();
        let h = |s: &CartesianState<f64>| h0(s) - 2.0 / s.radius();
        let b = poisson_bracket_fd(h, |s: &CartesianState<f64>| s.radius(), &s, 1e-5);
        assert_relative_eq!(b, 3.0, epsilon = 1e-6);
    }

    #[test]
    fn nested_bracket_of_h0_with_r() {
        // {H0, {H0, r}} = p_theta^2 / r^3 at p_r = 0; outer bracket taken by
        // finite differences against the closed-form inner bracket p_r.
        let p_r_fn = |s: &CartesianState<f64>| (s.q1 * s.p1 + s.q2 * s.p2) / s.radius();
        for (p_theta, expected) in [(4.0, 2.0), (8.0, 7.5 + 0.5)] {
            let s = PolarState::new(2.0, 0.0, 0.0, p_theta)
                .to_cartesian()
                .unwrap();
            let b = poisson_bracket_fd(h0, p_r_fn, &s, 1e-5);
            assert_relative_eq!(b, expected, epsilon = 1e-5);
            assert_relative_eq!(p_theta * p_theta / 8.0, expected, epsilon = 1e-15);
        }
    }

    proptest! {
        #[test]
        fn p_theta_matches_algebraic_identity(
            q1 in -10.0f64..10.0, q2 in -10.0f64..10.0,
            p1 in -10.0f64..10.0, p2 in -10.0f64..10.0,
        ) {
            let s = CartesianState::new(q1, q2, p1, p2);
            prop_assert_eq!(s.p_theta(), p1 * q2 - p2 * q1);
            if s.radius() > 0.1 {
                let polar = s.to_polar().unwrap();
                prop_assert_eq!(polar.p_theta, s.p_theta());
            }
        }

        #[test]
        fn round_trip_is_identity(
            r in 0.1f64..10.0,
            theta in -3.1f64..3.1,
            p_r in -10.0f64..10.0,
            p_theta in -10.0f64..10.0,
        ) {
            let s = PolarState::new(r, theta, p_r, p_theta);
            let back = s.to_cartesian().unwrap().to_polar().unwrap();
            prop_assert!((back.r - r).abs() <= 1e-12 * (1.0 + r.abs()));
            prop_assert!((back.theta - theta).abs() <= 1e-12 * (1.0 + theta.abs()));
            prop_assert!((back.p_r - p_r).abs() <= 1e-12 * (1.0 + p_r.abs()));
            prop_assert!((back.p_theta - p_theta).abs() <= 1e-12 * (1.0 + p_theta.abs()));
        }
    }
}

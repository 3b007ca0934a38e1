//! The C-infinity cutoff profile and the radial/energy cutoff pair used to
//! truncate a decaying potential into a compactly supported perturbation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CutoffError {
    #[error("outer radius must exceed inner radius (inner {inner}, outer {outer})")]
    BadRadii { inner: f64, outer: f64 },
    #[error("energy value must be positive (got {0})")]
    NonpositiveEnergy(f64),
}

/// Smooth step from 1 down to 0: equals 1 on (-inf, 0], 0 on [1, inf), is
/// nonincreasing, and its slope is bounded below by -2 (the bound is attained
/// at x = 1/2).
///
/// Built from the standard exponential partition of unity: on (0, 1) the value
/// is `sigma(1/x - 1/(1-x))` with `sigma` the logistic function.
pub fn step_down<R: Real>(x: R) -> R {
    if x <= R::zero() {
        R::one()
    } else if x >= R::one() {
        R::zero()
    } else {
        logistic(x.recip() - (R::one() - x).recip())
    }
}

/// Derivative of [`step_down`]; identically zero outside (0, 1).
pub fn step_down_slope<R: Real>(x: R) -> R {
    if x <= R::zero() || x >= R::one() {
        return R::zero();
    }
    let u = x.recip() - (R::one() - x).recip();
    let sp = logistic(u) * logistic(-u);
    if sp == R::zero() {
        // Underflowed double-exponential tail; the true slope is below
        // representable magnitude and 1/x^2 may overflow, so short-circuit.
        return R::zero();
    }
    -sp * ((x * x).recip() + ((R::one() - x) * (R::one() - x)).recip())
}

fn logistic<R: Real>(u: R) -> R {
    if u >= R::zero() {
        ((-u).exp() + R::one()).recip()
    } else {
        let e = u.exp();
        e / (e + R::one())
    }
}

/// Radial and energy cutoffs for a truncated Hamiltonian.
///
/// `radial(r)` switches the potential off between `inner_radius` and
/// `outer_radius`; `energy_cap(h0)` switches it off once the free energy
/// exceeds `potential_sup + energy`, which keeps the relevant level sets
/// entirely inside the region where the cap equals 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffConfig<R> {
    pub inner_radius: R,
    pub outer_radius: R,
    /// Energy value the truncation is built for.
    pub energy: R,
    /// Upper bound for the potential over the whole plane.
    pub potential_sup: R,
}

impl<R: Real> CutoffConfig<R> {
    pub fn new(
        inner_radius: R,
        outer_radius: R,
        energy: R,
        potential_sup: R,
    ) -> Result<Self, CutoffError> {
        if !(outer_radius > inner_radius) {
            return Err(CutoffError::BadRadii {
                inner: inner_radius.as_f64(),
                outer: outer_radius.as_f64(),
            });
        }
        if !(energy > R::zero()) {
            return Err(CutoffError::NonpositiveEnergy(energy.as_f64()));
        }
        Ok(Self {
            inner_radius,
            outer_radius,
            energy,
            potential_sup,
        })
    }

    fn width(&self) -> R {
        self.outer_radius - self.inner_radius
    }

    /// Radial cutoff: 1 inside the inner ball, 0 outside the outer ball.
    pub fn radial(&self, r: R) -> R {
        step_down((r - self.inner_radius) / self.width())
    }

    /// d/dr of [`Self::radial`]; bounded below by -2 / (outer - inner).
    pub fn radial_slope(&self, r: R) -> R {
        step_down_slope((r - self.inner_radius) / self.width()) / self.width()
    }

    /// Energy cutoff evaluated at a free-Hamiltonian value.
    pub fn energy_cap(&self, h0: R) -> R {
        step_down(h0 - self.potential_sup - self.energy)
    }

    /// Derivative of [`Self::energy_cap`] in its argument.
    pub fn energy_cap_slope(&self, h0: R) -> R {
        step_down_slope(h0 - self.potential_sup - self.energy)
    }
}

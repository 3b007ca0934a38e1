//! The two-boost boundary value problem: find `(v, eta)` with
//! `dv/dt = eta X_H(v)`, `v` on the energy-`c` level set, `v(0)` in the fiber
//! over `q0` and `v(1)` in the fiber over `q1`.
//!
//! Completing the square in the magnetic Hamiltonian shows the intersection
//! of a cotangent fiber with a level set is a circle in momentum space, so
//! the problem reduces to a 2x2 root find in the fiber angle `psi` and the
//! physical duration `T`: multi-start damped Newton with a finite-difference
//! Jacobian over a `psi x T` grid, deduplicated by proximity. The multiplier
//! `eta` is exactly the duration of the unit-speed flow, and the chord is the
//! trajectory reparametrized to `[0, 1]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{flow_at_times, DynamicsError, IntegratorConfig};
use crate::hamiltonian::{HamiltonianModel, ModelKind};
use crate::phase_space::CartesianState;
use crate::potential::Potential;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChordError {
    #[error("the fiber circle is empty (radius^2 = {radius_sq} <= 0)")]
    EmptyFiber { radius_sq: f64 },
    #[error("chord shooting supports the free and full models only")]
    UnsupportedModel,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// The circle `H(q, .) = c` inside the cotangent fiber over `q`:
/// `p(psi) = center + radius (cos psi, sin psi)` with `center = (-q2, q1)`
/// and `radius = sqrt(2 (c + V(q)) + |q|^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberCircle<R> {
    pub base: [R; 2],
    pub center: [R; 2],
    pub radius: R,
    pub energy: R,
}

impl<R: Real> FiberCircle<R> {
    pub fn momentum(&self, psi: R) -> [R; 2] {
        let (sin, cos) = psi.sin_cos();
        [
            self.center[0] + self.radius * cos,
            self.center[1] + self.radius * sin,
        ]
    }

    pub fn state(&self, psi: R) -> CartesianState<R> {
        let p = self.momentum(psi);
        CartesianState::new(self.base[0], self.base[1], p[0], p[1])
    }
}

/// Builds the energy-`c` fiber circle over `q` for a free or full model.
pub fn fiber_circle<R: Real>(
    model: &HamiltonianModel<R>,
    q: [R; 2],
    c: R,
) -> Result<FiberCircle<R>, ChordError> {
    let v_at_q = match model.kind() {
        ModelKind::Free => R::zero(),
        ModelKind::Full => {
            let v = model.potential().expect("full model has a potential");
            let r = q[0].hypot(q[1]);
            v.value(r, -q[1].atan2(q[0]))
        }
        ModelKind::Truncated => return Err(ChordError::UnsupportedModel),
    };
    let radius_sq = R::of(2.0) * (c + v_at_q) + q[0] * q[0] + q[1] * q[1];
    if radius_sq <= R::zero() {
        return Err(ChordError::EmptyFiber {
            radius_sq: radius_sq.as_f64(),
        });
    }
    Ok(FiberCircle {
        base: q,
        center: [-q[1], q[0]],
        radius: radius_sq.sqrt(),
        energy: c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<R> {
    /// Fiber-angle starts per sweep.
    pub psi_grid: usize,
    /// Log-spaced duration starts per sweep.
    pub t_grid: usize,
    /// Chords shorter than this are treated as degenerate and dropped.
    pub min_eta: R,
    pub max_eta: R,
    /// Endpoint residual the polished roots must reach.
    pub newton_tol: R,
    pub newton_max_iter: usize,
    /// Roots closer than this in `(psi, T)` (duration relatively) are merged.
    pub dedup_psi: R,
    pub dedup_t_rel: R,
    /// Samples per returned chord (kept odd for the quadrature).
    pub samples_per_chord: usize,
    /// Integrator tolerance during the Newton sweep.
    pub search_tol: R,
    /// Integrator tolerance for polishing and for the returned chords.
    pub refine_tol: R,
}

impl<R: Real> Default for SolverConfig<R> {
    fn default() -> Self {
        Self {
            psi_grid: 64,
            t_grid: 16,
            min_eta: R::of(1e-3),
            max_eta: R::of(50.0),
            newton_tol: R::of(1e-10),
            newton_max_iter: 30,
            dedup_psi: R::of(1e-3),
            dedup_t_rel: R::of(1e-3),
            samples_per_chord: 257,
            search_tol: R::of(1e-10),
            refine_tol: R::of(1e-12),
        }
    }
}

/// A shooting instance: model, endpoints, energy and solver knobs.
#[derive(Debug, Clone)]
pub struct ShootingProblem<R> {
    pub model: HamiltonianModel<R>,
    pub q0: [R; 2],
    pub q1: [R; 2],
    pub c: R,
    pub config: SolverConfig<R>,
    fiber: FiberCircle<R>,
}

/// One sampled point of a chord, at chord time `t` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChordSample<R> {
    pub t: R,
    pub q1: R,
    pub q2: R,
    pub p1: R,
    pub p2: R,
}

impl<R: Real> ChordSample<R> {
    pub fn state(&self) -> CartesianState<R> {
        CartesianState::new(self.q1, self.q2, self.p1, self.p2)
    }
}

/// A solved chord: the reparametrized trajectory plus its multiplier and
/// diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chord<R> {
    pub q0: [R; 2],
    pub q1: [R; 2],
    pub c: R,
    /// Fiber angle of the departure momentum.
    pub psi: R,
    /// Multiplier = physical duration of the unit-speed flow.
    pub eta: R,
    /// Value of the action functional along the chord.
    pub action: R,
    /// `eta * integral of (H - c)`: the action's constraint term, reported
    /// separately as an on-shell diagnostic (should vanish).
    pub action_offshell: R,
    /// Endpoint miss distance `|q(1) - q1|`.
    pub residual: R,
    /// Maximum position radius along the trajectory (step interiors probed).
    pub max_radius: R,
    /// Maximum of `|H - c|` over the samples.
    pub energy_deviation: R,
    pub samples: Vec<ChordSample<R>>,
}

/// Action value split into its contact and constraint parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBreakdown<R> {
    /// `integral of p dq/dt - eta * integral of (H - c)`.
    pub total: R,
    pub contact_term: R,
    pub offshell_term: R,
}

impl<R: Real> ShootingProblem<R> {
    pub fn new(
        model: HamiltonianModel<R>,
        q0: [R; 2],
        q1: [R; 2],
        c: R,
        config: SolverConfig<R>,
    ) -> Result<Self, ChordError> {
        let fiber = fiber_circle(&model, q0, c)?;
        Ok(Self {
            model,
            q0,
            q1,
            c,
            config,
            fiber,
        })
    }

    pub fn fiber(&self) -> &FiberCircle<R> {
        &self.fiber
    }

    /// Integrates from `(q0, p(psi))` for duration `t` and returns the
    /// endpoint miss `q(t) - q1`, at full precision.
    pub fn shoot(&self, psi: R, t: R) -> Result<[R; 2], ChordError> {
        self.residual(psi, t, self.config.refine_tol)
    }

    fn residual(&self, psi: R, t: R, tol: R) -> Result<[R; 2], ChordError> {
        let cfg = IntegratorConfig::with_tolerances(tol, tol);
        let traj = flow_at_times(&self.model, &self.fiber.state(psi), &[t], &cfg)?;
        let end = traj.final_state();
        Ok([end.q1 - self.q1[0], end.q2 - self.q1[1]])
    }

    /// Multi-start damped Newton over the `psi x T` grid; converged roots are
    /// deduplicated, reparametrized to `[0, 1]`, measured, and sorted by
    /// action (descending). An empty list means the sweep found no chord; it
    /// is a valid outcome, distinct from an `Err`.
    pub fn find_chords(&self) -> Result<Vec<Chord<R>>, ChordError> {
        let cfg = &self.config;
        let mut starts = Vec::with_capacity(cfg.psi_grid * cfg.t_grid);
        let ratio = (cfg.max_eta / cfg.min_eta).ln();
        for i in 0..cfg.psi_grid {
            let psi = R::of(2.0) * R::PI() * R::of(i as f64 / cfg.psi_grid as f64);
            for j in 0..cfg.t_grid {
                let frac = if cfg.t_grid > 1 {
                    R::of(j as f64 / (cfg.t_grid - 1) as f64)
                } else {
                    R::one()
                };
                starts.push((psi, cfg.min_eta * (ratio * frac).exp()));
            }
        }

        let roots: Vec<(R, R, R)> = starts
            .par_iter()
            .filter_map(|&(psi, t)| {
                let coarse =
                    self.newton(psi, t, cfg.search_tol, R::of(1e-6), cfg.newton_max_iter)?;
                self.newton(coarse.0, coarse.1, cfg.refine_tol, cfg.newton_tol, 8)
            })
            .collect();

        // Deduplicate by (psi, T) proximity, keeping the best residual.
        let mut ordered = roots;
        ordered.sort_by(|a, b| a.2.partial_cmp(&b.2).expect("finite residuals"));
        let two_pi = R::of(2.0) * R::PI();
        let mut kept: Vec<(R, R, R)> = Vec::new();
        for (psi, t, res) in ordered {
            if t < cfg.min_eta {
                continue;
            }
            let duplicate = kept.iter().any(|&(kp, kt, _)| {
                let mut dpsi = (psi - kp).abs() % two_pi;
                if dpsi > R::PI() {
                    dpsi = two_pi - dpsi;
                }
                dpsi <= cfg.dedup_psi && (t - kt).abs() <= cfg.dedup_t_rel * t.max(kt)
            });
            if !duplicate {
                kept.push((psi, t, res));
            }
        }
        kept.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).expect("finite roots"));

        let mut chords = Vec::with_capacity(kept.len());
        for (psi, t, _) in kept {
            chords.push(self.build_chord(psi, t)?);
        }
        chords.sort_by(|a, b| b.action.partial_cmp(&a.action).expect("finite actions"));
        Ok(chords)
    }

    /// Damped Newton on `(psi, T)` with a forward-difference Jacobian.
    /// Returns `(psi, T, |residual|)` on convergence.
    fn newton(&self, psi0: R, t0: R, tol: R, target: R, max_iter: usize) -> Option<(R, R, R)> {
        let cfg = &self.config;
        let t_floor = cfg.min_eta * R::of(0.25);
        let t_ceil = cfg.max_eta * R::of(1.5);
        let mut psi = psi0;
        let mut t = t0;
        let mut res = self.residual(psi, t, tol).ok()?;
        let mut norm = res[0].hypot(res[1]);
        for _ in 0..max_iter {
            if norm <= target {
                return Some((psi, t, norm));
            }
            let dpsi = R::of(1e-6);
            let dt = R::of(1e-6) * t.max(R::of(0.1));
            let r_psi = self.residual(psi + dpsi, t, tol).ok()?;
            let r_t = self.residual(psi, t + dt, tol).ok()?;
            let j00 = (r_psi[0] - res[0]) / dpsi;
            let j10 = (r_psi[1] - res[1]) / dpsi;
            let j01 = (r_t[0] - res[0]) / dt;
            let j11 = (r_t[1] - res[1]) / dt;
            let det = j00 * j11 - j01 * j10;
            if det.abs() < R::of(1e-14) * (j00.abs() + j01.abs() + j10.abs() + j11.abs() + R::one())
            {
                return None;
            }
            let step_psi = -(j11 * res[0] - j01 * res[1]) / det;
            let step_t = -(-j10 * res[0] + j00 * res[1]) / det;

            let mut lambda = R::one();
            loop {
                let cand_psi = psi + lambda * step_psi;
                let cand_t = t + lambda * step_t;
                if cand_t > t_floor && cand_t <= t_ceil {
                    if let Ok(cand_res) = self.residual(cand_psi, cand_t, tol) {
                        let cand_norm = cand_res[0].hypot(cand_res[1]);
                        if cand_norm < norm * (R::one() - R::of(0.25) * lambda)
                            || cand_norm <= target
                        {
                            psi = cand_psi;
                            t = cand_t;
                            res = cand_res;
                            norm = cand_norm;
                            break;
                        }
                    }
                }
                lambda = lambda * R::of(0.5);
                if lambda < R::of(1e-4) {
                    return None;
                }
            }
        }
        if norm <= target {
            Some((psi, t, norm))
        } else {
            None
        }
    }

    fn build_chord(&self, psi: R, eta: R) -> Result<Chord<R>, ChordError> {
        let n = self.config.samples_per_chord.max(3) | 1;
        let times: Vec<R> = (0..n)
            .map(|k| eta * R::of(k as f64 / (n - 1) as f64))
            .collect();
        let cfg = IntegratorConfig::with_tolerances(self.config.refine_tol, self.config.refine_tol);
        let traj = flow_at_times(&self.model, &self.fiber.state(psi), &times, &cfg)?;

        let samples: Vec<ChordSample<R>> = traj
            .states
            .iter()
            .enumerate()
            .map(|(k, s)| ChordSample {
                t: R::of(k as f64 / (n - 1) as f64),
                q1: s.q1,
                q2: s.q2,
                p1: s.p1,
                p2: s.p2,
            })
            .collect();
        let end = traj.final_state();
        let residual = (end.q1 - self.q1[0]).hypot(end.q2 - self.q1[1]);
        let energy_deviation = traj
            .states
            .iter()
            .map(|s| (self.model.eval_cartesian(s) - self.c).abs())
            .fold(R::zero(), |a, b| a.max(b));

        let mut chord = Chord {
            q0: self.q0,
            q1: self.q1,
            c: self.c,
            psi,
            eta,
            action: R::zero(),
            action_offshell: R::zero(),
            residual,
            max_radius: traj.max_radius,
            energy_deviation,
            samples,
        };
        let action = rabinowitz_action(&chord, &self.model);
        chord.action = action.total;
        chord.action_offshell = action.offshell_term;
        Ok(chord)
    }
}

/// Composite-Simpson evaluation of the action functional
/// `A = integral over [0,1] of p dq/dt - eta * integral of (H - c)` on the
/// chord's samples; `dq/dt` is `eta` times the model's velocity field, so the
/// quadrature needs no numerical differentiation.
pub fn rabinowitz_action<R: Real>(
    chord: &Chord<R>,
    model: &HamiltonianModel<R>,
) -> ActionBreakdown<R> {
    let contact: Vec<R> = chord
        .samples
        .iter()
        .map(|s| {
            let state = s.state();
            let vel = model.vector_field_cartesian(&state);
            chord.eta * (state.p1 * vel.q1 + state.p2 * vel.q2)
        })
        .collect();
    let offshell: Vec<R> = chord
        .samples
        .iter()
        .map(|s| model.eval_cartesian(&s.state()) - chord.c)
        .collect();
    let h = R::one() / R::of((chord.samples.len() - 1) as f64);
    let contact_term = simpson(&contact, h);
    let offshell_term = chord.eta * simpson(&offshell, h);
    ActionBreakdown {
        total: contact_term - offshell_term,
        contact_term,
        offshell_term,
    }
}

/// Whether the chord stays inside the closed ball of radius `r1`
/// (with 1e-9 slack for the boundary).
pub fn check_confinement<R: Real>(chord: &Chord<R>, r1: R) -> bool {
    chord.max_radius <= r1 + R::of(1e-9)
}

fn simpson<R: Real>(values: &[R], h: R) -> R {
    let n = values.len();
    assert!(
        n >= 3 && n % 2 == 1,
        "Simpson quadrature needs an odd sample count"
    );
    let mut acc = values[0] + values[n - 1];
    for (k, v) in values.iter().enumerate().take(n - 1).skip(1) {
        acc = acc + *v * if k % 2 == 1 { R::of(4.0) } else { R::of(2.0) };
    }
    acc * h / R::of(3.0)
}

//! Numerical integration of the Hamiltonian flows in the Cartesian chart,
//! with conservation monitoring, plus the closed-form oracle for the free
//! magnetic flow.
//!
//! The default integrator is an embedded Dormand-Prince 5(4) pair with
//! fourth-order dense output; a fixed-step implicit midpoint rule is offered
//! for long-time structure-preserving sanity runs. Integration always happens
//! in the Cartesian chart, which is globally smooth; the polar chart is used
//! only for analysis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamiltonian::HamiltonianModel;
use crate::phase_space::CartesianState;
use crate::real::Real;

/// Radius below which the Cartesian chart is considered to have hit the
/// collision/cap core and integration aborts.
pub const ORIGIN_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("trajectory approached the origin (|q| < 1e-6) at t = {t}")]
    OriginApproach { t: f64 },
    #[error("step size underflow at t = {t}")]
    StepFailure { t: f64 },
    #[error("initial state has non-finite components")]
    InvalidState,
    #[error("invalid duration or sample times: {0}")]
    InvalidDuration(String),
    #[error("energy drift {drift} exceeded the configured bound at t = {t}")]
    EnergyDriftExceeded { t: f64, drift: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum IntegratorMethod<R> {
    /// Embedded adaptive Runge-Kutta pair of order 5(4) with dense output.
    AdaptiveRungeKutta,
    /// Fixed-step implicit midpoint (symplectic), step `dt`.
    ImplicitMidpoint { dt: R },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig<R> {
    pub method: IntegratorMethod<R>,
    pub abs_tol: R,
    pub rel_tol: R,
    pub max_step: R,
    /// Hard cap on the integration span; a plain safety rail.
    pub max_time: R,
    /// Output samples for [`flow`] (equally spaced, endpoints included).
    pub output_points: usize,
    /// Abort with an error if `|H(s(t)) - H(s(0))|` ever exceeds this.
    pub max_energy_drift: Option<R>,
}

impl<R: Real> Default for IntegratorConfig<R> {
    fn default() -> Self {
        Self {
            method: IntegratorMethod::AdaptiveRungeKutta,
            abs_tol: R::of(1e-12),
            rel_tol: R::of(1e-12),
            max_step: R::of(0.5),
            max_time: R::of(1e6),
            output_points: 201,
            max_energy_drift: None,
        }
    }
}

impl<R: Real> IntegratorConfig<R> {
    pub fn with_tolerances(abs_tol: R, rel_tol: R) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

/// A sampled integral curve with its conservation diagnostics.
///
/// `times` are strictly increasing; `energy_drift` and `p_theta_drift` are
/// maxima of `|H(s(t)) - H(s(0))|` and `|p_theta(t) - p_theta(0)|` over the
/// accepted steps and samples; `max_radius` additionally probes step
/// interiors through the dense output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<R> {
    pub times: Vec<R>,
    pub states: Vec<CartesianState<R>>,
    pub energy_drift: R,
    pub max_radius: R,
    pub p_theta_drift: R,
}

impl<R: Real> Trajectory<R> {
    pub fn final_state(&self) -> CartesianState<R> {
        *self.states.last().expect("trajectory is nonempty")
    }
}

/// Result of a radius-confinement scan over a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfinementReport<R> {
    pub confined: bool,
    /// First crossing of the radius, linearly interpolated between samples;
    /// `None` when confined (or when only a step interior grazed outside).
    pub first_exit_time: Option<R>,
}

/// Integrates the model's flow for duration `t_final > 0` and samples it at
/// `output_points` equally spaced times.
pub fn flow<R: Real>(
    model: &HamiltonianModel<R>,
    s0: &CartesianState<R>,
    t_final: R,
    cfg: &IntegratorConfig<R>,
) -> Result<Trajectory<R>, DynamicsError> {
    if !(t_final > R::zero()) || !t_final.is_finite() {
        return Err(DynamicsError::InvalidDuration(format!(
            "duration {}",
            t_final.as_f64()
        )));
    }
    let n = cfg.output_points.max(2);
    let times: Vec<R> = (0..n)
        .map(|k| t_final * R::of(k as f64 / (n - 1) as f64))
        .collect();
    flow_at_times(model, s0, &times, cfg)
}

/// Integrates the model's flow and samples it at the caller's `times`
/// (nonnegative, strictly increasing; dense output serves interior times).
pub fn flow_at_times<R: Real>(
    model: &HamiltonianModel<R>,
    s0: &CartesianState<R>,
    times: &[R],
    cfg: &IntegratorConfig<R>,
) -> Result<Trajectory<R>, DynamicsError> {
    let field = |s: &CartesianState<R>| model.vector_field_cartesian(s);
    let energy = |s: &CartesianState<R>| model.eval_cartesian(s);
    integrate(&field, &energy, s0, times, cfg)
}

/// Integrates the time-reversed flow (`ds/dt = -X_H`) for reversibility
/// checks; `times` are elapsed backward durations.
pub fn flow_reversed<R: Real>(
    model: &HamiltonianModel<R>,
    s0: &CartesianState<R>,
    times: &[R],
    cfg: &IntegratorConfig<R>,
) -> Result<Trajectory<R>, DynamicsError> {
    let field = |s: &CartesianState<R>| model.vector_field_cartesian(s) * -R::one();
    let energy = |s: &CartesianState<R>| model.eval_cartesian(s);
    integrate(&field, &energy, s0, times, cfg)
}

/// Closed-form flow of the free magnetic Hamiltonian: the kinetic and
/// rotation parts commute, so `q(t) = R(-t)(q0 + t p0)`, `p(t) = R(-t) p0`
/// with `R` the counterclockwise rotation matrix. Exact up to rounding; the
/// oracle the adaptive integrator is measured against.
pub fn free_flow_exact<R: Real>(s0: &CartesianState<R>, t: R) -> CartesianState<R> {
    let (sin, cos) = t.sin_cos();
    let qx = s0.q1 + t * s0.p1;
    let qy = s0.q2 + t * s0.p2;
    CartesianState::new(
        cos * qx + sin * qy,
        -sin * qx + cos * qy,
        cos * s0.p1 + sin * s0.p2,
        -sin * s0.p1 + cos * s0.p2,
    )
}

/// Scans a trajectory against a confinement radius.
pub fn monitor_confinement<R: Real>(traj: &Trajectory<R>, radius: R) -> ConfinementReport<R> {
    if traj.max_radius <= radius {
        return ConfinementReport {
            confined: true,
            first_exit_time: None,
        };
    }
    let mut prev_t = traj.times[0];
    let mut prev_r = traj.states[0].radius();
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let r = s.radius();
        if r > radius {
            let denom = r - prev_r;
            let frac = if denom > R::zero() {
                (radius - prev_r) / denom
            } else {
                R::one()
            };
            let frac = frac.max(R::zero()).min(R::one());
            return ConfinementReport {
                confined: false,
                first_exit_time: Some(prev_t + (*t - prev_t) * frac),
            };
        }
        prev_t = *t;
        prev_r = r;
    }
    ConfinementReport {
        confined: false,
        first_exit_time: None,
    }
}

struct Monitors<R> {
    e0: R,
    pth0: R,
    max_radius: R,
    energy_drift: R,
    p_theta_drift: R,
    drift_bound: Option<R>,
}

impl<R: Real> Monitors<R> {
    fn new(e0: R, pth0: R, r0: R, drift_bound: Option<R>) -> Self {
        Self {
            e0,
            pth0,
            max_radius: r0,
            energy_drift: R::zero(),
            p_theta_drift: R::zero(),
            drift_bound,
        }
    }

    fn observe_radius(&mut self, s: &CartesianState<R>, t: R) -> Result<(), DynamicsError> {
        let r = s.radius();
        if r < R::of(ORIGIN_RADIUS) {
            return Err(DynamicsError::OriginApproach { t: t.as_f64() });
        }
        self.max_radius = self.max_radius.max(r);
        Ok(())
    }

    fn observe(
        &mut self,
        s: &CartesianState<R>,
        t: R,
        energy: &impl Fn(&CartesianState<R>) -> R,
    ) -> Result<(), DynamicsError> {
        self.observe_radius(s, t)?;
        self.energy_drift = self.energy_drift.max((energy(s) - self.e0).abs());
        self.p_theta_drift = self.p_theta_drift.max((s.p_theta() - self.pth0).abs());
        if let Some(bound) = self.drift_bound {
            if self.energy_drift > bound {
                return Err(DynamicsError::EnergyDriftExceeded {
                    t: t.as_f64(),
                    drift: self.energy_drift.as_f64(),
                });
            }
        }
        Ok(())
    }
}

fn validate_times<R: Real>(times: &[R], max_time: R) -> Result<(), DynamicsError> {
    if times.is_empty() {
        return Err(DynamicsError::InvalidDuration("no sample times".into()));
    }
    let mut prev = -R::one();
    for &t in times {
        if !t.is_finite() || t < R::zero() || t <= prev {
            return Err(DynamicsError::InvalidDuration(format!(
                "sample times must be nonnegative and strictly increasing (got {})",
                t.as_f64()
            )));
        }
        prev = t;
    }
    let last = *times.last().expect("nonempty");
    if !(last > R::zero()) || last > max_time {
        return Err(DynamicsError::InvalidDuration(format!(
            "final time {} must lie in (0, max_time]",
            last.as_f64()
        )));
    }
    Ok(())
}

fn integrate<R: Real>(
    field: &impl Fn(&CartesianState<R>) -> CartesianState<R>,
    energy: &impl Fn(&CartesianState<R>) -> R,
    s0: &CartesianState<R>,
    times: &[R],
    cfg: &IntegratorConfig<R>,
) -> Result<Trajectory<R>, DynamicsError> {
    if !s0.is_finite() {
        return Err(DynamicsError::InvalidState);
    }
    validate_times(times, cfg.max_time)?;
    if !(cfg.abs_tol > R::zero()) || !(cfg.rel_tol > R::zero()) {
        return Err(DynamicsError::InvalidDuration(
            "tolerances must be positive".into(),
        ));
    }
    match cfg.method {
        IntegratorMethod::AdaptiveRungeKutta => dp5(field, energy, s0, times, cfg),
        IntegratorMethod::ImplicitMidpoint { dt } => midpoint(field, energy, s0, times, cfg, dt),
    }
}

// stage nodes are omitted: the fields are autonomous
struct Dp5<R> {
    a: [[R; 6]; 6],
    b: [R; 7],
    e: [R; 7],
    d: [R; 7],
}

impl<R: Real> Dp5<R> {
    fn new() -> Self {
        let z = R::zero();
        let a = [
            [R::of(1.0 / 5.0), z, z, z, z, z],
            [R::of(3.0 / 40.0), R::of(9.0 / 40.0), z, z, z, z],
            [
                R::of(44.0 / 45.0),
                R::of(-56.0 / 15.0),
                R::of(32.0 / 9.0),
                z,
                z,
                z,
            ],
            [
                R::of(19372.0 / 6561.0),
                R::of(-25360.0 / 2187.0),
                R::of(64448.0 / 6561.0),
                R::of(-212.0 / 729.0),
                z,
                z,
            ],
            [
                R::of(9017.0 / 3168.0),
                R::of(-355.0 / 33.0),
                R::of(46732.0 / 5247.0),
                R::of(49.0 / 176.0),
                R::of(-5103.0 / 18656.0),
                z,
            ],
            [
                R::of(35.0 / 384.0),
                z,
                R::of(500.0 / 1113.0),
                R::of(125.0 / 192.0),
                R::of(-2187.0 / 6784.0),
                R::of(11.0 / 84.0),
            ],
        ];
        let b = [
            R::of(35.0 / 384.0),
            z,
            R::of(500.0 / 1113.0),
            R::of(125.0 / 192.0),
            R::of(-2187.0 / 6784.0),
            R::of(11.0 / 84.0),
            z,
        ];
        // b - b_hat: the embedded fourth-order error weights
        let e = [
            R::of(71.0 / 57600.0),
            z,
            R::of(-71.0 / 16695.0),
            R::of(71.0 / 1920.0),
            R::of(-17253.0 / 339200.0),
            R::of(22.0 / 525.0),
            R::of(-1.0 / 40.0),
        ];
        // dense-output weights
        let d = [
            R::of(-12715105075.0 / 11282082432.0),
            z,
            R::of(87487479700.0 / 32700410799.0),
            R::of(-10690763975.0 / 1880347072.0),
            R::of(701980252875.0 / 199316789632.0),
            R::of(-1453857185.0 / 822651844.0),
            R::of(69997945.0 / 29380423.0),
        ];
        Self { a, b, e, d }
    }
}

fn dp5<R: Real>(
    field: &impl Fn(&CartesianState<R>) -> CartesianState<R>,
    energy: &impl Fn(&CartesianState<R>) -> R,
    s0: &CartesianState<R>,
    times: &[R],
    cfg: &IntegratorConfig<R>,
) -> Result<Trajectory<R>, DynamicsError> {
    let tab = Dp5::<R>::new();
    let t_end = *times.last().expect("nonempty");
    let mut out_times = Vec::with_capacity(times.len());
    let mut out_states = Vec::with_capacity(times.len());
    let mut out_idx = 0usize;

    let mut t = R::zero();
    let mut y = *s0;
    let mut monitors = Monitors::new(energy(&y), y.p_theta(), y.radius(), cfg.max_energy_drift);
    monitors.observe(&y, t, energy)?;
    while out_idx < times.len() && times[out_idx] == R::zero() {
        out_times.push(R::zero());
        out_states.push(y);
        out_idx += 1;
    }

    let mut k1 = field(&y);
    let mut h = (t_end / R::of(100.0)).min(cfg.max_step).min(R::of(1e-3));
    let mut steps: u64 = 0;
    let order_exp = R::of(-0.2);
    let safety = R::of(0.9);

    while t < t_end {
        steps += 1;
        if steps > 50_000_000 {
            return Err(DynamicsError::StepFailure { t: t.as_f64() });
        }
        if h < R::of(1e-14) * (R::one() + t.abs()) {
            return Err(DynamicsError::StepFailure { t: t.as_f64() });
        }
        let last = h >= t_end - t;
        if last {
            h = t_end - t;
        }

        let k2 = field(&(y + k1 * (tab.a[0][0] * h)));
        let k3 = field(&(y + (k1 * tab.a[1][0] + k2 * tab.a[1][1]) * h));
        let k4 = field(&(y + (k1 * tab.a[2][0] + k2 * tab.a[2][1] + k3 * tab.a[2][2]) * h));
        let k5 = field(
            &(y + (k1 * tab.a[3][0] + k2 * tab.a[3][1] + k3 * tab.a[3][2] + k4 * tab.a[3][3]) * h),
        );
        let k6 = field(
            &(y + (k1 * tab.a[4][0]
                + k2 * tab.a[4][1]
                + k3 * tab.a[4][2]
                + k4 * tab.a[4][3]
                + k5 * tab.a[4][4])
                * h),
        );
        let dy =
            (k1 * tab.b[0] + k3 * tab.b[2] + k4 * tab.b[3] + k5 * tab.b[4] + k6 * tab.b[5]) * h;
        let y_new = y + dy;
        let k7 = field(&y_new);
        let err_vec = (k1 * tab.e[0]
            + k3 * tab.e[2]
            + k4 * tab.e[3]
            + k5 * tab.e[4]
            + k6 * tab.e[5]
            + k7 * tab.e[6])
            * h;

        let ya = y.as_array();
        let yb = y_new.as_array();
        let ev = err_vec.as_array();
        let mut err_sq = R::zero();
        for i in 0..4 {
            let sc = cfg.abs_tol + cfg.rel_tol * ya[i].abs().max(yb[i].abs());
            let q = ev[i] / sc;
            err_sq = err_sq + q * q;
        }
        let err = (err_sq / R::of(4.0)).sqrt();

        if !err.is_finite() {
            h = h * R::of(0.1);
            continue;
        }
        if err <= R::one() {
            // dense-output coefficients for this step
            let rcont1 = y;
            let rcont2 = dy;
            let rcont3 = k1 * h - dy;
            let rcont4 = dy - k7 * h - rcont3;
            let rcont5 = (k1 * tab.d[0]
                + k3 * tab.d[2]
                + k4 * tab.d[3]
                + k5 * tab.d[4]
                + k6 * tab.d[5]
                + k7 * tab.d[6])
                * h;
            let dense = |theta: R| {
                let one_m = R::one() - theta;
                rcont1 + (rcont2 + (rcont3 + (rcont4 + rcont5 * one_m) * theta) * one_m) * theta
            };

            let t_new = if last { t_end } else { t + h };
            while out_idx < times.len() && times[out_idx] <= t_new {
                let theta = ((times[out_idx] - t) / h).min(R::one());
                let s = dense(theta);
                monitors.observe(&s, times[out_idx], energy)?;
                out_times.push(times[out_idx]);
                out_states.push(s);
                out_idx += 1;
            }
            for probe in [0.25, 0.5, 0.75] {
                monitors.observe_radius(&dense(R::of(probe)), t + h * R::of(probe))?;
            }
            monitors.observe(&y_new, t_new, energy)?;

            t = t_new;
            y = y_new;
            k1 = k7;
            let factor = (safety * err.powf(order_exp))
                .max(R::of(0.2))
                .min(R::of(5.0));
            h = (h * factor).min(cfg.max_step);
        } else {
            let factor = (safety * err.powf(order_exp))
                .max(R::of(0.1))
                .min(R::of(0.9));
            h = h * factor;
        }
    }

    debug_assert_eq!(out_idx, times.len(), "all sample times must be served");
    Ok(Trajectory {
        times: out_times,
        states: out_states,
        energy_drift: monitors.energy_drift,
        max_radius: monitors.max_radius,
        p_theta_drift: monitors.p_theta_drift,
    })
}

fn midpoint<R: Real>(
    field: &impl Fn(&CartesianState<R>) -> CartesianState<R>,
    energy: &impl Fn(&CartesianState<R>) -> R,
    s0: &CartesianState<R>,
    times: &[R],
    cfg: &IntegratorConfig<R>,
    dt: R,
) -> Result<Trajectory<R>, DynamicsError> {
    if !(dt > R::zero()) {
        return Err(DynamicsError::InvalidDuration(format!(
            "midpoint step {}",
            dt.as_f64()
        )));
    }
    let mut out_times = Vec::with_capacity(times.len());
    let mut out_states = Vec::with_capacity(times.len());
    let mut t = R::zero();
    let mut y = *s0;
    let mut monitors = Monitors::new(energy(&y), y.p_theta(), y.radius(), cfg.max_energy_drift);
    monitors.observe(&y, t, energy)?;

    for &target in times {
        if target == R::zero() {
            out_times.push(target);
            out_states.push(y);
            continue;
        }
        let span = target - t;
        let n = (span / dt).ceil().as_f64().max(1.0) as u64;
        let h = span / R::of(n as f64);
        for _ in 0..n {
            y = midpoint_step(field, &y, h).ok_or(DynamicsError::StepFailure { t: t.as_f64() })?;
            t = t + h;
            monitors.observe(&y, t, energy)?;
        }
        t = target;
        out_times.push(target);
        out_states.push(y);
    }
    Ok(Trajectory {
        times: out_times,
        states: out_states,
        energy_drift: monitors.energy_drift,
        max_radius: monitors.max_radius,
        p_theta_drift: monitors.p_theta_drift,
    })
}

fn midpoint_step<R: Real>(
    field: &impl Fn(&CartesianState<R>) -> CartesianState<R>,
    y: &CartesianState<R>,
    h: R,
) -> Option<CartesianState<R>> {
    let half = h * R::of(0.5);
    let mut m = *y + field(y) * half;
    for _ in 0..100 {
        let m_new = *y + field(&m) * half;
        let d = m_new - m;
        let delta = d
            .as_array()
            .iter()
            .fold(R::zero(), |acc, x| acc.max(x.abs()));
        let scale = m
            .as_array()
            .iter()
            .fold(R::one(), |acc, x| acc.max(x.abs()));
        m = m_new;
        if delta <= R::of(1e-14) * scale {
            return Some(m * R::of(2.0) - *y);
        }
    }
    None
}

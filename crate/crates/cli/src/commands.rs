//! Subcommand implementations. Machine-readable JSON goes to stdout (byte
//! deterministic for identical config + seed); human-oriented summaries go to
//! stderr; exit codes: 0 pass, 2 usage, 3 domain failure, 4 internal.

use std::fs;
use std::path::Path;

use serde::Serialize;

use boostlab::certificates::{
    thresholds, verify_energy_gap, verify_no_max_annulus, verify_no_return_full,
    verify_no_return_truncated,
};
use boostlab::chord::check_confinement;
use boostlab::dynamics::flow;
use boostlab::hamiltonian::verify_hset_membership;
use boostlab::potential::{verify_decay_conditions, DecayGrid, Potential};
use boostlab::{
    CartesianState, CertificateReport, Chord, GridSpec, HamiltonianModel, IntegratorConfig,
    SampleSpec, ShootingProblem, SolverConfig, Trajectory,
};

use crate::config::{parse_model, RunConfig};
use crate::{Check, CliError, OutFormat};

pub fn run_thresholds(
    a: f64,
    r1: f64,
    c: Option<f64>,
    out: Option<&Path>,
) -> Result<i32, CliError> {
    if a <= 0.0 || r1 <= 0.0 {
        return Err(CliError::Usage("--a and --R1 must be positive".into()));
    }
    let ts = thresholds(a, r1, c);
    eprintln!("thresholds for a = {a}, R1 = {r1}:");
    eprintln!("  cond_c            = {}", ts.cond_c);
    eprintln!("  rot_threshold     = {}", ts.rot_threshold);
    if let (Some(e), Some(c)) = (ts.e_rot, ts.c) {
        eprintln!(
            "  at c = {c}: e = {e}, R2_rot = {:?}, R2_no_max = {:?}",
            ts.r2_rot, ts.r2_no_max
        );
    }
    emit(&ts, out)?;
    Ok(0)
}

pub fn run_verify(which: Check, cfg: &RunConfig) -> Result<i32, CliError> {
    let model_desc = cfg
        .model
        .as_deref()
        .ok_or_else(|| CliError::Usage("--model is required for verify".into()))?;
    let potential = parse_model(model_desc, cfg.q0, cfg.q1)?
        .ok_or_else(|| CliError::Domain("verify needs a model with a potential".into()))?;
    let a = potential.decay_coefficient();
    let r1 = potential.decay_radius();
    let spec = SampleSpec::new(cfg.seed.unwrap_or(0), cfg.samples.unwrap_or(100_000));
    let grid_n = cfg.grid.unwrap_or(64);
    let full = HamiltonianModel::full(potential.clone());
    let need_c = || {
        cfg.c
            .ok_or_else(|| CliError::Usage(format!("--c is required for the `{which:?}` check")))
    };
    // default truncation radius: the rotational-branch choice R1 + 2a/e(c)
    let default_r2 = |c: f64| {
        let ts = thresholds(a, r1, Some(c));
        cfg.r2.or(ts.r2_rot).unwrap_or(2.0 * r1)
    };

    let checks: &[Check] = match which {
        Check::All => &[
            Check::Decay,
            Check::Hset,
            Check::Gap,
            Check::NoReturn,
            Check::NoReturnTruncated,
            Check::NoMax,
        ],
        ref single => std::slice::from_ref(single),
    };

    let mut reports: Vec<CertificateReport> = Vec::new();
    for check in checks {
        match check {
            Check::All => unreachable!("expanded above"),
            Check::Decay => {
                let r_max = cfg.r_max.unwrap_or(100.0 * r1);
                let grid = DecayGrid {
                    n_r: grid_n * 8,
                    n_theta: grid_n * 2,
                };
                reports.push(verify_decay_conditions(&potential, r_max, &grid));
            }
            Check::Hset => {
                let c = need_c()?;
                let r2 = default_r2(c);
                let grid = GridSpec::with_resolution(grid_n);
                reports.extend(
                    verify_hset_membership(&potential, c, r2, &grid).map_err(CliError::domain)?,
                );
            }
            Check::Gap => {
                let c = need_c()?;
                let r_hi = 0.9 * c * c / (2.0 * a);
                reports
                    .push(verify_energy_gap(&full, c, r1, r_hi, &spec).map_err(CliError::domain)?);
            }
            Check::NoReturn => {
                let c = need_c()?;
                reports.push(verify_no_return_full(&full, c, &spec).map_err(CliError::domain)?);
            }
            Check::NoReturnTruncated => {
                let c = need_c()?;
                let e = cfg
                    .e
                    .or_else(|| thresholds(a, r1, Some(c)).e_rot.filter(|e| *e > 0.0));
                let e = e.ok_or_else(|| {
                    CliError::Domain(format!(
                        "no positive gap constant e at c = {c}; pass --e explicitly"
                    ))
                })?;
                reports.push(
                    verify_no_return_truncated(&potential, c, e, &spec)
                        .map_err(CliError::domain)?,
                );
            }
            Check::NoMax => {
                let c = need_c()?;
                reports
                    .push(verify_no_max_annulus(&potential, c, &spec).map_err(CliError::domain)?);
            }
        }
    }

    let all_pass = reports.iter().all(|r| r.pass);
    for r in &reports {
        eprintln!(
            "{}: {} (margin {:.3e}, {} samples)",
            r.name,
            if r.pass { "pass" } else { "FAIL" },
            r.min_margin,
            r.samples
        );
    }
    emit(&reports, cfg.out.as_deref())?;
    Ok(if all_pass { 0 } else { 3 })
}

#[derive(Serialize)]
struct ChordSummary {
    psi: f64,
    eta: f64,
    action: f64,
    residual: f64,
    max_radius: f64,
    energy_deviation: f64,
    confined: Option<bool>,
}

#[derive(Serialize)]
struct ChordRun {
    model: String,
    c: f64,
    q0: [f64; 2],
    q1: [f64; 2],
    #[serde(rename = "R1")]
    r1: Option<f64>,
    chords: Vec<ChordSummary>,
}

pub fn run_find_chord(cfg: &RunConfig) -> Result<i32, CliError> {
    let model_desc = cfg
        .model
        .as_deref()
        .ok_or_else(|| CliError::Usage("--model is required for find-chord".into()))?;
    let q0 = cfg
        .q0
        .ok_or_else(|| CliError::Usage("--q0 is required".into()))?;
    let q1 = cfg
        .q1
        .ok_or_else(|| CliError::Usage("--q1 is required".into()))?;
    let c = cfg
        .c
        .ok_or_else(|| CliError::Usage("--c is required".into()))?;
    let potential = parse_model(model_desc, Some(q0), Some(q1))?;
    let r1 = potential.as_ref().map(|p| p.decay_radius());
    let model = match potential {
        Some(p) => HamiltonianModel::full(p),
        None => HamiltonianModel::free(),
    };

    let defaults = SolverConfig::default();
    let solver = SolverConfig {
        psi_grid: cfg.psi_grid.unwrap_or(defaults.psi_grid),
        t_grid: cfg.t_grid.unwrap_or(defaults.t_grid),
        min_eta: cfg.min_eta.unwrap_or(defaults.min_eta),
        max_eta: cfg.max_eta.unwrap_or(defaults.max_eta),
        ..defaults
    };
    let problem =
        ShootingProblem::new(model.clone(), q0, q1, c, solver).map_err(CliError::domain)?;
    let chords = problem.find_chords().map_err(CliError::domain)?;

    let summaries: Vec<ChordSummary> = chords
        .iter()
        .map(|ch| ChordSummary {
            psi: ch.psi,
            eta: ch.eta,
            action: ch.action,
            residual: ch.residual,
            max_radius: ch.max_radius,
            energy_deviation: ch.energy_deviation,
            confined: r1.map(|r| check_confinement(ch, r)),
        })
        .collect();

    eprintln!("#   psi        eta        action     residual   max_r      confined");
    for (i, s) in summaries.iter().enumerate() {
        eprintln!(
            "{:<3} {:<10.6} {:<10.6} {:<10.6} {:<10.3e} {:<10.6} {}",
            i,
            s.psi,
            s.eta,
            s.action,
            s.residual,
            s.max_radius,
            s.confined.map_or("-".to_string(), |b| b.to_string()),
        );
    }

    if let Some(dir) = cfg.out.as_deref() {
        fs::create_dir_all(dir).map_err(CliError::internal)?;
        for (i, chord) in chords.iter().enumerate() {
            let json_path = dir.join(format!("chord_{i:03}.json"));
            let json = serde_json::to_string_pretty(chord).map_err(CliError::internal)?;
            fs::write(&json_path, json).map_err(CliError::internal)?;
            let csv_path = dir.join(format!("chord_{i:03}.csv"));
            fs::write(&csv_path, chord_csv(chord, &model)).map_err(CliError::internal)?;
        }
    }

    let run = ChordRun {
        model: model_desc.to_string(),
        c,
        q0,
        q1,
        r1,
        chords: summaries,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&run).map_err(CliError::internal)?
    );
    if chords.is_empty() {
        eprintln!("no chords found");
        return Ok(3);
    }
    Ok(0)
}

#[derive(Serialize)]
struct TrajectoryRow {
    t: f64,
    q1: f64,
    q2: f64,
    p1: f64,
    p2: f64,
    #[serde(rename = "H")]
    h: f64,
    p_theta: f64,
}

#[derive(Serialize)]
struct TrajectoryExport {
    model: String,
    config: IntegratorConfig,
    energy_drift: f64,
    max_radius: f64,
    p_theta_drift: f64,
    rows: Vec<TrajectoryRow>,
}

pub fn run_propagate(cfg: &RunConfig, format: OutFormat) -> Result<i32, CliError> {
    let state = cfg
        .state
        .ok_or_else(|| CliError::Usage("--state is required".into()))?;
    let t = cfg
        .t
        .ok_or_else(|| CliError::Usage("--t is required".into()))?;
    let descriptor = cfg.model.as_deref().unwrap_or("free");
    let potential = parse_model(descriptor, cfg.q0, cfg.q1)?;
    let model = match (potential, cfg.r2) {
        (Some(p), Some(r2)) => {
            let c = cfg
                .c
                .ok_or_else(|| CliError::Usage("--c is required to truncate at --R2".into()))?;
            HamiltonianModel::truncated(p, c, r2).map_err(CliError::domain)?
        }
        (Some(p), None) => HamiltonianModel::full(p),
        (None, _) => HamiltonianModel::free(),
    };
    let s0 = CartesianState::new(state[0], state[1], state[2], state[3]);
    let int_cfg = IntegratorConfig {
        output_points: cfg.output_points.unwrap_or(201),
        ..IntegratorConfig::default()
    };
    let traj = flow(&model, &s0, t, &int_cfg).map_err(CliError::domain)?;
    let rendered = match format {
        OutFormat::Csv => trajectory_csv(&traj, &model),
        OutFormat::Json => {
            let rows = traj
                .times
                .iter()
                .zip(&traj.states)
                .map(|(t, s)| TrajectoryRow {
                    t: *t,
                    q1: s.q1,
                    q2: s.q2,
                    p1: s.p1,
                    p2: s.p2,
                    h: model.eval_cartesian(s),
                    p_theta: s.p_theta(),
                })
                .collect();
            let export = TrajectoryExport {
                model: descriptor.to_string(),
                config: int_cfg,
                energy_drift: traj.energy_drift,
                max_radius: traj.max_radius,
                p_theta_drift: traj.p_theta_drift,
                rows,
            };
            let mut json = serde_json::to_string_pretty(&export).map_err(CliError::internal)?;
            json.push('\n');
            json
        }
    };
    match cfg.out.as_deref() {
        Some(path) => fs::write(path, rendered).map_err(CliError::internal)?,
        None => print!("{rendered}"),
    }
    eprintln!(
        "propagated T = {t}: energy drift {:.3e}, max radius {:.6}",
        traj.energy_drift, traj.max_radius
    );
    Ok(0)
}

fn trajectory_csv(traj: &Trajectory, model: &HamiltonianModel) -> String {
    let mut out = String::from("t,q1,q2,p1,p2,H,p_theta\n");
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let h = model.eval_cartesian(s);
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t,
            s.q1,
            s.q2,
            s.p1,
            s.p2,
            h,
            s.p_theta()
        ));
    }
    out
}

fn chord_csv(chord: &Chord, model: &HamiltonianModel) -> String {
    let mut out = String::from("t,q1,q2,p1,p2,H,p_theta\n");
    for sample in &chord.samples {
        let s = sample.state();
        let h = model.eval_cartesian(&s);
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            sample.t * chord.eta,
            s.q1,
            s.q2,
            s.p1,
            s.p2,
            h,
            s.p_theta()
        ));
    }
    out
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value).map_err(CliError::internal)?;
    if let Some(path) = out {
        fs::write(path, &json).map_err(CliError::internal)?;
    }
    println!("{json}");
    Ok(())
}

//! Run configuration: every knob is optional in the JSON config file and on
//! the command line; flags override the file; defaults fill the rest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use boostlab::potential::cr3bp_constants;
use boostlab::PotentialModel;

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<String>,
    pub c: Option<f64>,
    pub q0: Option<[f64; 2]>,
    pub q1: Option<[f64; 2]>,
    pub state: Option<[f64; 4]>,
    pub t: Option<f64>,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub grid: Option<usize>,
    pub r_max: Option<f64>,
    #[serde(rename = "R2")]
    pub r2: Option<f64>,
    pub e: Option<f64>,
    pub psi_grid: Option<usize>,
    pub t_grid: Option<usize>,
    pub min_eta: Option<f64>,
    pub max_eta: Option<f64>,
    pub output_points: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    /// Field-wise merge: values set on the command line win.
    pub fn merged_under(self, flags: RunConfig) -> RunConfig {
        RunConfig {
            model: flags.model.or(self.model),
            c: flags.c.or(self.c),
            q0: flags.q0.or(self.q0),
            q1: flags.q1.or(self.q1),
            state: flags.state.or(self.state),
            t: flags.t.or(self.t),
            seed: flags.seed.or(self.seed),
            samples: flags.samples.or(self.samples),
            grid: flags.grid.or(self.grid),
            r_max: flags.r_max.or(self.r_max),
            r2: flags.r2.or(self.r2),
            e: flags.e.or(self.e),
            psi_grid: flags.psi_grid.or(self.psi_grid),
            t_grid: flags.t_grid.or(self.t_grid),
            min_eta: flags.min_eta.or(self.min_eta),
            max_eta: flags.max_eta.or(self.max_eta),
            output_points: flags.output_points.or(self.output_points),
            out: flags.out.or(self.out),
        }
    }
}

/// Parses `x,y` into a position.
pub fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected x,y (got `{s}`)"));
    }
    Ok([parse_num(parts[0])?, parse_num(parts[1])?])
}

/// Parses `q1,q2,p1,p2` into a phase-space state.
pub fn parse_state(s: &str) -> Result<[f64; 4], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err(format!("expected q1,q2,p1,p2 (got `{s}`)"));
    }
    Ok([
        parse_num(parts[0])?,
        parse_num(parts[1])?,
        parse_num(parts[2])?,
        parse_num(parts[3])?,
    ])
}

fn parse_num(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| format!("`{s}` is not a number"))
}

/// The model mini-syntax: `free`, `powerlaw:a=2,R1=1`, `cr3bp:mu=0.5[,R1=1.2]`.
///
/// `None` means the free magnetic Hamiltonian. For `cr3bp` without an
/// explicit `R1`, the radius comes from the endpoints when they are known
/// (`max{2(1-mu), |q0|, |q1|}`) and from `max{2(1-mu), 1}` otherwise.
pub fn parse_model(
    descriptor: &str,
    q0: Option<[f64; 2]>,
    q1: Option<[f64; 2]>,
) -> Result<Option<PotentialModel>, CliError> {
    let (kind, params) = match descriptor.split_once(':') {
        Some((k, p)) => (k, p),
        None => (descriptor, ""),
    };
    let mut a = None;
    let mut r1 = None;
    let mut mu = None;
    for item in params.split(',').filter(|s| !s.is_empty()) {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("bad model parameter `{item}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad model parameter `{item}`")))?;
        match key.trim() {
            "a" => a = Some(value),
            "R1" | "r1" => r1 = Some(value),
            "mu" => mu = Some(value),
            other => return Err(CliError::Usage(format!("unknown model key `{other}`"))),
        }
    }
    match kind {
        "free" | "h0" => Ok(None),
        "powerlaw" => {
            let a =
                a.ok_or_else(|| CliError::Usage("powerlaw needs a=<decay coefficient>".into()))?;
            let r1 =
                r1.ok_or_else(|| CliError::Usage("powerlaw needs R1=<decay radius>".into()))?;
            if a <= 0.0 || r1 <= 0.0 {
                return Err(CliError::Usage(
                    "powerlaw constants must be positive".into(),
                ));
            }
            Ok(Some(PotentialModel::power_law(a, r1)))
        }
        "cr3bp" => {
            let mu = mu.ok_or_else(|| CliError::Usage("cr3bp needs mu=<mass ratio>".into()))?;
            let r1 = match (r1, q0, q1) {
                (Some(r1), _, _) => Some(r1),
                (None, Some(q0), Some(q1)) => {
                    Some(cr3bp_constants(mu, q0, q1).map_err(CliError::domain)?.r1)
                }
                _ => None,
            };
            PotentialModel::cr3bp(mu, r1)
                .map(Some)
                .map_err(CliError::domain)
        }
        other => Err(CliError::Usage(format!("unknown model kind `{other}`"))),
    }
}

//! Run configuration: one flat JSON object, overridden field by field by
//! command-line flags.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ising_pca::{Boundary, KernelKind, ModelParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// `--kind` values. The boundary condition picks the concrete kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    #[serde(alias = "reversible")]
    Rev,
    #[serde(alias = "irreversible")]
    Irrev,
}

impl FromStr for KindArg {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rev" | "reversible" => Ok(KindArg::Rev),
            "irrev" | "irreversible" => Ok(KindArg::Irrev),
            other => Err(CliError::Config(format!("unknown kind `{other}` (expected rev or irrev)"))),
        }
    }
}

impl fmt::Display for KindArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KindArg::Rev => "rev",
            KindArg::Irrev => "irrev",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

/// A parameter grid: an explicit list or `points` values from `from` to `to`.
///
/// The text form is either `a,b,c` or `from:to:points[:lin|:log]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range {
        from: f64,
        to: f64,
        points: usize,
        #[serde(default = "default_scale")]
        scale: Scale,
    },
}

fn default_scale() -> Scale {
    Scale::Linear
}

/// Hard cap on grid sizes; scans beyond this are almost certainly typos.
pub const MAX_GRID_POINTS: usize = 10_000;

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        let v = match self {
            Grid::List(v) => v.clone(),
            Grid::Range { from, to, points, scale } => {
                if *points == 0 || *points > MAX_GRID_POINTS {
                    return Err(CliError::Config(format!(
                        "grid needs between 1 and {MAX_GRID_POINTS} points, got {points}"
                    )));
                }
                if *points == 1 {
                    vec![*from]
                } else {
                    let t = |k: usize| k as f64 / (*points - 1) as f64;
                    match scale {
                        Scale::Linear => (0..*points).map(|k| from + (to - from) * t(k)).collect(),
                        Scale::Log => {
                            if *from <= 0.0 || *to <= 0.0 {
                                return Err(CliError::Config("log grids need positive endpoints".into()));
                            }
                            let (a, b) = (from.ln(), to.ln());
                            (0..*points).map(|k| (a + (b - a) * t(k)).exp()).collect()
                        }
                    }
                }
            }
        };
        if v.is_empty() {
            return Err(CliError::Config("grid is empty".into()));
        }
        if v.len() > MAX_GRID_POINTS {
            return Err(CliError::Config(format!("grid exceeds {MAX_GRID_POINTS} points")));
        }
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(CliError::Config(format!("grid value {bad} is not finite")));
        }
        Ok(v)
    }
}

impl FromStr for Grid {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad number `{}` in grid", t.trim())))
        };
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            if !(3..=4).contains(&parts.len()) {
                return Err(CliError::Config(format!("range grid `{s}` must be from:to:points[:lin|log]")));
            }
            let points = parts[2]
                .trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("bad point count `{}`", parts[2].trim())))?;
            let scale = match parts.get(3).map(|t| t.trim()) {
                None | Some("lin") | Some("linear") => Scale::Linear,
                Some("log") => Scale::Log,
                Some(other) => return Err(CliError::Config(format!("unknown grid scale `{other}`"))),
            };
            Ok(Grid::Range { from: num(parts[0])?, to: num(parts[1])?, points, scale })
        } else {
            let v = s
                .split(',')
                .filter(|t| !t.trim().is_empty())
                .map(num)
                .collect::<Result<Vec<_>, _>>()?;
            if v.is_empty() {
                return Err(CliError::Config("grid is empty".into()));
            }
            Ok(Grid::List(v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    Pca,
    Glauber,
}

impl FromStr for Sampler {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pca" => Ok(Sampler::Pca),
            "glauber" => Ok(Sampler::Glauber),
            other => Err(CliError::Config(format!("unknown sampler `{other}`"))),
        }
    }
}

/// Every field is optional; subcommands fill in their own defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub side: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bc: Option<Boundary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<KindArg>,
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// `L` values for tv-scan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sides: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Grid>,
    #[serde(rename = "Js", default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Grid>,
    /// Worker counts compared by bench.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worker_counts: Option<Vec<usize>>,
    /// Spin grid for contour-dump, rows separated by `/` or newlines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spins: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<Sampler>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fields set in `over` replace those in `self`. Giving either of
    /// `delta`/`q` in `over` discards both from `self`.
    pub fn merged(mut self, over: RunConfig) -> RunConfig {
        if over.delta.is_some() || over.q.is_some() {
            self.delta = None;
            self.q = None;
        }
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(side, bc, kind, coupling, delta, q, seed, sweeps, burn_in, workers, out, sides, deltas,
              couplings, worker_counts, spins, sampler);
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.delta.is_some() && self.q.is_some() {
            return Err(CliError::Config("give exactly one of delta and q".into()));
        }
        if let Some(g) = &self.deltas {
            g.values()?;
        }
        if let Some(g) = &self.couplings {
            g.values()?;
        }
        if matches!(&self.sides, Some(v) if v.is_empty()) {
            return Err(CliError::Config("sides list is empty".into()));
        }
        if matches!(&self.worker_counts, Some(v) if v.is_empty() || v.contains(&0)) {
            return Err(CliError::Config("worker_counts must be nonempty and positive".into()));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be positive".into()));
        }
        if let (Some(KindArg::Irrev), Some(Boundary::Plus)) = (self.kind, self.bc) {
            return Err(CliError::Config("the irreversible kernel needs periodic boundary conditions".into()));
        }
        Ok(())
    }

    pub fn coupling_or(&self, default: f64) -> f64 {
        self.coupling.unwrap_or(default)
    }

    /// Model parameters from `J` and whichever of `delta`/`q` is present.
    pub fn params(&self, default_coupling: f64, default_delta: f64) -> Result<ModelParams, CliError> {
        let j = self.coupling_or(default_coupling);
        let p = match (self.delta, self.q) {
            (Some(_), Some(_)) => return Err(CliError::Config("give exactly one of delta and q".into())),
            (None, Some(q)) => ModelParams::from_q(j, q),
            (d, None) => ModelParams::new(j, d.unwrap_or(default_delta)),
        };
        p.map_err(|e| CliError::Config(e.to_string()))
    }

    /// Kernel from `kind` and `bc`; missing pieces default to reversible and
    /// to the boundary the kind needs.
    pub fn kernel(&self) -> Result<KernelKind, CliError> {
        match (self.kind.unwrap_or(KindArg::Rev), self.bc) {
            (KindArg::Rev, Some(Boundary::Periodic)) => Ok(KernelKind::ReversiblePeriodic),
            (KindArg::Rev, _) => Ok(KernelKind::ReversiblePlus),
            (KindArg::Irrev, Some(Boundary::Plus)) => {
                Err(CliError::Config("the irreversible kernel needs periodic boundary conditions".into()))
            }
            (KindArg::Irrev, _) => Ok(KernelKind::IrreversiblePeriodic),
        }
    }

    /// Kernels selected by `kind`/`bc`, all three when neither is given.
    pub fn kernels(&self) -> Result<Vec<KernelKind>, CliError> {
        self.validate()?;
        Ok(KernelKind::ALL
            .into_iter()
            .filter(|k| self.bc.is_none_or(|b| k.boundary() == b))
            .filter(|k| match self.kind {
                None => true,
                Some(KindArg::Rev) => k.is_reversible(),
                Some(KindArg::Irrev) => !k.is_reversible(),
            })
            .collect())
    }
}

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ising_pca::contours::{
    contour_partition, decompose, dump_contour, energy_contour_identity, extract_contour, kp_check,
    site_association_holds, ClassCounts, Connectivity,
};
use ising_pca::dynamics::{detailed_balance_residual, dynamical_balance_closed_form, dynamical_balance_residual_with, MAX_KERNEL_SITES};
use ising_pca::hamiltonian::energy_pair;
use ising_pca::measures::{factorization_residual, format_float, stationarity_residual, ScanRow, SCAN_HEADER};
use ising_pca::mc::{bench_sweep, run_glauber, run_pca, RunOptions};
use ising_pca::{Boundary, Geometry, KernelKind, ModelParams, SpinConfig};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Grid, KindArg, RunConfig, Sampler};
use crate::{CliError, EXIT_CHECK_FAILED, EXIT_OK, OUT_DIR_ENV};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Verify,
    TvScan,
    KpScan,
    ContourDump,
    Sample,
    Bench,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Verify => "verify",
            Subcommand::TvScan => "tv-scan",
            Subcommand::KpScan => "kp-scan",
            Subcommand::ContourDump => "contour-dump",
            Subcommand::Sample => "sample",
            Subcommand::Bench => "bench",
        }
    }

    fn default_file(self) -> String {
        match self {
            Subcommand::TvScan | Subcommand::KpScan | Subcommand::Sample => format!("{}.csv", self.name()),
            _ => format!("{}.json", self.name()),
        }
    }
}

/// Runs a subcommand, writes its outputs and returns the exit code.
pub fn execute(sub: Subcommand, cfg: &RunConfig) -> Result<u8, CliError> {
    execute_with(sub, cfg, &VerifyHooks::default())
}

pub fn execute_with(sub: Subcommand, cfg: &RunConfig, hooks: &VerifyHooks) -> Result<u8, CliError> {
    cfg.validate()?;
    let out = resolve_out(cfg.out.as_deref(), sub);
    match sub {
        Subcommand::Verify => {
            let report = verify(cfg, hooks)?;
            emit(out.as_deref(), &to_json(&report))?;
            Ok(if report.pass { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Subcommand::TvScan => {
            let (csv, echo) = tv_scan(cfg)?;
            emit_csv(out.as_deref(), &csv, &json!({ "subcommand": sub.name(), "config": echo }))?;
            Ok(EXIT_OK)
        }
        Subcommand::KpScan => {
            let (csv, echo) = kp_scan(cfg)?;
            emit_csv(out.as_deref(), &csv, &json!({ "subcommand": sub.name(), "config": echo }))?;
            Ok(EXIT_OK)
        }
        Subcommand::ContourDump => {
            emit(out.as_deref(), &to_json(&contour_dump(cfg)?))?;
            Ok(EXIT_OK)
        }
        Subcommand::Sample => {
            let t0 = Instant::now();
            let (csv, mut sidecar) = sample(cfg)?;
            sidecar["wall_seconds"] = json!(t0.elapsed().as_secs_f64());
            emit_csv(out.as_deref(), &csv, &sidecar)?;
            Ok(EXIT_OK)
        }
        Subcommand::Bench => {
            let (report, identical) = bench(cfg)?;
            emit(out.as_deref(), &to_json(&report))?;
            Ok(if identical { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialise");
    s.push('\n');
    s
}

/// `--out` joined onto the output directory override when relative; the
/// subcommand's default file name when only the override is set.
fn resolve_out(out: Option<&Path>, sub: Subcommand) -> Option<PathBuf> {
    let dir = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()).map(PathBuf::from);
    match (out, dir) {
        (Some(p), Some(d)) if p.is_relative() => Some(d.join(p)),
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(d)) => Some(d.join(sub.default_file())),
        (None, None) => None,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, contents),
        None => std::io::stdout()
            .lock()
            .write_all(contents.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

/// Sidecar path next to a CSV output: `scan.csv` -> `scan.meta.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

/// CSV to the output, JSON sidecar next to it. On stdout only the CSV is written.
fn emit_csv(out: Option<&Path>, csv: &str, sidecar: &Value) -> Result<(), CliError> {
    emit(out, csv)?;
    if let Some(p) = out {
        write_file(&sidecar_path(p), &to_json(sidecar))?;
    }
    Ok(())
}

// ---------- verify ----------

pub type PairEnergyFn = fn(&Geometry, &ModelParams, &SpinConfig, &SpinConfig) -> ising_pca::Result<f64>;

/// Replaceable pieces of the verification suite, for fault-injection tests.
#[derive(Clone, Copy)]
pub struct VerifyHooks {
    /// Irreversible pair energy used by the dynamical-balance check.
    pub irreversible_energy: PairEnergyFn,
}

impl Default for VerifyHooks {
    fn default() -> Self {
        VerifyHooks {
            irreversible_energy: |g, p, s, t| energy_pair(g, p, KernelKind::IrreversiblePeriodic, s, t),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub kind: KernelKind,
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub config: RunConfig,
    pub checks: Vec<Check>,
    pub skipped: Vec<String>,
    pub failed: Vec<String>,
    pub pass: bool,
}

pub const VERIFY_MAX_SIDE: usize = 4;

fn at_most(kind: KernelKind, name: &'static str, value: f64, tolerance: f64) -> Check {
    Check { kind, name, value, tolerance, pass: value <= tolerance, note: None }
}

/// The exact suite on every selected kernel whose boundary admits `L`.
pub fn verify(cfg: &RunConfig, hooks: &VerifyHooks) -> Result<VerifyReport, CliError> {
    let side = cfg.side.unwrap_or(3);
    if side > VERIFY_MAX_SIDE {
        return Err(CliError::Config(format!(
            "verify enumerates all configurations and needs L <= {VERIFY_MAX_SIDE}, got L = {side}"
        )));
    }
    let p = cfg.params(2.5, 1e-3)?;
    let echo = RunConfig {
        side: Some(side),
        coupling: Some(p.coupling()),
        delta: Some(p.delta()),
        q: None,
        ..cfg.clone()
    };
    let mut checks = Vec::new();
    let mut skipped = Vec::new();
    for kind in cfg.kernels()? {
        let g = match Geometry::new(side, kind.boundary()) {
            Ok(g) => g,
            Err(e) => {
                skipped.push(format!("{kind}: {e}"));
                continue;
            }
        };
        verify_kind(&g, &p, kind, hooks, &mut checks, &mut skipped)?;
    }
    if checks.is_empty() {
        return Err(CliError::Config(format!("no kernel can run at L = {side} with this selection")));
    }
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{}:{}", c.kind, c.name))
        .collect();
    Ok(VerifyReport { config: echo, pass: failed.is_empty(), checks, skipped, failed })
}

fn verify_kind(
    g: &Geometry,
    p: &ModelParams,
    kind: KernelKind,
    hooks: &VerifyHooks,
    checks: &mut Vec<Check>,
    skipped: &mut Vec<String>,
) -> Result<(), CliError> {
    let n = g.site_count();
    if n <= MAX_KERNEL_SITES {
        checks.push(at_most(kind, "factorization", factorization_residual(g, p, kind)?, 1e-12));
        let db = detailed_balance_residual(g, p, kind)?;
        if kind.is_reversible() {
            checks.push(at_most(kind, "detailed-balance", db.max_residual, 1e-12));
        } else {
            checks.push(Check {
                kind,
                name: "detailed-balance-violation",
                value: db.max_residual,
                tolerance: 0.0,
                pass: db.max_residual > 0.0,
                note: db.witness.map(|(a, b)| format!("witness pair ({a}, {b})")),
            });
        }
        checks.push(at_most(kind, "stationarity", stationarity_residual(g, p, kind)?, 1e-10));
    } else {
        skipped.push(format!(
            "{kind}: factorization, detailed balance and stationarity need at most {MAX_KERNEL_SITES} sites"
        ));
    }

    let configs: Vec<SpinConfig> = SpinConfig::enumerate(n).collect();
    if !kind.is_reversible() {
        let mut worst = 0.0f64;
        for s in &configs {
            let r = if n <= MAX_KERNEL_SITES {
                dynamical_balance_residual_with(g, s, |a, b| (hooks.irreversible_energy)(g, p, a, b))?
            } else {
                dynamical_balance_closed_form(g, p, s)
            };
            worst = worst.max(if r.is_nan() { f64::INFINITY } else { r });
        }
        checks.push(at_most(kind, "dynamical-balance", worst, 1e-12));
    }

    // contour identities
    let conn = Connectivity::for_kind(kind);
    let mut energy_worst = 0i64;
    let mut images: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut additive = true;
    for s in &configs {
        energy_worst = energy_worst.max(energy_contour_identity(g, s).abs());
        let gamma = extract_contour(g, s);
        let parts = decompose(g, &gamma, conn);
        let sum = parts.iter().fold(ClassCounts::default(), |acc, c| acc + c.class_counts(g, kind));
        additive &= sum == gamma.class_counts(g, kind) && site_association_holds(g, &gamma, &parts, kind);
        *images.entry(gamma.edges().to_vec()).or_insert(0) += 1;
    }
    checks.push(at_most(kind, "energy-contour", energy_worst as f64, 0.0));
    let expected = if g.boundary() == Boundary::Plus { 1 } else { 2 };
    let bad = images.values().filter(|&&c| c != expected).count();
    checks.push(Check {
        kind,
        name: "contour-multiplicity",
        value: bad as f64,
        tolerance: 0.0,
        pass: bad == 0,
        note: Some(format!("{} images, each hit {expected} time(s)", images.len())),
    });
    checks.push(Check {
        kind,
        name: "class-additivity",
        value: if additive { 0.0 } else { 1.0 },
        tolerance: 0.0,
        pass: additive,
        note: None,
    });
    for k in [1, 2] {
        let r = contour_partition(g, k, p, kind)?;
        checks.push(Check {
            note: Some(format!("k = {k}, {} contours", r.contours)),
            ..at_most(kind, "contour-gas", r.relative_residual, 1e-10)
        });
    }
    Ok(())
}

// ---------- scans ----------

fn grid_or(g: &Option<Grid>, default: &str) -> Result<Vec<f64>, CliError> {
    match g {
        Some(g) => g.values(),
        None => default.parse::<Grid>()?.values(),
    }
}

pub const DEFAULT_TV_DELTAS: &str = "1e-4:1e-2:11:log";

pub fn tv_scan(cfg: &RunConfig) -> Result<(String, RunConfig), CliError> {
    let kind = cfg.kernel()?;
    let j = cfg.coupling_or(2.5);
    let deltas = grid_or(&cfg.deltas, DEFAULT_TV_DELTAS)?;
    let sides: Vec<usize> = match (&cfg.sides, cfg.side) {
        (Some(v), _) => v.clone(),
        (None, Some(l)) => vec![l],
        (None, None) => [2, 3, 4].into_iter().filter(|&l| l >= kind.boundary().min_side()).collect(),
    };
    let mut csv = String::from(SCAN_HEADER);
    csv.push('\n');
    for &l in &sides {
        let g = Geometry::new(l, kind.boundary())?;
        for &d in &deltas {
            let p = ModelParams::new(j, d).map_err(|e| CliError::Config(e.to_string()))?;
            csv.push_str(&ScanRow::compute(&g, &p, kind)?.to_csv());
            csv.push('\n');
        }
    }
    let echo = RunConfig {
        sides: Some(sides),
        side: None,
        bc: Some(kind.boundary()),
        kind: Some(kind_arg(kind)),
        coupling: Some(j),
        deltas: Some(Grid::List(deltas)),
        delta: None,
        q: None,
        ..cfg.clone()
    };
    Ok((csv, echo))
}

fn kind_arg(kind: KernelKind) -> KindArg {
    if kind.is_reversible() {
        KindArg::Rev
    } else {
        KindArg::Irrev
    }
}

pub const KP_HEADER: &str =
    "kind,J,delta,activity_bound,threshold,satisfied,series_value,series_target,series_condition,radius_window,truncated_sum,tail_bound";

pub fn kp_scan(cfg: &RunConfig) -> Result<(String, RunConfig), CliError> {
    let kind = cfg.kernel()?;
    let couplings = match (&cfg.couplings, cfg.coupling) {
        (Some(g), _) => g.values()?,
        (None, Some(j)) => vec![j],
        (None, None) => "1:3:21".parse::<Grid>()?.values()?,
    };
    let deltas = match (&cfg.deltas, cfg.delta, cfg.q) {
        (Some(g), _, _) => g.values()?,
        (None, Some(d), _) => vec![d],
        (None, None, Some(q)) => vec![(-2.0 * q).exp()],
        (None, None, None) => vec![0.0, 1e-5, 1e-3],
    };
    let mut csv = String::from(KP_HEADER);
    csv.push('\n');
    for &d in &deltas {
        for &j in &couplings {
            let r = kp_check(j, d, kind);
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                kind,
                format_float(r.coupling),
                format_float(r.delta),
                format_float(r.activity_bound),
                format_float(r.threshold),
                r.satisfied,
                format_float(r.series_value),
                format_float(r.series_target),
                r.series_condition,
                r.radius_window,
                format_float(r.truncated_sum),
                format_float(r.tail_bound),
            ));
        }
    }
    let echo = RunConfig {
        bc: Some(kind.boundary()),
        kind: Some(kind_arg(kind)),
        couplings: Some(Grid::List(couplings)),
        deltas: Some(Grid::List(deltas)),
        coupling: None,
        delta: None,
        q: None,
        ..cfg.clone()
    };
    Ok((csv, echo))
}

// ---------- contour dump, sampling, benchmark ----------

pub fn contour_dump(cfg: &RunConfig) -> Result<Value, CliError> {
    let kind = cfg.kernel()?;
    let text = cfg
        .spins
        .as_deref()
        .ok_or_else(|| CliError::Config("contour-dump needs a spin grid (--spins or \"spins\")".into()))?;
    let (side, sigma) = SpinConfig::parse_grid(text)?;
    if let Some(l) = cfg.side.filter(|&l| l != side) {
        return Err(CliError::Config(format!("spin grid has side {side} but L = {l}")));
    }
    let g = Geometry::new(side, kind.boundary())?;
    let dump = dump_contour(&g, kind, &sigma)?;
    let echo = RunConfig { side: Some(side), bc: Some(kind.boundary()), kind: Some(kind_arg(kind)), ..cfg.clone() };
    Ok(json!({ "config": echo, "dump": dump }))
}

pub fn sample(cfg: &RunConfig) -> Result<(String, Value), CliError> {
    let side = cfg.side.unwrap_or(16);
    let sweeps = cfg.sweeps.unwrap_or(1000);
    let seed = cfg.seed.unwrap_or(1);
    let sampler = cfg.sampler.unwrap_or(Sampler::Pca);
    let mut opts = RunOptions::new(sweeps, seed);
    if let Some(b) = cfg.burn_in {
        opts = opts.burn_in(b);
    }
    if let Some(w) = cfg.workers {
        opts = opts.workers(w);
    }
    let (trace, echo) = match sampler {
        Sampler::Pca => {
            let kind = cfg.kernel()?;
            let p = cfg.params(0.4, 0.1)?;
            let g = Geometry::new(side, kind.boundary())?;
            let echo = RunConfig {
                side: Some(side),
                bc: Some(kind.boundary()),
                kind: Some(kind_arg(kind)),
                coupling: Some(p.coupling()),
                delta: Some(p.delta()),
                q: None,
                ..cfg.clone()
            };
            (run_pca(&g, &p, kind, &opts)?, echo)
        }
        Sampler::Glauber => {
            let bc = cfg.bc.unwrap_or(Boundary::Plus);
            let j = cfg.coupling_or(0.4);
            let g = Geometry::new(side, bc)?;
            let echo = RunConfig { side: Some(side), bc: Some(bc), coupling: Some(j), ..cfg.clone() };
            (run_glauber(&g, j, &opts)?, echo)
        }
    };
    let echo = RunConfig {
        sweeps: Some(sweeps),
        seed: Some(seed),
        sampler: Some(sampler),
        burn_in: Some(opts.burn_in_sweeps()),
        ..echo
    };
    let sidecar = json!({
        "subcommand": Subcommand::Sample.name(),
        "config": echo,
        "meta": trace.meta,
        "git_describe": env!("ISING_PCA_GIT_DESCRIBE"),
    });
    Ok((trace.to_csv(), sidecar))
}

pub fn bench(cfg: &RunConfig) -> Result<(Value, bool), CliError> {
    let side = cfg.side.unwrap_or(256);
    let sweeps = cfg.sweeps.unwrap_or(20);
    let seed = cfg.seed.unwrap_or(1);
    let kind = cfg.kernel()?;
    let p = cfg.params(0.4, 0.1)?;
    let mut workers = cfg.worker_counts.clone().unwrap_or_else(|| {
        let max = std::thread::available_parallelism().map_or(1, |n| n.get());
        vec![1, max]
    });
    workers.dedup();
    let g = Geometry::new(side, kind.boundary())?;
    let report = bench_sweep(&g, &p, kind, &workers, sweeps, seed)?;
    let echo = RunConfig {
        side: Some(side),
        sweeps: Some(sweeps),
        seed: Some(seed),
        bc: Some(kind.boundary()),
        kind: Some(kind_arg(kind)),
        coupling: Some(p.coupling()),
        delta: Some(p.delta()),
        q: None,
        worker_counts: Some(workers),
        ..cfg.clone()
    };
    let identical = report.identical;
    Ok((json!({ "config": echo, "report": report }), identical))
}

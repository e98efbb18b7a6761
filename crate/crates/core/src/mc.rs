//! Monte Carlo on large boxes: PCA trajectories, a heat-bath Glauber
//! baseline with random site order, batch-means error bars and a sweep
//! throughput benchmark.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{prob_plus, SweepEngine};
use crate::error::{Error, Result};
use crate::hamiltonian::{bond_sum, field_sum, KernelKind, ModelParams};
use crate::lattice::{Boundary, Geometry};
use crate::measures::format_float;
use crate::rng::{derive_seed, unit_f64};
use crate::spins::SpinConfig;

/// Batches used for every error bar.
pub const BATCH_COUNT: usize = 32;

const GLAUBER_TAG: u64 = 0x0067_6c61_7562_6572;
const START_TAG: u64 = 0x0073_7461_7274;

/// Run length and seeding.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Recorded sweeps, after burn-in.
    pub sweeps: u64,
    /// Discarded sweeps; `None` means 20% of `sweeps`.
    pub burn_in: Option<u64>,
    pub seed: u64,
    /// Worker threads for PCA sweeps; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Initial configuration; all plus when absent.
    pub start: Option<SpinConfig>,
}

impl RunOptions {
    pub fn new(sweeps: u64, seed: u64) -> Self {
        RunOptions {
            sweeps,
            burn_in: None,
            seed,
            workers: None,
            start: None,
        }
    }

    pub fn burn_in(mut self, sweeps: u64) -> Self {
        self.burn_in = Some(sweeps);
        self
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn start(mut self, start: SpinConfig) -> Self {
        self.start = Some(start);
        self
    }

    pub fn burn_in_sweeps(&self) -> u64 {
        self.burn_in.unwrap_or(self.sweeps / 5)
    }

    fn initial(&self, g: &Geometry) -> Result<SpinConfig> {
        if self.sweeps == 0 {
            return Err(Error::Domain("at least one sweep is required".into()));
        }
        match &self.start {
            Some(s) if s.len() != g.site_count() => Err(Error::DimensionMismatch {
                left: s.len(),
                right: g.site_count(),
            }),
            Some(s) => Ok(s.clone()),
            None => Ok(SpinConfig::all_plus(g.site_count())),
        }
    }
}

/// Configuration drawn uniformly from the seed, independent of the sweep streams.
pub fn random_config(n: usize, seed: u64) -> SpinConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, START_TAG));
    let spins = (0..n)
        .map(|_| if rng.next_u32() & 1 == 0 { 1 } else { -1 })
        .collect();
    SpinConfig::from_spins(spins).expect("values are ±1")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub sweep: u64,
    /// `Σ σ_i / |Λ|`.
    pub m: f64,
    /// `H(σ) / |Λ|`.
    pub e: f64,
    pub flips: u64,
    /// Sum of the flip probabilities of the update that produced this record.
    pub expected_flips: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BurnInSummary {
    pub sweeps: u64,
    pub mean_m: f64,
    pub mean_e: f64,
    pub mean_flips: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMeta {
    pub sampler: &'static str,
    pub side: usize,
    pub boundary: Boundary,
    pub kind: Option<KernelKind>,
    pub coupling: f64,
    pub delta: Option<f64>,
    pub seed: u64,
    pub sweeps: u64,
    pub burn_in: BurnInSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub meta: TraceMeta,
    pub records: Vec<TraceRecord>,
}

pub const TRACE_HEADER: &str = "sweep,m,e,flips";

/// Batch-means estimate of a stationary mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub batches: usize,
}

impl Estimate {
    /// `|a - b|` in units of the combined standard error.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        (self.mean - other.mean).abs() / self.stderr.hypot(other.stderr)
    }

    /// `|mean - value| / stderr`.
    pub fn z_to(&self, value: f64) -> f64 {
        (self.mean - value).abs() / self.stderr
    }
}

/// Mean over all values; standard error from the spread of `batches`
/// equal-length batch means (the trailing remainder only enters the mean).
pub fn batch_means(values: &[f64], batches: usize) -> Result<Estimate> {
    if batches < 2 || values.len() < batches {
        return Err(Error::Domain(format!(
            "{} values cannot form {batches} batches",
            values.len()
        )));
    }
    let len = values.len() / batches;
    let means: Vec<f64> = values
        .chunks_exact(len)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / len as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(Estimate {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        stderr: (var / batches as f64).sqrt(),
        batches,
    })
}

impl Trace {
    pub fn magnetizations(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.m).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.e).collect()
    }

    pub fn flips(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.flips as f64).collect()
    }

    pub fn expected_flips(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.expected_flips).collect()
    }

    pub fn estimate<F: Fn(&TraceRecord) -> f64>(&self, obs: F) -> Result<Estimate> {
        let v: Vec<f64> = self.records.iter().map(obs).collect();
        batch_means(&v, BATCH_COUNT)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.sweep,
                format_float(r.m),
                format_float(r.e),
                r.flips
            ));
        }
        out
    }
}

fn observe(g: &Geometry, coupling: f64, s: &SpinConfig) -> (f64, f64) {
    let n = g.site_count() as f64;
    let total: i64 = s.as_slice().iter().map(|&x| x as i64).sum();
    (total as f64 / n, -coupling * bond_sum(g, s) as f64 / n)
}

struct Recorder {
    burn_in: u64,
    burn: [f64; 3],
    records: Vec<TraceRecord>,
}

impl Recorder {
    fn new(burn_in: u64, sweeps: u64) -> Self {
        Recorder {
            burn_in,
            burn: [0.0; 3],
            records: Vec::with_capacity(sweeps as usize),
        }
    }

    fn push(&mut self, sweep: u64, m: f64, e: f64, flips: usize, expected: f64) {
        if sweep <= self.burn_in {
            self.burn[0] += m;
            self.burn[1] += e;
            self.burn[2] += flips as f64;
        } else {
            self.records.push(TraceRecord {
                sweep,
                m,
                e,
                flips: flips as u64,
                expected_flips: expected,
            });
        }
    }

    fn summary(&self) -> BurnInSummary {
        let n = self.burn_in.max(1) as f64;
        let scale = if self.burn_in == 0 { 0.0 } else { 1.0 / n };
        BurnInSummary {
            sweeps: self.burn_in,
            mean_m: self.burn[0] * scale,
            mean_e: self.burn[1] * scale,
            mean_flips: self.burn[2] * scale,
        }
    }
}

/// PCA trajectory from `opts.start`; sweep `t` uses random stream `t - 1`.
pub fn run_pca(g: &Geometry, p: &ModelParams, kind: KernelKind, opts: &RunOptions) -> Result<Trace> {
    let mut state = opts.initial(g)?;
    let mut scratch = state.clone();
    let mut engine = SweepEngine::new(g, p, kind, opts.seed)?;
    if let Some(w) = opts.workers {
        engine = engine.with_workers(w)?;
    }
    let burn_in = opts.burn_in_sweeps();
    let total = burn_in + opts.sweeps;
    let mut rec = Recorder::new(burn_in, opts.sweeps);
    for t in 1..=total {
        let stats = engine.step_in_place(&mut state, &mut scratch);
        let (m, e) = observe(g, p.coupling(), &state);
        rec.push(t, m, e, stats.flips, stats.expected_flips);
    }
    Ok(Trace {
        meta: TraceMeta {
            sampler: "pca",
            side: g.side(),
            boundary: g.boundary(),
            kind: Some(kind),
            coupling: p.coupling(),
            delta: Some(p.delta()),
            seed: opts.seed,
            sweeps: opts.sweeps,
            burn_in: rec.summary(),
        },
        records: rec.records,
    })
}

/// Heat-bath single-site dynamics for `π_G`, visiting the sites in a fresh
/// uniformly random order every sweep.
pub fn run_glauber(g: &Geometry, coupling: f64, opts: &RunOptions) -> Result<Trace> {
    if !(coupling.is_finite() && coupling >= 0.0) {
        return Err(Error::Domain(format!("coupling {coupling} must be finite and >= 0")));
    }
    let mut state = opts.initial(g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, GLAUBER_TAG));
    // P(σ_i = +1 | rest) = 1 / (1 + exp(-2 J S_i)), S_i ∈ -4..=4
    let table: Vec<f64> = (-4..=4).map(|s| prob_plus(coupling * s as f64)).collect();
    let kind = KernelKind::reversible_for(g.boundary());
    let neighbors = g.neighbor_table();
    let mut order: Vec<usize> = (0..g.site_count()).collect();
    let burn_in = opts.burn_in_sweeps();
    let total = burn_in + opts.sweeps;
    let mut rec = Recorder::new(burn_in, opts.sweeps);
    for t in 1..=total {
        order.shuffle(&mut rng);
        let mut flips = 0usize;
        let mut expected = 0.0;
        let spins = state.as_mut_slice();
        for &i in &order {
            let p_plus = table[(field_sum(neighbors, kind, spins, i) + 4) as usize];
            let old = spins[i];
            expected += if old > 0 { 1.0 - p_plus } else { p_plus };
            let new = if unit_f64(rng.next_u64()) < p_plus { 1 } else { -1 };
            flips += usize::from(new != old);
            spins[i] = new;
        }
        let (m, e) = observe(g, coupling, &state);
        rec.push(t, m, e, flips, expected);
    }
    Ok(Trace {
        meta: TraceMeta {
            sampler: "glauber",
            side: g.side(),
            boundary: g.boundary(),
            kind: None,
            coupling,
            delta: None,
            seed: opts.seed,
            sweeps: opts.sweeps,
            burn_in: rec.summary(),
        },
        records: rec.records,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchEntry {
    pub workers: usize,
    pub seconds: f64,
    pub site_updates_per_second: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub side: usize,
    pub kind: KernelKind,
    pub sweeps: u64,
    pub entries: Vec<BenchEntry>,
    /// Final configurations agree bit for bit across all worker counts.
    pub identical: bool,
}

/// Times `sweeps` PCA sweeps from a seeded random start for each worker count.
pub fn bench_sweep(
    g: &Geometry,
    p: &ModelParams,
    kind: KernelKind,
    workers: &[usize],
    sweeps: u64,
    seed: u64,
) -> Result<BenchReport> {
    if workers.is_empty() || sweeps == 0 {
        return Err(Error::Domain("benchmark needs worker counts and sweeps".into()));
    }
    let start = random_config(g.site_count(), seed);
    let mut entries = Vec::with_capacity(workers.len());
    let mut finals: Vec<SpinConfig> = Vec::with_capacity(workers.len());
    for &w in workers {
        let mut engine = SweepEngine::new(g, p, kind, seed)?.with_workers(w)?;
        let mut state = start.clone();
        let mut scratch = start.clone();
        let t0 = Instant::now();
        for _ in 0..sweeps {
            engine.step_in_place(&mut state, &mut scratch);
        }
        let seconds = t0.elapsed().as_secs_f64();
        entries.push(BenchEntry {
            workers: w,
            seconds,
            site_updates_per_second: (sweeps as f64 * g.site_count() as f64) / seconds.max(1e-12),
        });
        finals.push(state);
    }
    let identical = finals.windows(2).all(|w| w[0] == w[1]);
    Ok(BenchReport {
        side: g.side(),
        kind,
        sweeps,
        entries,
        identical,
    })
}

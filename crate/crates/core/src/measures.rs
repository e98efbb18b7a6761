//! Exact measures on small boxes: the Gibbs measure, the stationary measure
//! of each PCA kernel, total variation distance, and the functional
//! `Δ(δ) = π_G(f^2) / π_G(f)^2 - 1` that bounds their distance.
//!
//! Tables are built from log-weights with a single max shift. Quantities
//! that are small for small `δ` (`π_G(f) - 1`, `Δ`, the distance itself) are
//! accumulated from `f - 1 = expm1(ln f)` to avoid cancellation.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{check_kernel_size, KernelMatrix};
use crate::error::{Error, Result};
use crate::hamiltonian::{
    energy_pair, energy_single, f_factor, local_field, log_f_factor, pair_energy_shift,
    KernelKind, ModelParams,
};
use crate::lattice::Geometry;
use crate::spins::{SpinConfig, MAX_ENUMERATION_SITES};

/// Probability vector over canonically indexed configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTable {
    probs: Vec<f64>,
    log_weights: Vec<f64>,
    log_norm: f64,
}

impl MeasureTable {
    pub fn from_log_weights(log_weights: Vec<f64>) -> Result<Self> {
        let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Domain("measure has no finite weight".into()));
        }
        let shifted: Vec<f64> = log_weights.iter().map(|w| (w - max).exp()).collect();
        let total: f64 = shifted.iter().sum();
        let probs = shifted.iter().map(|w| w / total).collect();
        Ok(MeasureTable {
            probs,
            log_weights,
            log_norm: max + total.ln(),
        })
    }

    pub fn point_mass(states: usize, at: usize) -> Self {
        let mut log_weights = vec![f64::NEG_INFINITY; states];
        log_weights[at] = 0.0;
        MeasureTable::from_log_weights(log_weights).expect("one finite weight")
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `ln Σ exp(log_weight)`.
    pub fn log_partition(&self) -> f64 {
        self.log_norm
    }

    /// `Σ_σ π(σ) obs(σ)` with `obs` evaluated on the canonical index.
    pub fn expect<F: Fn(usize) -> f64>(&self, obs: F) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| p * obs(k)).sum()
    }
}

pub(crate) fn check_enumerable(g: &Geometry, what: &'static str) -> Result<()> {
    if g.site_count() > MAX_ENUMERATION_SITES {
        return Err(Error::TooLarge {
            what,
            sites: g.site_count(),
            limit: MAX_ENUMERATION_SITES,
        });
    }
    Ok(())
}

fn per_config<T, F>(g: &Geometry, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&SpinConfig) -> T + Sync,
{
    let n = g.site_count();
    (0..1u64 << n)
        .into_par_iter()
        .map(|k| f(&SpinConfig::from_index(k, n)))
        .collect()
}

/// `π_G(σ) ∝ exp(-H(σ))` for the geometry's boundary condition.
pub fn gibbs_measure(g: &Geometry, coupling: f64) -> Result<MeasureTable> {
    check_enumerable(g, "Gibbs measure")?;
    let p = ModelParams::new(coupling, 0.0)?;
    MeasureTable::from_log_weights(per_config(g, |s| -energy_single(g, &p, s)))
}

/// Stationary measure `π_PCA(σ) = Z_σ / Σ Z`, using the closed form of `Z_σ`.
pub fn pca_measure(g: &Geometry, p: &ModelParams, kind: KernelKind) -> Result<MeasureTable> {
    kind.check(g)?;
    check_enumerable(g, "PCA stationary measure")?;
    MeasureTable::from_log_weights(per_config(g, |s| {
        -energy_single(g, p, s) + log_f_factor(g, p, kind, s)
    }))
}

pub fn tv_distance(a: &MeasureTable, b: &MeasureTable) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(0.5
        * a.probs
            .iter()
            .zip(&b.probs)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>())
}

/// Max over `σ` of the relative gap between `Σ_τ exp(-H(σ,τ))`, summed
/// term by term, and the closed form `exp(c) w_G(σ) f(σ)`.
pub fn factorization_residual(g: &Geometry, p: &ModelParams, kind: KernelKind) -> Result<f64> {
    kind.check(g)?;
    check_kernel_size(g, "factorisation check")?;
    let shift = pair_energy_shift(g, p, kind);
    if !shift.is_finite() {
        return Err(Error::Domain(
            "the irreversible normaliser is infinite at delta = 0".into(),
        ));
    }
    let n = g.site_count();
    let taus: Vec<SpinConfig> = SpinConfig::enumerate(n).collect();
    let residuals: Vec<Result<f64>> = per_config(g, |sigma| {
        let mut brute = 0.0f64;
        for tau in &taus {
            brute += (-energy_pair(g, p, kind, sigma, tau)?).exp();
        }
        let closed = (shift - energy_single(g, p, sigma)).exp() * f_factor(g, p, kind, sigma)?;
        if !(brute.is_finite() && closed.is_finite()) || closed == 0.0 {
            return Err(Error::Overflow("factorisation check"));
        }
        Ok(((brute - closed) / closed).abs())
    });
    residuals
        .into_iter()
        .try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r)))
}

/// `max_τ |(π P)(τ) - π(τ)|` for the closed-form stationary measure.
pub fn stationarity_residual(g: &Geometry, p: &ModelParams, kind: KernelKind) -> Result<f64> {
    let kernel = KernelMatrix::build(g, p, kind)?;
    let pi = pca_measure(g, p, kind)?;
    let pushed = kernel.apply_left(pi.probabilities())?;
    Ok(pushed
        .iter()
        .zip(pi.probabilities())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Exact `π_G`-moments of `f` on one box.
#[derive(Debug, Clone)]
pub struct FMoments {
    gibbs: MeasureTable,
    // f(σ) - 1 for every configuration
    f_minus_one: Vec<f64>,
}

impl FMoments {
    pub fn new(g: &Geometry, p: &ModelParams, kind: KernelKind) -> Result<Self> {
        kind.check(g)?;
        let gibbs = gibbs_measure(g, p.coupling())?;
        let f_minus_one = per_config(g, |s| log_f_factor(g, p, kind, s).exp_m1());
        Ok(FMoments { gibbs, f_minus_one })
    }

    /// `π_G(f^k) - 1`.
    pub fn moment_minus_one(&self, k: u32) -> f64 {
        self.gibbs.expect(|s| {
            let fm1 = self.f_minus_one[s];
            match k {
                0 => 0.0,
                1 => fm1,
                // (1 + x)^2 - 1 = x (2 + x)
                2 => fm1 * (2.0 + fm1),
                _ => (k as f64 * fm1.ln_1p()).exp_m1(),
            }
        })
    }

    pub fn moment(&self, k: u32) -> f64 {
        1.0 + self.moment_minus_one(k)
    }

    /// `Δ = Var_G(f) / π_G(f)^2`.
    pub fn delta_functional(&self) -> f64 {
        let mean = self.moment_minus_one(1);
        let var = self.gibbs.expect(|s| {
            let d = self.f_minus_one[s] - mean;
            d * d
        });
        var / ((1.0 + mean) * (1.0 + mean))
    }

    /// `‖π_PCA - π_G‖_TV = ½ Σ π_G |f / π_G(f) - 1|`.
    pub fn tv_to_gibbs(&self) -> f64 {
        let mean = self.moment_minus_one(1);
        0.5 * self
            .gibbs
            .expect(|s| ((self.f_minus_one[s] - mean) / (1.0 + mean)).abs())
    }

    pub fn gibbs(&self) -> &MeasureTable {
        &self.gibbs
    }
}

/// `Δ(δ)` by exact enumeration.
pub fn delta_functional(g: &Geometry, p: &ModelParams, kind: KernelKind) -> Result<f64> {
    Ok(FMoments::new(g, p, kind)?.delta_functional())
}

/// `c1 = Σ_i π_G(phi_i)`, the first-order coefficient of `π_G(f)` in `δ`.
pub fn first_order_coefficient(g: &Geometry, coupling: f64, kind: KernelKind) -> Result<f64> {
    kind.check(g)?;
    let gibbs = gibbs_measure(g, coupling)?;
    let p = ModelParams::new(coupling, 0.0)?;
    let phi_sums = per_config(g, |s| {
        (0..g.site_count())
            .map(|i| (-2.0 * local_field(g, &p, kind, s, i) * s.get(i) as f64).exp())
            .sum::<f64>()
    });
    Ok(gibbs.expect(|s| phi_sums[s]))
}

/// Second-order check of `π_G(f^k) = 1 + k δ c1 + O(δ^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstOrderReport {
    pub c1: f64,
    pub delta: f64,
    pub residual: f64,
    pub residual_half: f64,
    /// `residual / residual_half`, close to 4 in the quadratic regime.
    pub halving_ratio: f64,
    /// `|C|` from `r(δ) ≈ |C| δ^2`, using both residuals.
    pub second_order_estimate: f64,
}

pub fn first_order_residual(g: &Geometry, p: &ModelParams, kind: KernelKind, k: u32, c1: f64) -> Result<f64> {
    let m = FMoments::new(g, p, kind)?;
    Ok((m.moment_minus_one(k) - k as f64 * p.delta() * c1).abs())
}

pub fn first_order_report(g: &Geometry, p: &ModelParams, kind: KernelKind, k: u32) -> Result<FirstOrderReport> {
    let c1 = first_order_coefficient(g, p.coupling(), kind)?;
    let delta = p.delta();
    let residual = first_order_residual(g, p, kind, k, c1)?;
    let half = p.with_delta(delta / 2.0)?;
    let residual_half = first_order_residual(g, &half, kind, k, c1)?;
    Ok(FirstOrderReport {
        c1,
        delta,
        residual,
        residual_half,
        halving_ratio: residual / residual_half,
        // r(δ) ≈ C δ^2 and r(δ/2) ≈ C δ^2 / 4 for the leading term
        second_order_estimate: (residual - residual_half) / (0.75 * delta * delta),
    })
}

/// One row of a distance scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub side: usize,
    pub boundary: String,
    pub kind: KernelKind,
    pub coupling: f64,
    pub delta: f64,
    pub tv: f64,
    pub sqrt_delta: f64,
    pub c1: f64,
    pub residual_first_order: f64,
    /// `tv / (δ L)`, i.e. the distance in units of `δ |Λ|^{1/2}`.
    pub ratio: f64,
}

pub const SCAN_HEADER: &str =
    "L,bc,kind,J,delta,tv,sqrt_delta,c1,residual_first_order,ratio";

/// Float formatting for every CSV we emit: 17 significant digits, `.` decimal.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

impl ScanRow {
    pub fn compute(g: &Geometry, p: &ModelParams, kind: KernelKind) -> Result<Self> {
        let moments = FMoments::new(g, p, kind)?;
        let c1 = first_order_coefficient(g, p.coupling(), kind)?;
        let tv = moments.tv_to_gibbs();
        let delta = p.delta();
        Ok(ScanRow {
            side: g.side(),
            boundary: g.boundary().to_string(),
            kind,
            coupling: p.coupling(),
            delta,
            tv,
            sqrt_delta: moments.delta_functional().sqrt(),
            c1,
            residual_first_order: (moments.moment_minus_one(1) - delta * c1).abs(),
            ratio: tv / (delta * g.side() as f64),
        })
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.side,
            self.boundary,
            self.kind,
            format_float(self.coupling),
            format_float(self.delta),
            format_float(self.tv),
            format_float(self.sqrt_delta),
            format_float(self.c1),
            format_float(self.residual_first_order),
            format_float(self.ratio)
        )
    }
}

//! PCA transition kernels.
//!
//! All three kernels factorise over sites: given the current configuration
//! `σ`, each new spin is drawn independently with
//! `P(τ_i = s | σ) = 1 / (1 + exp(-2 s x_i))`, `x_i = h_i(σ) + q σ_i`.
//! The same kernel is `exp(-H(σ,τ)) / Z_σ`, and `Z_σ` has the closed form
//! `exp(c) w_G(σ) f(σ)` with `c` from [`pair_energy_shift`].

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{
    energy_pair, energy_single, field_sum, local_field, log_f_factor, pair_energy_shift,
    reduced_energy_pair, KernelKind, ModelParams,
};
use crate::lattice::{Direction, Geometry};
use crate::rng::{site_stream, unit_f64};
use crate::spins::SpinConfig;

/// Kernels are materialised only up to this many sites (`2^9 x 2^9` entries).
pub const MAX_KERNEL_SITES: usize = 9;

/// `P(τ_i = +1)` for effective field `x`.
#[inline]
pub fn prob_plus(x: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * x).exp())
}

fn effective_field(g: &Geometry, p: &ModelParams, kind: KernelKind, sigma: &SpinConfig, i: usize) -> f64 {
    local_field(g, p, kind, sigma, i) + p.q() * sigma.get(i) as f64
}

/// `P^*(τ_i = s | σ)`.
pub fn local_update_prob(
    g: &Geometry,
    p: &ModelParams,
    kind: KernelKind,
    sigma: &SpinConfig,
    i: usize,
    s: i8,
) -> f64 {
    let x = effective_field(g, p, kind, sigma, i);
    prob_plus(s as f64 * x)
}

/// Same probability through `exp(x s) / (2 cosh x)`; only usable for
/// moderate `x`, kept as a cross-check of [`local_update_prob`].
pub fn local_update_prob_cosh(
    g: &Geometry,
    p: &ModelParams,
    kind: KernelKind,
    sigma: &SpinConfig,
    i: usize,
    s: i8,
) -> f64 {
    let x = effective_field(g, p, kind, sigma, i);
    (x * s as f64).exp() / (2.0 * x.cosh())
}

/// Product form `Π_i P(τ_i | σ)`.
pub fn transition_prob(
    g: &Geometry,
    p: &ModelParams,
    kind: KernelKind,
    sigma: &SpinConfig,
    tau: &SpinConfig,
) -> Result<f64> {
    kind.check(g)?;
    Ok((0..g.site_count())
        .map(|i| local_update_prob(g, p, kind, sigma, i, tau.get(i)))
        .product())
}

/// Closed form of `ln Σ_τ exp(-H_red(σ,τ))`, i.e. `-H(σ) + ln f(σ)`.
pub fn reduced_log_z_sigma(g: &Geometry, p: &ModelParams, kind: KernelKind, sigma: &SpinConfig) -> f64 {
    -energy_single(g, p, sigma) + log_f_factor(g, p, kind, sigma)
}

/// `ln Z_σ = ln Σ_τ exp(-H(σ,τ))`, closed form.
pub fn log_z_sigma(g: &Geometry, p: &ModelParams, kind: KernelKind, sigma: &SpinConfig) -> Result<f64> {
    kind.check(g)?;
    Ok(pair_energy_shift(g, p, kind) + reduced_log_z_sigma(g, p, kind, sigma))
}

pub fn z_sigma(g: &Geometry, p: &ModelParams, kind: KernelKind, sigma: &SpinConfig) -> Result<f64> {
    let z = log_z_sigma(g, p, kind, sigma)?.exp();
    if z.is_finite() {
        Ok(z)
    } else {
        Err(Error::Overflow("z_sigma"))
    }
}

/// Boltzmann form `exp(-H(σ,τ)) / Z_σ` using the closed-form normaliser.
pub fn transition_prob_boltzmann(
    g: &Geometry,
    p: &ModelParams,
    kind: KernelKind,
    sigma: &SpinConfig,
    tau: &SpinConfig,
) -> Result<f64> {
    let e = reduced_energy_pair(g, p, kind, sigma, tau)?;
    Ok((-e - reduced_log_z_sigma(g, p, kind, sigma)).exp())
}

/// Expected number of flipped sites in one sweep from `σ`.
pub fn expected_flips(g: &Geometry, p: &ModelParams, kind: KernelKind, sigma: &SpinConfig) -> f64 {
    (0..g.site_count())
        .map(|i| local_update_prob(g, p, kind, sigma, i, -sigma.get(i)))
        .sum()
}

pub(crate) fn check_kernel_size(g: &Geometry, what: &'static str) -> Result<()> {
    if g.site_count() > MAX_KERNEL_SITES {
        return Err(Error::TooLarge {
            what,
            sites: g.site_count(),
            limit: MAX_KERNEL_SITES,
        });
    }
    Ok(())
}

/// Dense transition matrix over canonically indexed configurations.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    states: usize,
    entries: Vec<f64>,
}

impl KernelMatrix {
    pub fn build(g: &Geometry, p: &ModelParams, kind: KernelKind) -> Result<Self> {
        kind.check(g)?;
        check_kernel_size(g, "kernel materialisation")?;
        let n = g.site_count();
        let states = 1usize << n;
        let configs: Vec<SpinConfig> = SpinConfig::enumerate(n).collect();
        let mut entries = vec![0.0; states * states];
        entries
            .par_chunks_mut(states)
            .enumerate()
            .for_each(|(a, row)| {
                let sigma = &configs[a];
                let plus: Vec<f64> = (0..n)
                    .map(|i| local_update_prob(g, p, kind, sigma, i, 1))
                    .collect();
                let minus: Vec<f64> = (0..n)
                    .map(|i| local_update_prob(g, p, kind, sigma, i, -1))
                    .collect();
                for (b, cell) in row.iter_mut().enumerate() {
                    *cell = (0..n)
                        .map(|i| if (b >> i) & 1 == 1 { minus[i] } else { plus[i] })
                        .product();
                }
            });
        Ok(KernelMatrix { states, entries })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[from * self.states + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.entries[from * self.states..(from + 1) * self.states]
    }

    /// `(π P)_τ = Σ_σ π_σ P(σ, τ)`.
    pub fn apply_left(&self, pi: &[f64]) -> Result<Vec<f64>> {
        if pi.len() != self.states {
            return Err(Error::DimensionMismatch {
                left: pi.len(),
                right: self.states,
            });
        }
        let mut out = vec![0.0; self.states];
        for (a, &w) in pi.iter().enumerate() {
            for (o, &k) in out.iter_mut().zip(self.row(a)) {
                *o += w * k;
            }
        }
        Ok(out)
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.states)
            .map(|a| (self.row(a).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Largest violation of `π(σ)P(σ,τ) = π(τ)P(τ,σ)` and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalanceReport {
    pub max_residual: f64,
    pub witness: Option<(u64, u64)>,
}

/// Detailed-balance residual against the closed-form stationary measure
/// `π(σ) ∝ Z_σ`, by full enumeration of ordered pairs.
pub fn detailed_balance_residual(g: &Geometry, p: &ModelParams, kind: KernelKind) -> Result<BalanceReport> {
    let kernel = KernelMatrix::build(g, p, kind)?;
    let pi = crate::measures::pca_measure(g, p, kind)?;
    let pi = pi.probabilities();
    let mut report = BalanceReport {
        max_residual: 0.0,
        witness: None,
    };
    for a in 0..kernel.states() {
        for b in (a + 1)..kernel.states() {
            let r = (pi[a] * kernel.get(a, b) - pi[b] * kernel.get(b, a)).abs();
            if r > report.max_residual {
                report.max_residual = r;
                report.witness = Some((a as u64, b as u64));
            }
        }
    }
    Ok(report)
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `|Σ_τ e^{-H(σ,τ)} - Σ_τ e^{-H(τ,σ)}| / Z_σ` by summing over all `τ`,
/// with a caller-supplied pair energy.
pub fn dynamical_balance_residual_with<F>(g: &Geometry, sigma: &SpinConfig, energy: F) -> Result<f64>
where
    F: Fn(&SpinConfig, &SpinConfig) -> Result<f64>,
{
    check_kernel_size(g, "dynamical balance by enumeration")?;
    let n = g.site_count();
    let mut forward = Vec::with_capacity(1 << n);
    let mut backward = Vec::with_capacity(1 << n);
    for tau in SpinConfig::enumerate(n) {
        forward.push(-energy(sigma, &tau)?);
        backward.push(-energy(&tau, sigma)?);
    }
    let lf = log_sum_exp(forward.into_iter());
    let lb = log_sum_exp(backward.into_iter());
    Ok((lb - lf).exp_m1().abs())
}

/// Dynamical balance of the irreversible kernel at `σ`.
///
/// Uses enumeration of `τ` up to [`MAX_KERNEL_SITES`] sites and the product
/// formulas `Σ_τ e^{-H(σ,τ)} = Π_i 2cosh(J(σ_down+σ_left) + qσ_i)`,
/// `Σ_τ e^{-H(τ,σ)} = Π_i 2cosh(J(σ_up+σ_right) + qσ_i)` beyond that.
pub fn dynamical_balance_residual(g: &Geometry, p: &ModelParams, sigma: &SpinConfig) -> Result<f64> {
    let kind = KernelKind::IrreversiblePeriodic;
    kind.check(g)?;
    if g.site_count() <= MAX_KERNEL_SITES {
        dynamical_balance_residual_with(g, sigma, |s, t| {
            reduced_energy_pair(g, p, kind, s, t)
        })
    } else {
        Ok(dynamical_balance_closed_form(g, p, sigma))
    }
}

/// Closed-form dynamical-balance residual (any lattice size).
pub fn dynamical_balance_closed_form(g: &Geometry, p: &ModelParams, sigma: &SpinConfig) -> f64 {
    let j = p.coupling();
    let s = sigma.as_slice();
    let spin = |i: usize, d: Direction| -> f64 {
        s[g.neighbor(i, d).site().expect("periodic lattice has no external sites")] as f64
    };
    // ln(2 cosh(a + qσ)) - q = aσ + ln(1 + δ e^{-2aσ})
    let reduced = |a: f64, si: f64| -> f64 {
        a * si + crate::hamiltonian::log1p_delta_phi(p, a * si)
    };
    let (mut forward, mut backward) = (0.0, 0.0);
    for i in 0..g.site_count() {
        let si = s[i] as f64;
        forward += reduced(j * (spin(i, Direction::Down) + spin(i, Direction::Left)), si);
        backward += reduced(j * (spin(i, Direction::Up) + spin(i, Direction::Right)), si);
    }
    (backward - forward).exp_m1().abs()
}

/// Entry `(Σ_τ e^{-H(σ,τ)})` by brute force, for checking closed forms.
pub fn z_sigma_brute(g: &Geometry, p: &ModelParams, kind: KernelKind, sigma: &SpinConfig) -> Result<f64> {
    check_kernel_size(g, "brute-force normaliser")?;
    let mut total = 0.0;
    for tau in SpinConfig::enumerate(g.site_count()) {
        total += (-energy_pair(g, p, kind, sigma, &tau)?).exp();
    }
    Ok(total)
}

const TABLE_SPAN: usize = 9;
/// Sites per independently seeded chunk in a parallel sweep.
pub const SWEEP_CHUNK: usize = 4096;

/// Parallel sweep sampler for one kernel.
///
/// Every site is updated from a frozen copy of the input configuration using
/// its own counter-based draw, so results depend only on the seed and the
/// sweep counter, never on the number of workers.
pub struct SweepEngine<'g> {
    geometry: &'g Geometry,
    kind: KernelKind,
    table: [f64; 2 * TABLE_SPAN],
    seed: u64,
    sweep: u64,
    pool: Option<rayon::ThreadPool>,
}

impl<'g> SweepEngine<'g> {
    pub fn new(g: &'g Geometry, p: &ModelParams, kind: KernelKind, seed: u64) -> Result<Self> {
        kind.check(g)?;
        let j = p.coupling();
        let q = p.q();
        let mut table = [0.0; 2 * TABLE_SPAN];
        for (spin_slot, sigma_i) in [(0usize, -1.0f64), (1, 1.0)] {
            for k in 0..TABLE_SPAN {
                let field_sum = k as i32 - 4;
                let x = 0.5 * j * field_sum as f64 + q * sigma_i;
                table[spin_slot * TABLE_SPAN + k] = prob_plus(x);
            }
        }
        Ok(SweepEngine {
            geometry: g,
            kind,
            table,
            seed,
            sweep: 0,
            pool: None,
        })
    }

    /// Runs sweeps on a dedicated pool of `workers` threads.
    pub fn with_workers(mut self, workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
        self.pool = Some(pool);
        Ok(self)
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweep
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    /// `P(τ_i = +1)` as used by the sampler for spin `σ_i` and field sum `S`.
    pub fn table_prob(&self, sigma_i: i8, field_sum: i32) -> f64 {
        let slot = usize::from(sigma_i > 0);
        self.table[slot * TABLE_SPAN + (field_sum + 4) as usize]
    }

    /// One parallel update `src -> dst`.
    pub fn step(&mut self, src: &SpinConfig, dst: &mut SpinConfig) -> StepStats {
        assert_eq!(src.len(), self.geometry.site_count());
        assert_eq!(dst.len(), self.geometry.site_count());
        let stream = self.sweep;
        self.sweep += 1;
        let src = src.as_slice();
        let dst = dst.as_mut_slice();
        let neighbors = self.geometry.neighbor_table();
        let kind = self.kind;
        let table = &self.table;
        let seed = self.seed;
        let mut work = move || -> Vec<StepStats> {
            dst.par_chunks_mut(SWEEP_CHUNK)
                .enumerate()
                .map(|(c, out)| {
                    let start = c * SWEEP_CHUNK;
                    let mut rng = site_stream(seed, stream, start);
                    let mut stats = StepStats::default();
                    for (k, slot) in out.iter_mut().enumerate() {
                        let i = start + k;
                        let s = src[i];
                        let f = field_sum(neighbors, kind, src, i);
                        let p_plus = table[usize::from(s > 0) * TABLE_SPAN + (f + 4) as usize];
                        let u = unit_f64(rng.next_u64());
                        let t = if u < p_plus { 1 } else { -1 };
                        stats.flips += usize::from(t != s);
                        stats.expected_flips += if s > 0 { 1.0 - p_plus } else { p_plus };
                        *slot = t;
                    }
                    stats
                })
                .collect()
        };
        let per_chunk = match &self.pool {
            Some(pool) => pool.install(work),
            None => work(),
        };
        // fixed-order reduction keeps the float sum independent of the split
        per_chunk.into_iter().fold(StepStats::default(), |acc, c| StepStats {
            flips: acc.flips + c.flips,
            expected_flips: acc.expected_flips + c.expected_flips,
        })
    }

    /// Advances `state` by one sweep using `scratch` as the output buffer;
    /// afterwards `state` holds the new configuration.
    pub fn step_in_place(&mut self, state: &mut SpinConfig, scratch: &mut SpinConfig) -> StepStats {
        let stats = self.step(state, scratch);
        std::mem::swap(state, scratch);
        stats
    }
}

/// Outcome of one sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub flips: usize,
    /// `Σ_i P(τ_i ≠ σ_i | σ)` for the input configuration.
    pub expected_flips: f64,
}

/// Single sweep from `σ` with a fresh engine positioned at sweep `counter`.
pub fn sweep(
    g: &Geometry,
    p: &ModelParams,
    kind: KernelKind,
    sigma: &SpinConfig,
    seed: u64,
    counter: u64,
) -> Result<SpinConfig> {
    let mut engine = SweepEngine::new(g, p, kind, seed)?;
    engine.sweep = counter;
    let mut out = SpinConfig::all_plus(g.site_count());
    engine.step(sigma, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::energy_single;
    use crate::lattice::Boundary;

    fn geom(l: usize, kind: KernelKind) -> Geometry {
        Geometry::new(l, kind.boundary()).unwrap()
    }

    #[test]
    fn symmetric_field_gives_one_half() {
        assert_eq!(prob_plus(0.0), 0.5);
        // x = h + qσ = 0 when J/2 * S = q: J = 1, S = 2 (one minus neighbour), σ = -1, q = 1
        let p = ModelParams::from_q(1.0, 1.0).unwrap();
        let g = geom(3, KernelKind::ReversiblePeriodic);
        let mut s = SpinConfig::all_plus(9);
        s.flip(4);
        s.flip(1);
        let v = local_update_prob(&g, &p, KernelKind::ReversiblePeriodic, &s, 4, 1);
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn all_plus_interior_probability() {
        let (j, delta) = (0.8, 0.2);
        let p = ModelParams::new(j, delta).unwrap();
        let q = p.q();
        let g = geom(3, KernelKind::ReversiblePeriodic);
        let s = SpinConfig::all_plus(9);
        let got = local_update_prob(&g, &p, KernelKind::ReversiblePeriodic, &s, 4, 1);
        let want = (2.0 * j + q).exp() / (2.0 * (2.0 * j + q).cosh());
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn stable_and_cosh_forms_agree() {
        let p = ModelParams::new(1.3, 0.01).unwrap();
        for kind in KernelKind::ALL {
            let g = geom(3, kind);
            for s in SpinConfig::enumerate(9).step_by(13) {
                for i in 0..9 {
                    for v in [-1i8, 1] {
                        let a = local_update_prob(&g, &p, kind, &s, i, v);
                        let b = local_update_prob_cosh(&g, &p, kind, &s, i, v);
                        assert!((a - b).abs() <= 1e-14, "{a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn frozen_limit() {
        let p = ModelParams::new(1.0, 0.0).unwrap();
        for kind in KernelKind::ALL {
            let g = geom(3, kind);
            for s in SpinConfig::enumerate(9).step_by(17) {
                for i in 0..9 {
                    assert_eq!(local_update_prob(&g, &p, kind, &s, i, s.get(i)), 1.0);
                }
                assert_eq!(transition_prob(&g, &p, kind, &s, &s).unwrap(), 1.0);
                assert_eq!(sweep(&g, &p, kind, &s, 3, 0).unwrap(), s);
            }
        }
    }

    #[test]
    fn rows_are_stochastic() {
        let p = ModelParams::new(0.9, 0.1).unwrap();
        for kind in KernelKind::ALL {
            let g = geom(3, kind);
            let k = KernelMatrix::build(&g, &p, kind).unwrap();
            assert!(k.max_row_sum_error() <= 1e-12);
        }
        let g = Geometry::new(2, Boundary::Plus).unwrap();
        let k = KernelMatrix::build(&g, &p, KernelKind::ReversiblePlus).unwrap();
        assert!(k.max_row_sum_error() <= 1e-12);
    }

    #[test]
    fn product_and_boltzmann_forms_agree() {
        let p = ModelParams::new(1.2, 0.07).unwrap();
        for kind in KernelKind::ALL {
            let g = geom(3, kind);
            for (a, b) in [(0u64, 0u64), (3, 200), (511, 17), (85, 170), (300, 301)] {
                let s = SpinConfig::from_index(a, 9);
                let t = SpinConfig::from_index(b, 9);
                let prod = transition_prob(&g, &p, kind, &s, &t).unwrap();
                let boltz = transition_prob_boltzmann(&g, &p, kind, &s, &t).unwrap();
                let brute = (-energy_pair(&g, &p, kind, &s, &t).unwrap()).exp()
                    / z_sigma_brute(&g, &p, kind, &s).unwrap();
                assert!((prod - boltz).abs() <= 1e-12 * prod, "{kind} {a}->{b}");
                assert!((prod - brute).abs() <= 1e-12 * prod, "{kind} {a}->{b}");
            }
        }
    }

    #[test]
    fn z_sigma_all_plus_periodic() {
        // brute-force sum over the 512 τ, frozen into the closed expression
        let (j, delta) = (0.6, 0.05);
        let p = ModelParams::new(j, delta).unwrap();
        let kind = KernelKind::ReversiblePeriodic;
        let g = geom(3, kind);
        let s = SpinConfig::all_plus(9);
        let brute = z_sigma_brute(&g, &p, kind, &s).unwrap();
        let expect = (18.0 * j).exp() * (1.0 + delta * (-4.0 * j).exp()).powi(9);
        assert!((brute - expect).abs() <= 1e-12 * expect);
        let closed = z_sigma(&g, &p, kind, &s).unwrap();
        assert!((closed - brute).abs() <= 1e-12 * brute);
    }

    #[test]
    fn z_sigma_matches_brute_force_small_lattices() {
        let p = ModelParams::new(0.75, 0.2).unwrap();
        let g = Geometry::new(2, Boundary::Plus).unwrap();
        for s in SpinConfig::enumerate(4) {
            let brute = z_sigma_brute(&g, &p, KernelKind::ReversiblePlus, &s).unwrap();
            let closed = z_sigma(&g, &p, KernelKind::ReversiblePlus, &s).unwrap();
            assert!((closed - brute).abs() <= 1e-12 * brute);
        }
        for kind in KernelKind::ALL {
            let g = geom(3, kind);
            for s in SpinConfig::enumerate(9).step_by(5) {
                let brute = z_sigma_brute(&g, &p, kind, &s).unwrap();
                let closed = z_sigma(&g, &p, kind, &s).unwrap();
                assert!((closed - brute).abs() <= 1e-12 * brute, "{kind}");
            }
        }
    }

    #[test]
    fn frozen_z_sigma_is_gibbs_weight() {
        let p = ModelParams::new(0.75, 0.0).unwrap();
        let g = geom(3, KernelKind::ReversiblePlus);
        let s = SpinConfig::from_index(99, 9);
        let z = z_sigma(&g, &p, KernelKind::ReversiblePlus, &s).unwrap();
        assert!((z - (-energy_single(&g, &p, &s)).exp()).abs() <= 1e-12 * z);
    }

    #[test]
    fn dynamical_balance_closed_form_matches_enumeration() {
        let p = ModelParams::new(0.7, 0.05).unwrap();
        let g = geom(3, KernelKind::IrreversiblePeriodic);
        for s in SpinConfig::enumerate(9).step_by(9) {
            let brute = dynamical_balance_residual(&g, &p, &s).unwrap();
            let closed = dynamical_balance_closed_form(&g, &p, &s);
            assert!(brute <= 1e-12 && closed <= 1e-12);
        }
        let big = Geometry::new(8, Boundary::Periodic).unwrap();
        let s = SpinConfig::from_index(0xDEAD_BEEF_1234, 64);
        assert!(dynamical_balance_residual(&big, &p, &s).unwrap() <= 1e-12);
    }

    #[test]
    fn irreversible_kernel_violates_detailed_balance() {
        let p = ModelParams::new(1.0, 0.1).unwrap();
        let g = geom(3, KernelKind::IrreversiblePeriodic);
        let r = detailed_balance_residual(&g, &p, KernelKind::IrreversiblePeriodic).unwrap();
        assert!(r.max_residual > 1e-6);
        assert!(r.witness.is_some());
    }

    #[test]
    fn kernel_size_is_bounded() {
        let p = ModelParams::new(1.0, 0.1).unwrap();
        let g = Geometry::new(4, Boundary::Plus).unwrap();
        assert!(matches!(
            KernelMatrix::build(&g, &p, KernelKind::ReversiblePlus),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn engine_table_matches_local_probability() {
        let p = ModelParams::new(0.9, 0.03).unwrap();
        for kind in KernelKind::ALL {
            let g = geom(4, kind);
            let engine = SweepEngine::new(&g, &p, kind, 1).unwrap();
            for idx in [0u64, 1, 0x0F0F, 0xABCD, 0xFFFF] {
                let s = SpinConfig::from_index(idx, 16);
                for i in 0..16 {
                    let f = field_sum(g.neighbor_table(), kind, s.as_slice(), i);
                    assert_eq!(
                        engine.table_prob(s.get(i), f),
                        local_update_prob(&g, &p, kind, &s, i, 1)
                    );
                }
            }
        }
    }

    #[test]
    fn sweep_is_deterministic_and_worker_independent() {
        let p = ModelParams::new(0.4, 0.3).unwrap();
        let g = Geometry::new(100, Boundary::Periodic).unwrap();
        let kind = KernelKind::ReversiblePeriodic;
        let start = SpinConfig::all_plus(g.site_count());
        let run = |workers: usize| {
            let mut e = SweepEngine::new(&g, &p, kind, 11).unwrap().with_workers(workers).unwrap();
            let mut s = start.clone();
            let mut scratch = start.clone();
            let mut flips = Vec::new();
            for _ in 0..5 {
                flips.push(e.step_in_place(&mut s, &mut scratch).flips);
            }
            (s, flips)
        };
        let a = run(1);
        assert_eq!(a, run(1));
        assert_eq!(a, run(3));
    }

    #[test]
    fn sweep_draws_follow_site_streams() {
        // each site's outcome is determined by its own (seed, sweep, site) draw
        let p = ModelParams::new(0.5, 0.4).unwrap();
        let kind = KernelKind::IrreversiblePeriodic;
        let g = geom(5, kind);
        let s = SpinConfig::from_index(0x1ABCDEF, 25);
        let out = sweep(&g, &p, kind, &s, 99, 4).unwrap();
        for i in 0..25 {
            let u = crate::rng::site_uniform(99, 4, i);
            let pp = local_update_prob(&g, &p, kind, &s, i, 1);
            assert_eq!(out.get(i), if u < pp { 1 } else { -1 });
        }
    }
}

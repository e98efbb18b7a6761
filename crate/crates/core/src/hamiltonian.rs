//! Energy functions: single-configuration Ising Hamiltonians, the pair
//! Hamiltonians that define the parallel dynamics, local fields, and the
//! per-site factors `phi_i` and `f(σ) = Π_i (1 + δ phi_i)`.
//!
//! Every local field is `h_i = (J/2) * S_i` for an integer `S_i`:
//! * reversible kinds: `S_i` is the sum of the four neighbour spins, external
//!   spins counted as `+1` (so for plus boundary conditions the boundary term
//!   `∂_i = (J/2) * contacts` is folded in);
//! * irreversible kind: `S_i = 2 (σ_down + σ_left)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Boundary, Direction, Geometry, Neighbor};
pub use crate::spins::SpinConfig;

/// Coupling `J` and flip-suppression `δ = exp(-2q)`.
///
/// `δ = 0` is accepted as the frozen-dynamics limit `q = ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    coupling: f64,
    delta: f64,
}

impl ModelParams {
    pub fn new(coupling: f64, delta: f64) -> Result<Self> {
        if !coupling.is_finite() || coupling < 0.0 {
            return Err(Error::Domain(format!("coupling J = {coupling} must be finite and >= 0")));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::Domain(format!("delta = {delta} must lie in [0, 1]")));
        }
        Ok(ModelParams { coupling, delta })
    }

    pub fn from_q(coupling: f64, q: f64) -> Result<Self> {
        if q.is_nan() || q < 0.0 {
            return Err(Error::Domain(format!("self-coupling q = {q} must be >= 0")));
        }
        ModelParams::new(coupling, (-2.0 * q).exp())
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `q = -ln(δ) / 2`; infinite for `δ = 0`.
    pub fn q(&self) -> f64 {
        -0.5 * self.delta.ln()
    }

    pub fn is_frozen(&self) -> bool {
        self.delta == 0.0
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        ModelParams::new(self.coupling, delta)
    }
}

/// Which pair Hamiltonian drives the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    ReversiblePlus,
    ReversiblePeriodic,
    IrreversiblePeriodic,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [
        KernelKind::ReversiblePlus,
        KernelKind::ReversiblePeriodic,
        KernelKind::IrreversiblePeriodic,
    ];

    pub fn boundary(self) -> Boundary {
        match self {
            KernelKind::ReversiblePlus => Boundary::Plus,
            _ => Boundary::Periodic,
        }
    }

    pub fn is_reversible(self) -> bool {
        self != KernelKind::IrreversiblePeriodic
    }

    pub fn reversible_for(boundary: Boundary) -> KernelKind {
        match boundary {
            Boundary::Plus => KernelKind::ReversiblePlus,
            Boundary::Periodic => KernelKind::ReversiblePeriodic,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::ReversiblePlus => "reversible-plus",
            KernelKind::ReversiblePeriodic => "reversible-periodic",
            KernelKind::IrreversiblePeriodic => "irreversible-periodic",
        }
    }

    pub fn check(self, g: &Geometry) -> Result<()> {
        if self.boundary() == g.boundary() {
            Ok(())
        } else {
            Err(Error::KindMismatch {
                kind: self,
                boundary: g.boundary(),
            })
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "reversible-plus" | "rev-plus" => Ok(KernelKind::ReversiblePlus),
            "reversible-periodic" | "rev-periodic" => Ok(KernelKind::ReversiblePeriodic),
            "irreversible-periodic" | "irrev-periodic" | "irrev" => {
                Ok(KernelKind::IrreversiblePeriodic)
            }
            other => Err(Error::Parse(format!("unknown kernel kind `{other}`"))),
        }
    }
}

#[inline]
fn spin_of(sigma: &[i8], n: Neighbor) -> i32 {
    match n {
        Neighbor::Site(j) => sigma[j] as i32,
        Neighbor::External => 1,
    }
}

/// `Σ_{<ij>} σ_i σ_j` over the interacting bonds (external spins `+1`).
pub fn bond_sum(g: &Geometry, sigma: &SpinConfig) -> i64 {
    let s = sigma.as_slice();
    (0..g.bond_count())
        .map(|k| {
            let [a, b] = g.bond_endpoints(k);
            (spin_of(s, a) * spin_of(s, b)) as i64
        })
        .sum()
}

/// `H^per(σ)` or `H^+(σ)` depending on the geometry.
pub fn energy_single(g: &Geometry, p: &ModelParams, sigma: &SpinConfig) -> f64 {
    -p.coupling * bond_sum(g, sigma) as f64
}

/// The integer `S_i` with `h_i = (J/2) S_i`.
#[inline]
pub(crate) fn field_sum(neighbors: &[[Neighbor; 4]], kind: KernelKind, sigma: &[i8], i: usize) -> i32 {
    let row = &neighbors[i];
    match kind {
        KernelKind::IrreversiblePeriodic => {
            2 * (spin_of(sigma, row[Direction::Down as usize])
                + spin_of(sigma, row[Direction::Left as usize]))
        }
        _ => row.iter().map(|&n| spin_of(sigma, n)).sum(),
    }
}

/// Local field `h_i^*(σ)`.
pub fn local_field(g: &Geometry, p: &ModelParams, kind: KernelKind, sigma: &SpinConfig, i: usize) -> f64 {
    0.5 * p.coupling * field_sum(g.neighbor_table(), kind, sigma.as_slice(), i) as f64
}

/// `G^*(σ)`: `Σ_i ∂_i σ_i` for plus boundary conditions, zero otherwise.
pub fn boundary_term(g: &Geometry, p: &ModelParams, kind: KernelKind, sigma: &SpinConfig) -> f64 {
    match kind {
        KernelKind::ReversiblePlus => {
            let s: i64 = (0..g.site_count())
                .map(|i| g.external_contacts(i) as i64 * sigma.get(i) as i64)
                .sum();
            0.5 * p.coupling * s as f64
        }
        _ => 0.0,
    }
}

// q * n with the convention that 0 * ∞ = 0.
fn self_coupling_term(q: f64, n: i64) -> f64 {
    if n == 0 {
        0.0
    } else {
        q * n as f64
    }
}

fn check_len(g: &Geometry, sigma: &SpinConfig) -> Result<()> {
    if sigma.len() != g.site_count() {
        return Err(Error::DimensionMismatch {
            left: sigma.len(),
            right: g.site_count(),
        });
    }
    Ok(())
}

/// Pair Hamiltonian `H^*(σ, τ)`.
///
/// Reversible kinds:
/// `-(J/2) Σ_i Σ_{j~i, j∈Λ} σ_i τ_j - (J/2) Σ_i c_i (σ_i + τ_i) + q Σ_i (1 - σ_i τ_i)`
/// with `c_i` the number of external contacts (zero on the torus).
/// Irreversible kind: `-Σ_i [J σ_i (τ_up + τ_right) + q σ_i τ_i]`.
///
/// With `δ = 0` the result is `±∞` whenever the `q` term is nonzero.
pub fn energy_pair(
    g: &Geometry,
    p: &ModelParams,
    kind: KernelKind,
    sigma: &SpinConfig,
    tau: &SpinConfig,
) -> Result<f64> {
    kind.check(g)?;
    check_len(g, sigma)?;
    check_len(g, tau)?;
    let (s, t) = (sigma.as_slice(), tau.as_slice());
    let j = p.coupling;
    let q = p.q();
    let overlap: i64 = s.iter().zip(t).map(|(&a, &b)| (a * b) as i64).sum();
    let n = g.site_count() as i64;
    match kind {
        KernelKind::IrreversiblePeriodic => {
            let mut coupling_sum = 0i64;
            for i in 0..g.site_count() {
                let up = spin_of(t, g.neighbor(i, Direction::Up));
                let right = spin_of(t, g.neighbor(i, Direction::Right));
                coupling_sum += (s[i] as i32 * (up + right)) as i64;
            }
            Ok(-j * coupling_sum as f64 - self_coupling_term(q, overlap))
        }
        _ => {
            let mut cross = 0i64;
            let mut contact = 0i64;
            for i in 0..g.site_count() {
                for (nb, _) in g.neighbors(i) {
                    if let Neighbor::Site(k) = nb {
                        cross += (s[i] * t[k]) as i64;
                    }
                }
                contact += g.external_contacts(i) as i64 * (s[i] + t[i]) as i64;
            }
            Ok(-0.5 * j * (cross + contact) as f64 + self_coupling_term(q, n - overlap))
        }
    }
}

/// Constant `c` with `H^*(σ,τ) = H_red(σ,τ) - c`: `q|Λ|` for the irreversible
/// kind, zero for the reversible ones.
pub fn pair_energy_shift(g: &Geometry, p: &ModelParams, kind: KernelKind) -> f64 {
    match kind {
        KernelKind::IrreversiblePeriodic => p.q() * g.site_count() as f64,
        _ => 0.0,
    }
}

/// Pair Hamiltonian shifted by [`pair_energy_shift`], written as the coupling
/// part plus `2q` per flipped site. Finite for `τ = σ` even when `δ = 0`.
pub fn reduced_energy_pair(
    g: &Geometry,
    p: &ModelParams,
    kind: KernelKind,
    sigma: &SpinConfig,
    tau: &SpinConfig,
) -> Result<f64> {
    kind.check(g)?;
    check_len(g, sigma)?;
    check_len(g, tau)?;
    let (s, t) = (sigma.as_slice(), tau.as_slice());
    let flips = sigma.disagreements(tau) as i64;
    let coupling_sum: i64 = (0..g.site_count())
        .map(|i| t[i] as i64 * field_sum(g.neighbor_table(), kind, s, i) as i64)
        .sum::<i64>()
        + match kind {
            KernelKind::ReversiblePlus => (0..g.site_count())
                .map(|i| g.external_contacts(i) as i64 * s[i] as i64)
                .sum::<i64>(),
            _ => 0,
        };
    Ok(-0.5 * p.coupling * coupling_sum as f64 + self_coupling_term(2.0 * p.q(), flips))
}

/// Second written form of the irreversible pair Hamiltonian,
/// `-Σ_i [J τ_i (σ_down + σ_left) + q σ_i τ_i]`.
pub fn energy_pair_irreversible_transposed(
    g: &Geometry,
    p: &ModelParams,
    sigma: &SpinConfig,
    tau: &SpinConfig,
) -> Result<f64> {
    KernelKind::IrreversiblePeriodic.check(g)?;
    check_len(g, sigma)?;
    check_len(g, tau)?;
    let (s, t) = (sigma.as_slice(), tau.as_slice());
    let overlap: i64 = s.iter().zip(t).map(|(&a, &b)| (a * b) as i64).sum();
    let mut coupling_sum = 0i64;
    for i in 0..g.site_count() {
        let down = spin_of(s, g.neighbor(i, Direction::Down));
        let left = spin_of(s, g.neighbor(i, Direction::Left));
        coupling_sum += (t[i] as i32 * (down + left)) as i64;
    }
    Ok(-p.coupling * coupling_sum as f64 - self_coupling_term(p.q(), overlap))
}

/// Residual of the field decomposition of the pair Hamiltonian.
///
/// Reversible kinds compare `H^*(σ,τ)` against
/// `-Σ_i (h_i(σ) + σ_i q) τ_i - G^*(σ) + q|Λ|`; the irreversible kind compares
/// its two written forms. Requires `δ > 0`.
pub fn decomposition_residual(
    g: &Geometry,
    p: &ModelParams,
    kind: KernelKind,
    sigma: &SpinConfig,
    tau: &SpinConfig,
) -> Result<f64> {
    if p.is_frozen() {
        return Err(Error::Domain("decomposition needs a finite q (delta > 0)".into()));
    }
    let lhs = energy_pair(g, p, kind, sigma, tau)?;
    let rhs = match kind {
        KernelKind::IrreversiblePeriodic => energy_pair_irreversible_transposed(g, p, sigma, tau)?,
        _ => {
            let q = p.q();
            let linear: f64 = (0..g.site_count())
                .map(|i| (local_field(g, p, kind, sigma, i) + sigma.get(i) as f64 * q) * tau.get(i) as f64)
                .sum();
            -linear - boundary_term(g, p, kind, sigma) + q * g.site_count() as f64
        }
    };
    Ok((lhs - rhs).abs())
}

/// `phi_i = exp(-2 h_i(σ) σ_i)`.
pub fn phi(g: &Geometry, p: &ModelParams, kind: KernelKind, sigma: &SpinConfig, i: usize) -> f64 {
    (-2.0 * local_field(g, p, kind, sigma, i) * sigma.get(i) as f64).exp()
}

/// `ln f(σ) = Σ_i ln(1 + δ phi_i)`.
pub fn log_f_factor(g: &Geometry, p: &ModelParams, kind: KernelKind, sigma: &SpinConfig) -> f64 {
    if p.is_frozen() {
        return 0.0;
    }
    (0..g.site_count())
        .map(|i| log1p_delta_phi(p, local_field(g, p, kind, sigma, i) * sigma.get(i) as f64))
        .sum()
}

/// `ln(1 + δ exp(-2x))` without overflowing for large `x < 0`.
pub(crate) fn log1p_delta_phi(p: &ModelParams, x: f64) -> f64 {
    let log_term = p.delta.ln() - 2.0 * x;
    if log_term > 30.0 {
        log_term + (-log_term).exp().ln_1p()
    } else {
        log_term.exp().ln_1p()
    }
}

/// `f(σ) = Π_i (1 + δ phi_i)`.
pub fn f_factor(g: &Geometry, p: &ModelParams, kind: KernelKind, sigma: &SpinConfig) -> Result<f64> {
    let mut prod = 1.0f64;
    for i in 0..g.site_count() {
        prod *= 1.0 + p.delta * phi(g, p, kind, sigma, i);
    }
    if prod.is_finite() {
        Ok(prod)
    } else {
        Err(Error::Overflow("f_factor"))
    }
}

//! Peierls contours on the dual lattice and the hard-core polymer gas they
//! form.
//!
//! A contour `Γ` is stored as the sorted list of bond indices whose spins
//! disagree; the dual segment of bond `k` is [`Geometry::dual_edge_of`]. For
//! plus boundary conditions the map `σ -> Γ` is one-to-one onto the even
//! subgraphs of the `(L+1) x (L+1)` dual grid. On the torus it is two-to-one
//! (`σ` and `-σ`) onto a strict subset of the even subgraphs: windings have
//! to cancel, so torus enumeration always goes through `σ`.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::E;

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{bond_sum, energy_single, log_f_factor, KernelKind, ModelParams};
use crate::lattice::{Boundary, Direction, Geometry, Neighbor};
use crate::measures::check_enumerable;
use crate::spins::SpinConfig;

/// How segments are grouped into polymers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Connectivity {
    /// Shared dual vertex, or parallel with midpoints at distance exactly 1.
    PConnected,
    /// Shared dual vertex only.
    Standard,
}

impl Connectivity {
    /// The grouping under which `ξ` factorises for `kind`.
    pub fn for_kind(kind: KernelKind) -> Self {
        if kind.is_reversible() {
            Connectivity::PConnected
        } else {
            Connectivity::Standard
        }
    }
}

/// `|l_1|..|l_4|`: sites of `Λ` with exactly `s` of their counted bonds in
/// the contour. Reversible kinds count all four bonds of a site, the
/// irreversible kind only the down and left bonds (so `l_3 = l_4 = ∅`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ClassCounts(pub [usize; 4]);

impl ClassCounts {
    pub fn get(&self, s: usize) -> usize {
        self.0[s - 1]
    }

    /// `Σ_s |l_s|`.
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// `Σ_s s |l_s|`.
    pub fn weighted(&self) -> usize {
        self.0.iter().enumerate().map(|(k, n)| (k + 1) * n).sum()
    }
}

impl std::ops::Add for ClassCounts {
    type Output = ClassCounts;

    fn add(self, rhs: ClassCounts) -> ClassCounts {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o += r;
        }
        ClassCounts(out)
    }
}

fn counted_bonds(g: &Geometry, kind: KernelKind, i: usize) -> ([usize; 4], usize) {
    if kind.is_reversible() {
        (g.site_bonds(i), 4)
    } else {
        let b = [
            g.site_bond(i, Direction::Down),
            g.site_bond(i, Direction::Left),
            0,
            0,
        ];
        (b, 2)
    }
}

/// A set of dual segments, identified by the bonds they cross.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
pub struct ContourSet {
    edges: Vec<usize>,
}

impl ContourSet {
    pub fn from_edges(g: &Geometry, mut edges: Vec<usize>) -> Result<Self> {
        edges.sort_unstable();
        edges.dedup();
        if let Some(&bad) = edges.iter().find(|&&k| k >= g.bond_count()) {
            return Err(Error::Domain(format!("bond index {bad} out of range")));
        }
        Ok(ContourSet { edges })
    }

    fn from_mask(mask: u64, m: usize) -> Self {
        ContourSet {
            edges: (0..m).filter(|k| (mask >> k) & 1 == 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn contains(&self, k: usize) -> bool {
        self.edges.binary_search(&k).is_ok()
    }

    /// Doubled midpoint coordinates of every segment.
    pub fn midpoints(&self, g: &Geometry) -> Vec<(i32, i32)> {
        self.edges.iter().map(|&k| g.dual_edge_of(k).mid2).collect()
    }

    pub fn dual_degrees(&self, g: &Geometry) -> Vec<u8> {
        let mut deg = vec![0u8; g.dual_vertex_count()];
        for &k in &self.edges {
            for v in g.dual_endpoints(k) {
                deg[v] += 1;
            }
        }
        deg
    }

    pub fn is_even(&self, g: &Geometry) -> bool {
        self.dual_degrees(g).iter().all(|d| d % 2 == 0)
    }

    pub fn class_counts(&self, g: &Geometry, kind: KernelKind) -> ClassCounts {
        let mut counts = [0usize; 4];
        for i in 0..g.site_count() {
            let (bonds, n) = counted_bonds(g, kind, i);
            let s = bonds[..n].iter().filter(|&&b| self.contains(b)).count();
            if s > 0 {
                counts[s - 1] += 1;
            }
        }
        ClassCounts(counts)
    }
}

/// Segments dual to the disagreeing bonds of `σ` (external spins `+1`).
pub fn extract_contour(g: &Geometry, sigma: &SpinConfig) -> ContourSet {
    let s = sigma.as_slice();
    let spin = |n: Neighbor| match n {
        Neighbor::Site(j) => s[j],
        Neighbor::External => 1,
    };
    let edges = (0..g.bond_count())
        .filter(|&k| {
            let [a, b] = g.bond_endpoints(k);
            spin(a) != spin(b)
        })
        .collect();
    ContourSet { edges }
}

/// `Σ_{<ij>} σ_i σ_j - (|B| - 2|Γ|)`, in units of `J`. Zero for every `σ`.
pub fn energy_contour_identity(g: &Geometry, sigma: &SpinConfig) -> i64 {
    let gamma = extract_contour(g, sigma);
    bond_sum(g, sigma) - (g.bond_count() as i64 - 2 * gamma.len() as i64)
}

fn midpoint_key(g: &Geometry, (a, b): (i32, i32)) -> (i32, i32) {
    match g.boundary() {
        Boundary::Plus => (a, b),
        Boundary::Periodic => {
            let m = 2 * g.side() as i32;
            (a.rem_euclid(m), b.rem_euclid(m))
        }
    }
}

/// Component label of every segment of `gamma`, in the order of
/// [`ContourSet::edges`]; labels are `0..n` in order of first appearance.
pub fn component_labels(g: &Geometry, gamma: &ContourSet, conn: Connectivity) -> Vec<usize> {
    let edges = gamma.edges();
    let mut uf = UnionFind::<usize>::new(edges.len());
    let mut at_vertex: HashMap<usize, usize> = HashMap::new();
    for (pos, &k) in edges.iter().enumerate() {
        for v in g.dual_endpoints(k) {
            if let Some(&other) = at_vertex.get(&v) {
                uf.union(pos, other);
            } else {
                at_vertex.insert(v, pos);
            }
        }
    }
    if conn == Connectivity::PConnected {
        let by_mid: HashMap<(i32, i32), usize> = edges
            .iter()
            .enumerate()
            .map(|(pos, &k)| (midpoint_key(g, g.dual_edge_of(k).mid2), pos))
            .collect();
        for (pos, &k) in edges.iter().enumerate() {
            let (a, b) = g.dual_edge_of(k).mid2;
            // same parity class in doubled coordinates means same orientation
            for (da, db) in [(2, 0), (0, 2)] {
                if let Some(&other) = by_mid.get(&midpoint_key(g, (a + da, b + db))) {
                    uf.union(pos, other);
                }
            }
        }
    }
    let mut relabel: HashMap<usize, usize> = HashMap::new();
    (0..edges.len())
        .map(|pos| {
            let root = uf.find(pos);
            let next = relabel.len();
            *relabel.entry(root).or_insert(next)
        })
        .collect()
}

/// Splits `gamma` into its components under `conn`.
pub fn decompose(g: &Geometry, gamma: &ContourSet, conn: Connectivity) -> Vec<ContourSet> {
    let labels = component_labels(g, gamma, conn);
    let n = labels.iter().map(|&l| l + 1).max().unwrap_or(0);
    let mut parts = vec![Vec::new(); n];
    for (&k, &l) in gamma.edges().iter().zip(&labels) {
        parts[l].push(k);
    }
    parts.into_iter().map(|edges| ContourSet { edges }).collect()
}

/// Whether every site touched by `gamma` (through its counted bonds) is
/// touched by a single component only.
pub fn site_association_holds(g: &Geometry, gamma: &ContourSet, parts: &[ContourSet], kind: KernelKind) -> bool {
    let owner: HashMap<usize, usize> = parts
        .iter()
        .enumerate()
        .flat_map(|(c, part)| part.edges().iter().map(move |&k| (k, c)))
        .collect();
    (0..g.site_count()).all(|i| {
        let (bonds, n) = counted_bonds(g, kind, i);
        let mut seen = bonds[..n].iter().filter(|&&b| gamma.contains(b)).map(|b| owner.get(b));
        match seen.next() {
            None => true,
            Some(first) => first.is_some() && seen.all(|o| o == first),
        }
    })
}

// Exponent a in the class-s numerator 1 + δ e^{aJ}.
fn class_exponent(kind: KernelKind, s: usize) -> f64 {
    if kind.is_reversible() {
        2.0 * s as f64 - 4.0
    } else {
        4.0 * s as f64 - 4.0
    }
}

/// `ξ_k(Γ)` from the class counts of `Γ`. `δ` may be negative as long as
/// `1 + δ e^{-4J} > 0`.
pub fn xi_weight(counts: &ClassCounts, k: u32, coupling: f64, delta: f64, kind: KernelKind) -> Result<f64> {
    let denom = 1.0 + delta * (-4.0 * coupling).exp();
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::Domain(format!(
            "1 + delta exp(-4J) = {denom} is not positive"
        )));
    }
    let mut xi = 1.0;
    for s in 1..=4 {
        let n = counts.get(s);
        if n == 0 {
            continue;
        }
        let ratio = (1.0 + delta * (class_exponent(kind, s) * coupling).exp()) / denom;
        xi *= ratio.powi((k as usize * n) as i32);
    }
    Ok(xi)
}

/// `ln ξ_k(Γ)` for `δ ≥ 0`, via `ln_1p`.
pub fn log_xi_weight(counts: &ClassCounts, k: u32, p: &ModelParams, kind: KernelKind) -> f64 {
    let (j, d) = (p.coupling(), p.delta());
    let denom = (d * (-4.0 * j).exp()).ln_1p();
    (1..=4)
        .map(|s| {
            let num = (d * (class_exponent(kind, s) * j).exp()).ln_1p();
            (k as usize * counts.get(s)) as f64 * (num - denom)
        })
        .sum()
}

/// Polymer activity `ρ_k(γ) = ξ_k(γ) e^{-2J|γ|}`.
pub fn activity(g: &Geometry, gamma: &ContourSet, k: u32, coupling: f64, delta: f64, kind: KernelKind) -> Result<f64> {
    let xi = xi_weight(&gamma.class_counts(g, kind), k, coupling, delta, kind)?;
    Ok(xi * (-2.0 * coupling * gamma.len() as f64).exp())
}

/// `A(J,δ) = e^{-2J} [(1 + |δ| e^{4J}) / (1 - |δ| e^{-4J})]^m` with `m = 4`
/// for reversible kinds and `m = 2` for the irreversible one. Infinite once
/// `|δ| ≥ e^{4J}`.
pub fn activity_bound(coupling: f64, delta: f64, kind: KernelKind) -> f64 {
    let d = delta.abs();
    let den = 1.0 - d * (-4.0 * coupling).exp();
    if d >= (4.0 * coupling).exp() || den <= 0.0 {
        return f64::INFINITY;
    }
    let ratio = (1.0 + d * (4.0 * coupling).exp()) / den;
    let m = if kind.is_reversible() { 4 } else { 2 };
    (-2.0 * coupling).exp() * ratio.powi(m)
}

/// Every even subgraph of the dual graph of `g`, by backtracking over the
/// bonds with a parity cut at each vertex's last incident edge.
pub fn even_subgraphs(g: &Geometry) -> Result<Vec<ContourSet>> {
    let m = g.bond_count();
    if m > 64 {
        return Err(Error::TooLarge {
            what: "even subgraph enumeration",
            sites: g.site_count(),
            limit: 64,
        });
    }
    let ends: Vec<[usize; 2]> = (0..m).map(|k| g.dual_endpoints(k)).collect();
    let mut last = vec![usize::MAX; g.dual_vertex_count()];
    for (k, e) in ends.iter().enumerate() {
        for &v in e {
            last[v] = k;
        }
    }

    struct Walk<'a> {
        ends: &'a [[usize; 2]],
        last: &'a [usize],
        parity: Vec<bool>,
        out: Vec<u64>,
    }
    impl Walk<'_> {
        fn go(&mut self, k: usize, mask: u64) {
            if k == self.ends.len() {
                self.out.push(mask);
                return;
            }
            let [a, b] = self.ends[k];
            for take in [false, true] {
                if take {
                    self.parity[a] ^= true;
                    self.parity[b] ^= true;
                }
                let closed = |v: usize| self.last[v] != k || !self.parity[v];
                if closed(a) && closed(b) {
                    self.go(k + 1, if take { mask | 1 << k } else { mask });
                }
                if take {
                    self.parity[a] ^= true;
                    self.parity[b] ^= true;
                }
            }
        }
    }
    let mut walk = Walk {
        ends: &ends,
        last: &last,
        parity: vec![false; g.dual_vertex_count()],
        out: Vec::new(),
    };
    walk.go(0, 0);
    let mut out: Vec<ContourSet> = walk.out.into_iter().map(|mask| ContourSet::from_mask(mask, m)).collect();
    out.sort();
    Ok(out)
}

/// Distinct images of `σ -> Γ` over all configurations, sorted.
pub fn contour_images(g: &Geometry) -> Result<Vec<ContourSet>> {
    check_enumerable(g, "contour images")?;
    let n = g.site_count();
    let images: BTreeSet<ContourSet> = (0..1u64 << n)
        .into_par_iter()
        .map(|k| extract_contour(g, &SpinConfig::from_index(k, n)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    Ok(images.into_iter().collect())
}

/// Both sides of the contour representation of `π_G(f^k)`:
/// `Σ_σ w_G(σ) f(σ)^k e^{-J|B|} (1 + δe^{-4J})^{-k|Λ|} = c Ξ` with `c = 1`
/// for plus and `c = 2` on the torus.
#[derive(Debug, Clone, Serialize)]
pub struct PartitionReport {
    pub side: usize,
    pub kind: KernelKind,
    pub k: u32,
    pub coupling: f64,
    pub delta: f64,
    /// `σ`-preimages per contour.
    pub multiplicity: u32,
    /// Number of contours summed over.
    pub contours: usize,
    /// `Σ_Γ e^{-2J|Γ|} ξ_k(Γ)`.
    pub xi_contour: f64,
    /// `Σ_Γ Π_{γ ⊂ Γ} ρ_k(γ)` over the components of each `Γ`.
    pub xi_polymer: f64,
    /// Spin sum divided by the multiplicity.
    pub spin_side: f64,
    pub relative_residual: f64,
}

pub fn contour_partition(g: &Geometry, k: u32, p: &ModelParams, kind: KernelKind) -> Result<PartitionReport> {
    kind.check(g)?;
    check_enumerable(g, "contour partition function")?;
    let (contours, multiplicity) = match g.boundary() {
        Boundary::Plus => (even_subgraphs(g)?, 1u32),
        Boundary::Periodic => (contour_images(g)?, 2u32),
    };
    let j = p.coupling();
    let conn = Connectivity::for_kind(kind);
    let terms: Vec<(f64, f64)> = contours
        .par_iter()
        .map(|gamma| {
            let whole = (-2.0 * j * gamma.len() as f64
                + log_xi_weight(&gamma.class_counts(g, kind), k, p, kind))
            .exp();
            let parts: f64 = decompose(g, gamma, conn)
                .iter()
                .map(|part| {
                    (-2.0 * j * part.len() as f64
                        + log_xi_weight(&part.class_counts(g, kind), k, p, kind))
                    .exp()
                })
                .product();
            (whole, parts)
        })
        .collect();
    let xi_contour: f64 = terms.iter().map(|t| t.0).sum();
    let xi_polymer: f64 = terms.iter().map(|t| t.1).sum();

    let n = g.site_count();
    let offset = -j * g.bond_count() as f64
        - (k as usize * n) as f64 * (p.delta() * (-4.0 * j).exp()).ln_1p();
    let spin_sum: f64 = (0..1u64 << n)
        .into_par_iter()
        .map(|idx| {
            let s = SpinConfig::from_index(idx, n);
            (-energy_single(g, p, &s) + k as f64 * log_f_factor(g, p, kind, &s) + offset).exp()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let spin_side = spin_sum / multiplicity as f64;
    let relative_residual = ((xi_contour - spin_side) / spin_side)
        .abs()
        .max(((xi_polymer - spin_side) / spin_side).abs());
    Ok(PartitionReport {
        side: g.side(),
        kind,
        k,
        coupling: j,
        delta: p.delta(),
        multiplicity,
        contours: contours.len(),
        xi_contour,
        xi_polymer,
        spin_side,
        relative_residual,
    })
}

/// `e · 3^{3/2}` (p-contours) or `3e` (standard contours): growth rate of the
/// number of contours of length `n` through a point, times `e^a` with `a = 1`.
pub fn counting_base(kind: KernelKind) -> f64 {
    if kind.is_reversible() {
        E * 3f64.powf(1.5)
    } else {
        3.0 * E
    }
}

/// Right-hand side of the point-sum condition: `a/3` for p-contours, `1` for
/// standard contours.
pub fn kp_target(kind: KernelKind) -> f64 {
    if kind.is_reversible() {
        1.0 / 3.0
    } else {
        1.0
    }
}

/// `e^{2J} > 4e·3^{3/2}` and `|δ| < e^{-4J}/12`.
pub fn radius_window(coupling: f64, delta: f64) -> bool {
    (2.0 * coupling).exp() > 4.0 * E * 3f64.powf(1.5) && delta.abs() < (-4.0 * coupling).exp() / 12.0
}

/// `J` at which the first half of [`radius_window`] becomes true.
pub fn radius_threshold_coupling() -> f64 {
    (4.0 * E * 3f64.powf(1.5)).ln() / 2.0
}

pub const KP_CUTOFF: u32 = 64;

#[derive(Debug, Clone, Serialize)]
pub struct KPReport {
    pub kind: KernelKind,
    pub coupling: f64,
    pub delta: f64,
    /// Weight parameter in `a(γ) = a|γ|`.
    pub a: f64,
    pub activity_bound: f64,
    /// `1 / (2 · counting_base)`.
    pub threshold: f64,
    /// `activity_bound < threshold`.
    pub satisfied: bool,
    /// `x^4 / (1 - x) ≤ target` with `x = counting_base · A`.
    pub series_condition: bool,
    pub series_value: f64,
    pub series_target: f64,
    pub radius_window: bool,
    /// `Σ_{n=4}^{N} x^n`.
    pub truncated_sum: f64,
    pub cutoff: u32,
    /// `Σ_{n>N} x^n`, infinite when `x ≥ 1`.
    pub tail_bound: f64,
}

pub fn kp_check(coupling: f64, delta: f64, kind: KernelKind) -> KPReport {
    let a_bound = activity_bound(coupling, delta, kind);
    let base = counting_base(kind);
    let threshold = 1.0 / (2.0 * base);
    let x = base * a_bound;
    let series_value = if x < 1.0 { x.powi(4) / (1.0 - x) } else { f64::INFINITY };
    let truncated_sum = if x.is_finite() {
        (4..=KP_CUTOFF).map(|n| x.powi(n as i32)).sum()
    } else {
        f64::INFINITY
    };
    let tail_bound = if x < 1.0 {
        x.powi(KP_CUTOFF as i32 + 1) / (1.0 - x)
    } else {
        f64::INFINITY
    };
    KPReport {
        kind,
        coupling,
        delta,
        a: 1.0,
        activity_bound: a_bound,
        threshold,
        satisfied: a_bound < threshold,
        series_condition: series_value <= kp_target(kind),
        series_value,
        series_target: kp_target(kind),
        radius_window: radius_window(coupling, delta),
        truncated_sum,
        cutoff: KP_CUTOFF,
        tail_bound,
    }
}

/// JSON view of one configuration's contour.
#[derive(Debug, Clone, Serialize)]
pub struct ContourDump {
    pub side: usize,
    pub boundary: Boundary,
    pub kind: KernelKind,
    pub config: String,
    /// Doubled midpoint coordinates `(2y, 2x)` of each segment.
    pub segments: Vec<(i32, i32)>,
    pub p_components: Vec<usize>,
    pub standard_components: Vec<usize>,
    pub p_classes: Vec<ClassCounts>,
    pub standard_classes: Vec<ClassCounts>,
    pub classes: ClassCounts,
}

pub fn dump_contour(g: &Geometry, kind: KernelKind, sigma: &SpinConfig) -> Result<ContourDump> {
    kind.check(g)?;
    if sigma.len() != g.site_count() {
        return Err(Error::DimensionMismatch {
            left: sigma.len(),
            right: g.site_count(),
        });
    }
    let gamma = extract_contour(g, sigma);
    let classes_of = |conn| {
        decompose(g, &gamma, conn)
            .iter()
            .map(|part| part.class_counts(g, kind))
            .collect()
    };
    Ok(ContourDump {
        side: g.side(),
        boundary: g.boundary(),
        kind,
        config: sigma.to_grid(g.side()),
        segments: gamma.midpoints(g),
        p_components: component_labels(g, &gamma, Connectivity::PConnected),
        standard_components: component_labels(g, &gamma, Connectivity::Standard),
        p_classes: classes_of(Connectivity::PConnected),
        standard_classes: classes_of(Connectivity::Standard),
        classes: gamma.class_counts(g, kind),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::FMoments;
    use proptest::prelude::*;

    fn plus(l: usize) -> Geometry {
        Geometry::new(l, Boundary::Plus).unwrap()
    }

    fn torus(l: usize) -> Geometry {
        Geometry::new(l, Boundary::Periodic).unwrap()
    }

    fn flips(g: &Geometry, sites: &[(usize, usize)]) -> SpinConfig {
        let mut s = SpinConfig::all_plus(g.site_count());
        for &(r, c) in sites {
            s.flip(g.site_at(r, c));
        }
        s
    }

    #[test]
    fn all_plus_has_no_contour() {
        let g = plus(3);
        assert!(extract_contour(&g, &SpinConfig::all_plus(9)).is_empty());
        assert_eq!(energy_contour_identity(&g, &SpinConfig::all_plus(9)), 0);
    }

    #[test]
    fn single_flip_is_unit_square() {
        let g = plus(3);
        let s = flips(&g, &[(1, 1)]);
        let gamma = extract_contour(&g, &s);
        assert_eq!(gamma.len(), 4);
        assert!(gamma.is_even(&g));
        let c = gamma.class_counts(&g, KernelKind::ReversiblePlus);
        assert_eq!(c, ClassCounts([4, 0, 0, 1]));
        // energy jump of a single flip is 2J|Γ| = 8J
        let p = ModelParams::new(1.0, 0.0).unwrap();
        let jump = energy_single(&g, &p, &s) - energy_single(&g, &p, &SpinConfig::all_plus(9));
        assert_eq!(jump, 8.0);
    }

    #[test]
    fn corner_flip_touches_external_bonds() {
        let g = plus(3);
        let gamma = extract_contour(&g, &flips(&g, &[(0, 0)]));
        assert_eq!(gamma.len(), 4);
        let c = gamma.class_counts(&g, KernelKind::ReversiblePlus);
        // only the two inside neighbours are in Λ
        assert_eq!(c, ClassCounts([2, 0, 0, 1]));
        let contacts = gamma
            .edges()
            .iter()
            .filter(|&&k| g.bond_endpoints(k).iter().any(|n| n.site().is_none()))
            .count();
        assert_eq!(c.weighted(), 2 * gamma.len() - contacts);
    }

    #[test]
    fn plus_map_is_injective_and_even() {
        for l in [2usize, 3] {
            let g = plus(l);
            let n = l * l;
            let images: BTreeSet<ContourSet> = SpinConfig::enumerate(n)
                .map(|s| {
                    let gamma = extract_contour(&g, &s);
                    assert!(gamma.is_even(&g));
                    assert_eq!(energy_contour_identity(&g, &s), 0);
                    gamma
                })
                .collect();
            assert_eq!(images.len(), 1 << n);
        }
    }

    #[test]
    fn even_subgraph_counts() {
        // cycle space dimension |E| - |V| + 1
        assert_eq!(even_subgraphs(&plus(2)).unwrap().len(), 16);
        assert_eq!(even_subgraphs(&plus(3)).unwrap().len(), 512);
        // the torus has two extra winding generators, and only 1/4 of its
        // even subgraphs are images
        let g = torus(3);
        assert_eq!(even_subgraphs(&g).unwrap().len(), 1 << 10);
        assert_eq!(contour_images(&g).unwrap().len(), 256);
    }

    #[test]
    fn plus_images_are_all_even_subgraphs() {
        let g = plus(3);
        assert_eq!(contour_images(&g).unwrap(), even_subgraphs(&g).unwrap());
    }

    #[test]
    fn periodic_map_is_two_to_one() {
        let g = torus(3);
        let mut pre: HashMap<ContourSet, Vec<SpinConfig>> = HashMap::new();
        for s in SpinConfig::enumerate(9) {
            let gamma = extract_contour(&g, &s);
            assert!(gamma.is_even(&g));
            assert_eq!(energy_contour_identity(&g, &s), 0);
            pre.entry(gamma).or_default().push(s);
        }
        assert_eq!(pre.len(), 256);
        for v in pre.values() {
            assert_eq!(v.len(), 2);
            assert_eq!(v[0], v[1].negated());
        }
    }

    #[test]
    fn distance_two_flips_split_only_under_standard() {
        let g = plus(5);
        let gamma = extract_contour(&g, &flips(&g, &[(0, 0), (0, 2)]));
        assert_eq!(decompose(&g, &gamma, Connectivity::PConnected).len(), 1);
        assert_eq!(decompose(&g, &gamma, Connectivity::Standard).len(), 2);
    }

    #[test]
    fn diagonal_flips_share_a_vertex() {
        let g = plus(5);
        let gamma = extract_contour(&g, &flips(&g, &[(1, 1), (2, 2)]));
        assert_eq!(decompose(&g, &gamma, Connectivity::PConnected).len(), 1);
        assert_eq!(decompose(&g, &gamma, Connectivity::Standard).len(), 1);
    }

    #[test]
    fn far_flips_are_separate() {
        let g = plus(5);
        let gamma = extract_contour(&g, &flips(&g, &[(0, 0), (3, 4)]));
        assert_eq!(decompose(&g, &gamma, Connectivity::PConnected).len(), 2);
        assert_eq!(decompose(&g, &gamma, Connectivity::Standard).len(), 2);
    }

    #[test]
    fn torus_distance_wraps() {
        // flips at columns 0 and 3 of a 4-torus are adjacent across the seam,
        // flips at columns 0 and 2 of a 5-torus are two apart
        let g = torus(4);
        let gamma = extract_contour(&g, &flips(&g, &[(0, 0), (0, 3)]));
        assert_eq!(decompose(&g, &gamma, Connectivity::Standard).len(), 1);
        let g = torus(5);
        let gamma = extract_contour(&g, &flips(&g, &[(0, 0), (0, 3)]));
        assert_eq!(decompose(&g, &gamma, Connectivity::PConnected).len(), 1);
        assert_eq!(decompose(&g, &gamma, Connectivity::Standard).len(), 2);
    }

    #[test]
    fn class_additivity_and_association() {
        for kind in KernelKind::ALL {
            let g = Geometry::new(3, kind.boundary()).unwrap();
            let conn = Connectivity::for_kind(kind);
            for s in SpinConfig::enumerate(9) {
                let gamma = extract_contour(&g, &s);
                let parts = decompose(&g, &gamma, conn);
                assert!(site_association_holds(&g, &gamma, &parts, kind));
                let sum = parts
                    .iter()
                    .fold(ClassCounts::default(), |acc, p| acc + p.class_counts(&g, kind));
                assert_eq!(sum, gamma.class_counts(&g, kind), "{kind} {s}");
                assert_eq!(parts.iter().map(ContourSet::len).sum::<usize>(), gamma.len());
                // a winding loop on the 3-torus has only 3 segments
                let min_len = if kind.boundary() == Boundary::Plus { 4 } else { 3 };
                for part in &parts {
                    assert!(part.len() >= min_len && part.is_even(&g));
                }
            }
        }
    }

    #[test]
    fn standard_connection_breaks_reversible_association() {
        // opposite sides of a square around a site are only p-connected
        let g = plus(5);
        let gamma = extract_contour(&g, &flips(&g, &[(0, 0), (0, 2)]));
        let parts = decompose(&g, &gamma, Connectivity::Standard);
        assert!(!site_association_holds(&g, &gamma, &parts, KernelKind::ReversiblePlus));
    }

    #[test]
    fn periodic_class_sum_is_twice_length() {
        let g = torus(3);
        for s in SpinConfig::enumerate(9) {
            let gamma = extract_contour(&g, &s);
            assert_eq!(gamma.class_counts(&g, KernelKind::ReversiblePeriodic).weighted(), 2 * gamma.len());
            assert_eq!(gamma.class_counts(&g, KernelKind::IrreversiblePeriodic).weighted(), gamma.len());
        }
    }

    #[test]
    fn xi_single_flip() {
        let (j, d): (f64, f64) = (1.2, 0.03);
        let c = ClassCounts([4, 0, 0, 1]);
        let den = 1.0 + d * (-4.0 * j).exp();
        let expect = ((1.0 + d * (-2.0 * j).exp()) / den).powi(4) * ((1.0 + d * (4.0 * j).exp()) / den);
        let xi = xi_weight(&c, 1, j, d, KernelKind::ReversiblePlus).unwrap();
        assert!((xi - expect).abs() < 1e-14 * expect);
        let xi2 = xi_weight(&c, 2, j, d, KernelKind::ReversiblePlus).unwrap();
        assert!((xi2 - xi * xi).abs() < 1e-14 * xi2);
        let p = ModelParams::new(j, d).unwrap();
        assert!((log_xi_weight(&c, 1, &p, KernelKind::ReversiblePlus) - xi.ln()).abs() < 1e-14);
        assert_eq!(xi_weight(&c, 1, j, 0.0, KernelKind::ReversiblePlus).unwrap(), 1.0);
    }

    #[test]
    fn xi_irreversible_classes() {
        let (j, d): (f64, f64) = (0.7, 0.2);
        let den = 1.0 + d * (-4.0 * j).exp();
        let xi = xi_weight(&ClassCounts([1, 1, 0, 0]), 1, j, d, KernelKind::IrreversiblePeriodic).unwrap();
        let expect = (1.0 + d) / den * (1.0 + d * (4.0 * j).exp()) / den;
        assert!((xi - expect).abs() < 1e-14 * expect);
    }

    #[test]
    fn xi_domain() {
        let j = 0.5f64;
        let edge = -(4.0 * j).exp();
        assert!(xi_weight(&ClassCounts([1, 0, 0, 0]), 1, j, edge, KernelKind::ReversiblePlus).is_err());
        assert!(xi_weight(&ClassCounts([1, 0, 0, 0]), 1, j, 0.9 * edge, KernelKind::ReversiblePlus).is_ok());
    }

    #[test]
    fn activity_at_zero_delta() {
        let g = plus(3);
        let gamma = extract_contour(&g, &flips(&g, &[(1, 1)]));
        let rho = activity(&g, &gamma, 1, 2.0, 0.0, KernelKind::ReversiblePlus).unwrap();
        assert!((rho - (-16.0f64).exp()).abs() < 1e-22);
    }

    #[test]
    fn activities_respect_bound() {
        for kind in KernelKind::ALL {
            let g = Geometry::new(3, kind.boundary()).unwrap();
            let conn = Connectivity::for_kind(kind);
            for (j, d) in [(2.5, 1e-5), (1.0, 0.1), (0.3, 0.9)] {
                let a = activity_bound(j, d, kind);
                for s in SpinConfig::enumerate(9).step_by(7) {
                    for part in decompose(&g, &extract_contour(&g, &s), conn) {
                        for k in [1, 2] {
                            let rho = activity(&g, &part, k, j, d, kind).unwrap();
                            assert!(rho > 0.0 && rho <= a.powi(part.len() as i32) * (1.0 + 1e-12));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn bound_tightness_sample() {
        // ten single-component contours at J = 2.5, δ = 1e-5
        let g = plus(5);
        let (j, d) = (2.5, 1e-5);
        let a = activity_bound(j, d, KernelKind::ReversiblePlus);
        let samples: [&[(usize, usize)]; 10] = [
            &[(2, 2)],
            &[(2, 2), (2, 3)],
            &[(0, 0)],
            &[(1, 1), (2, 2)],
            &[(1, 1), (1, 2), (2, 1), (2, 2)],
            &[(0, 0), (0, 2)],
            &[(1, 1), (1, 2), (1, 3)],
            &[(4, 4), (3, 4)],
            &[(2, 0), (2, 1), (2, 2), (2, 3), (2, 4)],
            &[(1, 1), (3, 3), (2, 2)],
        ];
        for sites in samples {
            let gamma = extract_contour(&g, &flips(&g, sites));
            let parts = decompose(&g, &gamma, Connectivity::PConnected);
            assert_eq!(parts.len(), 1, "{sites:?}");
            let rho = activity(&g, &parts[0], 1, j, d, KernelKind::ReversiblePlus).unwrap();
            let ratio = rho / a.powi(gamma.len() as i32);
            assert!(ratio > 0.0 && ratio <= 1.0, "{sites:?}: {ratio}");
        }
    }

    #[test]
    fn partition_identity_small() {
        let p = ModelParams::new(2.5, 1e-3).unwrap();
        for kind in KernelKind::ALL {
            let sides: &[usize] = if kind.boundary() == Boundary::Plus { &[2, 3] } else { &[3] };
            for &l in sides {
                let g = Geometry::new(l, kind.boundary()).unwrap();
                for k in [1, 2] {
                    let r = contour_partition(&g, k, &p, kind).unwrap();
                    assert!(r.relative_residual <= 1e-10, "{r:?}");
                }
            }
        }
    }

    #[test]
    fn partition_at_zero_delta_is_gibbs_sum() {
        let g = plus(3);
        let p = ModelParams::new(0.8, 0.0).unwrap();
        let r = contour_partition(&g, 1, &p, KernelKind::ReversiblePlus).unwrap();
        let z: f64 = SpinConfig::enumerate(9)
            .map(|s| (-energy_single(&g, &p, &s)).exp())
            .sum();
        let expect = z * (-0.8 * g.bond_count() as f64).exp();
        assert!((r.xi_contour - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn partition_matches_delta_functional() {
        // Δ = π(f^2)/π(f)^2 - 1 rebuilt from the two contour sums
        let p = ModelParams::new(2.5, 1e-3).unwrap();
        for kind in KernelKind::ALL {
            let g = Geometry::new(3, kind.boundary()).unwrap();
            let r1 = contour_partition(&g, 1, &p, kind).unwrap();
            let r2 = contour_partition(&g, 2, &p, kind).unwrap();
            let z0 = contour_partition(&g, 1, &p.with_delta(0.0).unwrap(), kind).unwrap();
            let delta_from_contours = r2.xi_contour * z0.xi_contour / (r1.xi_contour * r1.xi_contour) - 1.0;
            let d = FMoments::new(&g, &p, kind).unwrap().delta_functional();
            assert!((delta_from_contours - d).abs() <= 1e-6 * d, "{kind}: {delta_from_contours} vs {d}");
        }
    }

    #[test]
    fn kp_examples() {
        let r = kp_check(2.5, 1e-5, KernelKind::ReversiblePlus);
        let ratio: f64 = (1.0 + 1e-5 * 10f64.exp()) / (1.0 - 1e-5 * (-10f64).exp());
        let expect = (-5f64).exp() * ratio.powi(4);
        assert!((r.activity_bound - expect).abs() < 1e-15);
        assert!(r.satisfied && r.series_condition);
        assert!(!kp_check(1.0, 0.0, KernelKind::ReversiblePlus).radius_window);
        let edge = kp_check(1.0, 4f64.exp(), KernelKind::ReversiblePlus);
        assert!(edge.activity_bound.is_infinite() && !edge.satisfied && !edge.series_condition);
    }

    #[test]
    fn radius_threshold_value() {
        let j = radius_threshold_coupling();
        assert!((j - 2.0172).abs() < 1e-3, "{j}");
        assert!(!radius_window(j - 1e-6, 0.0) && radius_window(j + 1e-6, 0.0));
    }

    #[test]
    fn radius_window_implies_kp() {
        for kind in [KernelKind::ReversiblePlus, KernelKind::IrreversiblePeriodic] {
            for j in [2.02f64, 2.5, 3.0, 4.0] {
                let d = (-4.0 * j).exp() / 12.0 * 0.999;
                assert!(radius_window(j, d));
                assert!(kp_check(j, d, kind).satisfied, "{kind} {j}");
            }
        }
    }

    #[test]
    fn truncated_sum_brackets_series() {
        let r = kp_check(2.5, 1e-5, KernelKind::ReversiblePlus);
        assert!(r.truncated_sum <= r.series_value);
        assert!((r.truncated_sum + r.tail_bound - r.series_value).abs() <= 1e-15);
    }

    #[test]
    fn dump_fields() {
        let g = plus(5);
        let d = dump_contour(&g, KernelKind::ReversiblePlus, &flips(&g, &[(0, 0), (0, 2)])).unwrap();
        assert_eq!(d.segments.len(), 8);
        assert_eq!(d.p_classes.len(), 1);
        assert_eq!(d.standard_classes.len(), 2);
        assert_eq!(d.p_components.iter().max(), Some(&0));
        assert_eq!(d.standard_components.iter().max(), Some(&1));
    }

    proptest! {
        #[test]
        fn satisfied_implies_threshold(j in 0.0f64..6.0, d in -1.0f64..1.0) {
            for kind in KernelKind::ALL {
                let r = kp_check(j, d, kind);
                if r.satisfied {
                    prop_assert!(r.activity_bound < r.threshold);
                    prop_assert!(r.series_condition);
                }
            }
        }

        #[test]
        fn contour_invariants_l4(idx in 0u64..(1 << 16)) {
            for b in [Boundary::Plus, Boundary::Periodic] {
                let g = Geometry::new(4, b).unwrap();
                let s = SpinConfig::from_index(idx, 16);
                let gamma = extract_contour(&g, &s);
                prop_assert!(gamma.is_even(&g));
                prop_assert_eq!(energy_contour_identity(&g, &s), 0);
                let kind = KernelKind::reversible_for(b);
                let parts = decompose(&g, &gamma, Connectivity::PConnected);
                prop_assert!(site_association_holds(&g, &gamma, &parts, kind));
                for part in &parts {
                    prop_assert!(part.len() >= 4);
                }
                for part in decompose(&g, &gamma, Connectivity::Standard) {
                    prop_assert!(part.len() >= 4 && part.len() % 2 == 0);
                }
            }
        }
    }
}

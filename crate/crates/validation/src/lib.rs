//! Oracles for checking `ising-pca` that share no code with it beyond the
//! basic types: neighbours come from coordinates, `f` from its product
//! definition, kernels from brute-force sums of `exp(-H(σ,τ))`.

use ising_pca::hamiltonian::energy_pair;
use ising_pca::{Boundary, Geometry, KernelKind, ModelParams, SpinConfig};

/// Neighbour spin in direction (dr, dc); external spins are +1.
pub fn nb(l: usize, bc: Boundary, s: &[i8], r: usize, c: usize, dr: i64, dc: i64) -> i8 {
    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
    let li = l as i64;
    match bc {
        Boundary::Periodic => s[(nr.rem_euclid(li) * li + nc.rem_euclid(li)) as usize],
        Boundary::Plus => {
            if (0..li).contains(&nr) && (0..li).contains(&nc) {
                s[(nr * li + nc) as usize]
            } else {
                1
            }
        }
    }
}

pub const UP: (i64, i64) = (-1, 0);
pub const RIGHT: (i64, i64) = (0, 1);
pub const DOWN: (i64, i64) = (1, 0);
pub const LEFT: (i64, i64) = (0, -1);

/// `Σ_{<ij>} σ_i σ_j`, each bond once; plus adds the contacts on the top and left edges.
pub fn bond_sum_oracle(l: usize, bc: Boundary, s: &[i8]) -> i64 {
    let mut total = 0i64;
    for r in 0..l {
        for c in 0..l {
            let si = s[r * l + c] as i64;
            total += si * nb(l, bc, s, r, c, DOWN.0, DOWN.1) as i64;
            total += si * nb(l, bc, s, r, c, RIGHT.0, RIGHT.1) as i64;
            if bc == Boundary::Plus {
                if r == 0 {
                    total += si;
                }
                if c == 0 {
                    total += si;
                }
            }
        }
    }
    total
}

/// `f(σ) = Π_i (1 + δ exp(-2 h_i σ_i))`.
pub fn f_oracle(l: usize, bc: Boundary, kind: KernelKind, s: &[i8], j: f64, delta: f64) -> f64 {
    let mut f = 1.0;
    for r in 0..l {
        for c in 0..l {
            let si = s[r * l + c] as f64;
            let h = if kind.is_reversible() {
                0.5 * j
                    * [UP, RIGHT, DOWN, LEFT]
                        .iter()
                        .map(|d| nb(l, bc, s, r, c, d.0, d.1) as f64)
                        .sum::<f64>()
            } else {
                j * (nb(l, bc, s, r, c, DOWN.0, DOWN.1) + nb(l, bc, s, r, c, LEFT.0, LEFT.1)) as f64
            };
            f *= 1.0 + delta * (-2.0 * h * si).exp();
        }
    }
    f
}

pub fn configs(n: usize) -> Vec<SpinConfig> {
    SpinConfig::enumerate(n).collect()
}

/// Row-stochastic kernel `exp(-H(σ,τ)) / Σ_τ' exp(-H(σ,τ'))` and the row sums.
pub fn brute_kernel(g: &Geometry, p: &ModelParams, kind: KernelKind) -> (Vec<Vec<f64>>, Vec<f64>) {
    let all = configs(g.site_count());
    let mut rows = Vec::with_capacity(all.len());
    let mut z = Vec::with_capacity(all.len());
    for s in &all {
        let w: Vec<f64> = all
            .iter()
            .map(|t| (-energy_pair(g, p, kind, s, t).unwrap()).exp())
            .collect();
        let total: f64 = w.iter().sum();
        rows.push(w.iter().map(|x| x / total).collect());
        z.push(total);
    }
    (rows, z)
}

pub fn geometries(kind: KernelKind, sides: &[usize]) -> Vec<Geometry> {
    sides
        .iter()
        .filter_map(|&l| Geometry::new(l, kind.boundary()).ok())
        .collect()
}

pub fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

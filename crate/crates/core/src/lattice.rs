//! Square-lattice geometry for an `L x L` box with plus or periodic
//! boundary conditions, together with the dual-lattice indexing used by the
//! contour machinery.
//!
//! Sites are indexed row-major, `index = row * L + col`, and the direction
//! convention is `Up = row - 1`, `Right = col + 1`, `Down = row + 1`,
//! `Left = col - 1`.
//!
//! Bond sets:
//! * periodic: the nearest-neighbour bonds of the discrete torus, `2 L^2` of them;
//! * plus: the bonds of the enlarged box `Λ ∪ ∂ext Λ` with at least one endpoint
//!   in `Λ`, i.e. `2 L (L - 1)` in-lattice bonds plus `4 L` contacts with the
//!   external `+1` spins. Bonds joining two external sites are excluded; they
//!   would only add a configuration-independent constant to the energy.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported side; the per-site tables of an `8192^2` box already
/// take several gigabytes.
pub const MAX_SIDE: usize = 8192;

/// Boundary condition of the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Plus,
    Periodic,
}

impl Boundary {
    /// Smallest admissible side length.
    pub fn min_side(self) -> usize {
        match self {
            Boundary::Plus => 2,
            // for L = 2 the wrap bond coincides with the ordinary bond
            Boundary::Periodic => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::Plus => "plus",
            Boundary::Periodic => "periodic",
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plus" | "+" => Ok(Boundary::Plus),
            "periodic" | "per" => Ok(Boundary::Periodic),
            other => Err(Error::Parse(format!("unknown boundary condition `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Right,
    Down,
    Left,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Up,
        Direction::Right,
        Direction::Down,
        Direction::Left,
    ];

    fn offset(self) -> (i64, i64) {
        match self {
            Direction::Up => (-1, 0),
            Direction::Right => (0, 1),
            Direction::Down => (1, 0),
            Direction::Left => (0, -1),
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Right => Direction::Left,
            Direction::Down => Direction::Up,
            Direction::Left => Direction::Right,
        }
    }
}

/// What sits on the other side of a bond: a lattice site or a frozen
/// external `+1` spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Neighbor {
    Site(usize),
    External,
}

impl Neighbor {
    pub fn site(self) -> Option<usize> {
        match self {
            Neighbor::Site(j) => Some(j),
            Neighbor::External => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// joins `(row, col)` and `(row, col + 1)`
    Horizontal,
    /// joins `(row, col)` and `(row + 1, col)`
    Vertical,
}

/// A primal nearest-neighbour bond in canonical form: `(row, col)` is the
/// upper/left endpoint. For plus boundary conditions coordinates may be `-1`
/// (external row/column); for periodic geometry they are reduced mod `L`, so
/// the partner of `(row, L - 1)` horizontally is `(row, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bond {
    pub row: i32,
    pub col: i32,
    pub orientation: Orientation,
}

/// Unit segment of the dual lattice crossing a primal bond.
///
/// Midpoints are stored in doubled coordinates so they stay integral: a
/// horizontal bond `(r, c)-(r, c+1)` has a vertical dual segment with midpoint
/// `(r, c + 1/2)`, stored as `(2r, 2c + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DualEdge {
    pub bond: Bond,
    pub mid2: (i32, i32),
}

impl DualEdge {
    pub fn midpoint(&self) -> (f64, f64) {
        (self.mid2.0 as f64 / 2.0, self.mid2.1 as f64 / 2.0)
    }

    /// Orientation of the dual segment itself (perpendicular to the bond).
    pub fn segment_orientation(&self) -> Orientation {
        match self.bond.orientation {
            Orientation::Horizontal => Orientation::Vertical,
            Orientation::Vertical => Orientation::Horizontal,
        }
    }
}

/// Immutable lattice description shared by every other module.
#[derive(Debug, Clone)]
pub struct Geometry {
    side: usize,
    boundary: Boundary,
    neighbors: Vec<[Neighbor; 4]>,
    external_contacts: Vec<u8>,
    bonds: Vec<Bond>,
    bond_lookup: HashMap<Bond, usize>,
    site_bonds: Vec<[usize; 4]>,
    bond_ends: Vec<[Neighbor; 2]>,
    dual_ends: Vec<[usize; 2]>,
    dual_vertex_count: usize,
}

impl Geometry {
    pub fn new(side: usize, boundary: Boundary) -> Result<Self> {
        if side > MAX_SIDE {
            return Err(Error::SideTooLarge {
                side,
                max: MAX_SIDE,
            });
        }
        if side < boundary.min_side() {
            return Err(Error::InvalidSide {
                side,
                boundary,
                min: boundary.min_side(),
            });
        }
        let n = side * side;
        let l = side as i64;

        let mut neighbors = Vec::with_capacity(n);
        let mut external_contacts = Vec::with_capacity(n);
        for r in 0..l {
            for c in 0..l {
                let mut row = [Neighbor::External; 4];
                let mut ext = 0u8;
                for (k, d) in Direction::ALL.iter().enumerate() {
                    let (dr, dc) = d.offset();
                    let (nr, nc) = (r + dr, c + dc);
                    row[k] = match boundary {
                        Boundary::Periodic => {
                            let (wr, wc) = (nr.rem_euclid(l), nc.rem_euclid(l));
                            Neighbor::Site((wr * l + wc) as usize)
                        }
                        Boundary::Plus => {
                            if (0..l).contains(&nr) && (0..l).contains(&nc) {
                                Neighbor::Site((nr * l + nc) as usize)
                            } else {
                                ext += 1;
                                Neighbor::External
                            }
                        }
                    };
                }
                neighbors.push(row);
                external_contacts.push(ext);
            }
        }

        let mut bonds = Vec::new();
        match boundary {
            Boundary::Periodic => {
                for r in 0..l {
                    for c in 0..l {
                        for orientation in [Orientation::Horizontal, Orientation::Vertical] {
                            bonds.push(Bond {
                                row: r as i32,
                                col: c as i32,
                                orientation,
                            });
                        }
                    }
                }
            }
            Boundary::Plus => {
                for r in 0..l {
                    for c in -1..l {
                        bonds.push(Bond {
                            row: r as i32,
                            col: c as i32,
                            orientation: Orientation::Horizontal,
                        });
                    }
                }
                for r in -1..l {
                    for c in 0..l {
                        bonds.push(Bond {
                            row: r as i32,
                            col: c as i32,
                            orientation: Orientation::Vertical,
                        });
                    }
                }
                bonds.sort();
            }
        }
        let bond_lookup: HashMap<Bond, usize> =
            bonds.iter().enumerate().map(|(k, b)| (*b, k)).collect();

        let mut geometry = Geometry {
            side,
            boundary,
            neighbors,
            external_contacts,
            bonds,
            bond_lookup,
            site_bonds: Vec::with_capacity(n),
            bond_ends: Vec::new(),
            dual_ends: Vec::new(),
            dual_vertex_count: match boundary {
                Boundary::Plus => (side + 1) * (side + 1),
                Boundary::Periodic => n,
            },
        };

        for i in 0..n {
            let mut row = [0usize; 4];
            for (k, d) in Direction::ALL.iter().enumerate() {
                let b = geometry.bond_towards(i, *d);
                row[k] = geometry.bond_lookup[&b];
            }
            geometry.site_bonds.push(row);
        }
        geometry.bond_ends = geometry
            .bonds
            .iter()
            .map(|b| geometry.endpoints_of(b))
            .collect();
        geometry.dual_ends = geometry
            .bonds
            .iter()
            .map(|b| geometry.dual_endpoints_of(b))
            .collect();
        Ok(geometry)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// `|Λ| = L^2`.
    pub fn site_count(&self) -> usize {
        self.side * self.side
    }

    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i / self.side, i % self.side)
    }

    pub fn site_at(&self, row: usize, col: usize) -> usize {
        row * self.side + col
    }

    /// Neighbours in the order up, right, down, left.
    pub fn neighbors(&self, i: usize) -> [(Neighbor, Direction); 4] {
        let row = &self.neighbors[i];
        [
            (row[0], Direction::Up),
            (row[1], Direction::Right),
            (row[2], Direction::Down),
            (row[3], Direction::Left),
        ]
    }

    pub fn neighbor(&self, i: usize, d: Direction) -> Neighbor {
        self.neighbors[i][d as usize]
    }

    pub(crate) fn neighbor_table(&self) -> &[[Neighbor; 4]] {
        &self.neighbors
    }

    /// Number of frozen external spins adjacent to `i` (always 0 for periodic).
    pub fn external_contacts(&self, i: usize) -> u8 {
        self.external_contacts[i]
    }

    /// All bonds carrying an interaction term: `B^per` or `B^+`.
    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    /// Bonds with both endpoints inside `Λ` (`|B_Λ|`; equal to `bond_count` for periodic).
    pub fn in_lattice_bond_count(&self) -> usize {
        self.bond_ends
            .iter()
            .filter(|[a, b]| a.site().is_some() && b.site().is_some())
            .count()
    }

    pub fn bond_index(&self, bond: &Bond) -> Option<usize> {
        self.bond_lookup.get(bond).copied()
    }

    pub fn bond_endpoints(&self, k: usize) -> [Neighbor; 2] {
        self.bond_ends[k]
    }

    /// Index of the bond leaving `i` in direction `d`.
    pub fn site_bond(&self, i: usize, d: Direction) -> usize {
        self.site_bonds[i][d as usize]
    }

    pub fn site_bonds(&self, i: usize) -> [usize; 4] {
        self.site_bonds[i]
    }

    pub fn dual_vertex_count(&self) -> usize {
        self.dual_vertex_count
    }

    /// The two dual vertices bounding the dual segment of bond `k`.
    pub fn dual_endpoints(&self, k: usize) -> [usize; 2] {
        self.dual_ends[k]
    }

    pub fn dual_edge(&self, bond: &Bond) -> Result<DualEdge> {
        if !self.bond_lookup.contains_key(bond) {
            return Err(Error::UnknownBond(*bond));
        }
        let (r, c) = (bond.row, bond.col);
        let mid2 = match bond.orientation {
            Orientation::Horizontal => (2 * r, 2 * c + 1),
            Orientation::Vertical => (2 * r + 1, 2 * c),
        };
        Ok(DualEdge { bond: *bond, mid2 })
    }

    pub fn dual_edge_of(&self, k: usize) -> DualEdge {
        self.dual_edge(&self.bonds[k])
            .expect("bond table is consistent with lookup")
    }

    /// Inverse of [`Geometry::dual_edge`], from a doubled midpoint.
    pub fn bond_from_midpoint(&self, mid2: (i32, i32)) -> Result<Bond> {
        let (a, b) = mid2;
        let bond = match (a.rem_euclid(2), b.rem_euclid(2)) {
            (0, 1) => Bond {
                row: a / 2,
                col: (b - 1) / 2,
                orientation: Orientation::Horizontal,
            },
            (1, 0) => Bond {
                row: (a - 1) / 2,
                col: b / 2,
                orientation: Orientation::Vertical,
            },
            _ => {
                return Err(Error::Domain(format!(
                    "doubled midpoint {mid2:?} is not the centre of a dual segment"
                )))
            }
        };
        if self.bond_lookup.contains_key(&bond) {
            Ok(bond)
        } else {
            Err(Error::UnknownBond(bond))
        }
    }

    fn bond_towards(&self, i: usize, d: Direction) -> Bond {
        let (r, c) = self.coords(i);
        let (r, c) = (r as i32, c as i32);
        let l = self.side as i32;
        let wrap = |x: i32| match self.boundary {
            Boundary::Periodic => x.rem_euclid(l),
            Boundary::Plus => x,
        };
        match d {
            Direction::Right => Bond {
                row: r,
                col: c,
                orientation: Orientation::Horizontal,
            },
            Direction::Left => Bond {
                row: r,
                col: wrap(c - 1),
                orientation: Orientation::Horizontal,
            },
            Direction::Down => Bond {
                row: r,
                col: c,
                orientation: Orientation::Vertical,
            },
            Direction::Up => Bond {
                row: wrap(r - 1),
                col: c,
                orientation: Orientation::Vertical,
            },
        }
    }

    fn site_or_external(&self, r: i32, c: i32) -> Neighbor {
        let l = self.side as i32;
        match self.boundary {
            Boundary::Periodic => {
                Neighbor::Site((r.rem_euclid(l) * l + c.rem_euclid(l)) as usize)
            }
            Boundary::Plus => {
                if (0..l).contains(&r) && (0..l).contains(&c) {
                    Neighbor::Site((r * l + c) as usize)
                } else {
                    Neighbor::External
                }
            }
        }
    }

    fn endpoints_of(&self, b: &Bond) -> [Neighbor; 2] {
        let other = match b.orientation {
            Orientation::Horizontal => (b.row, b.col + 1),
            Orientation::Vertical => (b.row + 1, b.col),
        };
        [
            self.site_or_external(b.row, b.col),
            self.site_or_external(other.0, other.1),
        ]
    }

    // Dual vertex (a, b) sits at (a + 1/2, b + 1/2).
    fn dual_vertex(&self, a: i32, b: i32) -> usize {
        let l = self.side as i32;
        match self.boundary {
            Boundary::Plus => ((a + 1) * (l + 1) + (b + 1)) as usize,
            Boundary::Periodic => (a.rem_euclid(l) * l + b.rem_euclid(l)) as usize,
        }
    }

    fn dual_endpoints_of(&self, b: &Bond) -> [usize; 2] {
        let (r, c) = (b.row, b.col);
        match b.orientation {
            Orientation::Horizontal => [self.dual_vertex(r - 1, c), self.dual_vertex(r, c)],
            Orientation::Vertical => [self.dual_vertex(r, c - 1), self.dual_vertex(r, c)],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_three_has_eighteen_bonds() {
        let g = Geometry::new(3, Boundary::Periodic).unwrap();
        assert_eq!(g.site_count(), 9);
        assert_eq!(g.bond_count(), 18);
        assert_eq!(g.in_lattice_bond_count(), 18);
    }

    #[test]
    fn plus_contact_counts() {
        let g = Geometry::new(3, Boundary::Plus).unwrap();
        let mut hist = [0usize; 3];
        for i in 0..9 {
            hist[g.external_contacts(i) as usize] += 1;
        }
        assert_eq!(hist, [1, 4, 4]);
        assert_eq!(g.in_lattice_bond_count(), 12);
        assert_eq!(g.bond_count(), 12 + 12);
    }

    #[test]
    fn rejects_degenerate_sides() {
        assert!(matches!(
            Geometry::new(2, Boundary::Periodic),
            Err(Error::InvalidSide { .. })
        ));
        assert!(Geometry::new(1, Boundary::Plus).is_err());
        assert!(Geometry::new(2, Boundary::Plus).is_ok());
        assert!(matches!(
            Geometry::new(1 << 20, Boundary::Plus),
            Err(Error::SideTooLarge { .. })
        ));
    }

    #[test]
    fn periodic_corner_wraps() {
        let g = Geometry::new(3, Boundary::Periodic).unwrap();
        let n = g.neighbors(g.site_at(0, 0));
        assert_eq!(n[0], (Neighbor::Site(g.site_at(2, 0)), Direction::Up));
        assert_eq!(n[1], (Neighbor::Site(g.site_at(0, 1)), Direction::Right));
        assert_eq!(n[2], (Neighbor::Site(g.site_at(1, 0)), Direction::Down));
        assert_eq!(n[3], (Neighbor::Site(g.site_at(0, 2)), Direction::Left));
    }

    #[test]
    fn plus_corner_and_centre() {
        let g = Geometry::new(3, Boundary::Plus).unwrap();
        let corner = g.neighbors(0);
        let ext = corner.iter().filter(|(n, _)| *n == Neighbor::External).count();
        assert_eq!(ext, 2);
        let centre = g.neighbors(g.site_at(1, 1));
        assert!(centre.iter().all(|(n, _)| n.site().is_some()));
    }

    #[test]
    fn dual_edge_geometry() {
        let g = Geometry::new(4, Boundary::Plus).unwrap();
        let h = Bond { row: 1, col: 2, orientation: Orientation::Horizontal };
        let d = g.dual_edge(&h).unwrap();
        assert_eq!(d.midpoint(), (1.0, 2.5));
        assert_eq!(d.segment_orientation(), Orientation::Vertical);
        let v = Bond { row: 1, col: 2, orientation: Orientation::Vertical };
        let d = g.dual_edge(&v).unwrap();
        assert_eq!(d.midpoint(), (1.5, 2.0));
        assert_eq!(d.segment_orientation(), Orientation::Horizontal);

        let bogus = Bond { row: 7, col: 0, orientation: Orientation::Vertical };
        assert!(matches!(g.dual_edge(&bogus), Err(Error::UnknownBond(_))));
    }

    #[test]
    fn periodic_seam_midpoint_stays_in_box() {
        let g = Geometry::new(3, Boundary::Periodic).unwrap();
        let seam = g.site_bond(g.site_at(1, 0), Direction::Left);
        let d = g.dual_edge_of(seam);
        assert_eq!(d.midpoint(), (1.0, 2.5));
        let up = g.site_bond(g.site_at(0, 1), Direction::Up);
        assert_eq!(g.dual_edge_of(up).midpoint(), (2.5, 1.0));
    }

    #[test]
    fn dual_roundtrip_and_neighbor_symmetry() {
        for side in 2..=6 {
            for bc in [Boundary::Plus, Boundary::Periodic] {
                let Ok(g) = Geometry::new(side, bc) else {
                    continue;
                };
                let l = side;
                let expected = match bc {
                    Boundary::Plus => 2 * l * (l - 1) + 4 * l,
                    Boundary::Periodic => 2 * l * l,
                };
                assert_eq!(g.bond_count(), expected);
                if bc == Boundary::Plus {
                    assert_eq!(g.in_lattice_bond_count(), 2 * l * (l - 1));
                }
                let mut seen = std::collections::HashSet::new();
                for (k, b) in g.bonds().iter().enumerate() {
                    let d = g.dual_edge(b).unwrap();
                    assert!(seen.insert(d.mid2), "midpoint collision at {d:?}");
                    assert_eq!(g.bond_from_midpoint(d.mid2).unwrap(), *b);
                    assert_eq!(g.bond_index(b), Some(k));
                }
                for i in 0..g.site_count() {
                    for (n, d) in g.neighbors(i) {
                        if let Neighbor::Site(j) = n {
                            assert_eq!(g.neighbor(j, d.opposite()), Neighbor::Site(i));
                            assert_eq!(g.site_bond(i, d), g.site_bond(j, d.opposite()));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn dual_vertices_have_degree_four_in_full_edge_set() {
        let g = Geometry::new(3, Boundary::Periodic).unwrap();
        let mut deg = vec![0; g.dual_vertex_count()];
        for k in 0..g.bond_count() {
            for v in g.dual_endpoints(k) {
                deg[v] += 1;
            }
        }
        assert!(deg.iter().all(|&d| d == 4));

        let g = Geometry::new(3, Boundary::Plus).unwrap();
        let mut deg = vec![0; g.dual_vertex_count()];
        for k in 0..g.bond_count() {
            for v in g.dual_endpoints(k) {
                deg[v] += 1;
            }
        }
        // corners of the (L+1)x(L+1) dual grid have degree 2, edges 3, interior 4
        assert_eq!(deg.iter().filter(|&&d| d == 2).count(), 4);
        assert_eq!(deg.iter().filter(|&&d| d == 3).count(), 8);
        assert_eq!(deg.iter().filter(|&&d| d == 4).count(), 4);
    }
}

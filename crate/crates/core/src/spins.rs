use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest configuration space we are willing to enumerate exactly.
pub const MAX_ENUMERATION_SITES: usize = 16;

/// A spin assignment `Λ -> {-1, +1}` stored row-major.
///
/// The canonical index of a configuration reads bit `k` as site `k`, with a
/// set bit meaning `-1`; index 0 is therefore the all-plus configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinConfig {
    spins: Vec<i8>,
}

impl SpinConfig {
    pub fn all_plus(n: usize) -> Self {
        SpinConfig { spins: vec![1; n] }
    }

    pub fn all_minus(n: usize) -> Self {
        SpinConfig { spins: vec![-1; n] }
    }

    pub fn from_spins(spins: Vec<i8>) -> Result<Self> {
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::Domain(format!("spin value {bad} is not +1 or -1")));
        }
        Ok(SpinConfig { spins })
    }

    pub fn from_index(index: u64, n: usize) -> Self {
        debug_assert!(n <= 64);
        let spins = (0..n)
            .map(|k| if (index >> k) & 1 == 1 { -1 } else { 1 })
            .collect();
        SpinConfig { spins }
    }

    pub fn index(&self) -> u64 {
        self.spins
            .iter()
            .enumerate()
            .filter(|(_, &s)| s < 0)
            .fold(0u64, |acc, (k, _)| acc | (1 << k))
    }

    /// Every configuration on `n` sites in canonical order.
    pub fn enumerate(n: usize) -> impl Iterator<Item = SpinConfig> {
        (0..1u64 << n).map(move |k| SpinConfig::from_index(k, n))
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn get(&self, i: usize) -> i8 {
        self.spins[i]
    }

    pub fn set(&mut self, i: usize, s: i8) {
        assert!(s == 1 || s == -1, "spin must be +1 or -1");
        self.spins[i] = s;
    }

    pub fn flip(&mut self, i: usize) {
        self.spins[i] = -self.spins[i];
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.flip(i);
        out
    }

    pub fn negated(&self) -> Self {
        SpinConfig {
            spins: self.spins.iter().map(|s| -s).collect(),
        }
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.spins
    }

    pub fn as_mut_slice(&mut self) -> &mut [i8] {
        &mut self.spins
    }

    pub fn magnetization(&self) -> f64 {
        let total: i64 = self.spins.iter().map(|&s| s as i64).sum();
        total as f64 / self.spins.len() as f64
    }

    /// Sites where `self` and `other` differ.
    pub fn disagreements(&self, other: &SpinConfig) -> usize {
        self.spins
            .iter()
            .zip(&other.spins)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Parses a square grid of `+`/`-` characters. Rows are separated by
    /// newlines or `/`; blank rows and surrounding whitespace are ignored.
    /// Returns the side length with the configuration.
    pub fn parse_grid(text: &str) -> Result<(usize, SpinConfig)> {
        let rows: Vec<&str> = text
            .split(['\n', '/'])
            .map(str::trim)
            .filter(|r| !r.is_empty())
            .collect();
        let side = rows.len();
        if side == 0 {
            return Err(Error::Parse("empty spin grid".into()));
        }
        let mut spins = Vec::with_capacity(side * side);
        for (r, row) in rows.iter().enumerate() {
            let before = spins.len();
            for ch in row.chars() {
                match ch {
                    '+' => spins.push(1),
                    '-' => spins.push(-1),
                    c if c.is_whitespace() => {}
                    c => {
                        return Err(Error::Parse(format!(
                            "unexpected character {c:?} in row {r}"
                        )))
                    }
                }
            }
            let width = spins.len() - before;
            if width != side {
                return Err(Error::Parse(format!(
                    "row {r} has {width} spins, expected {side} for a square grid"
                )));
            }
        }
        Ok((side, SpinConfig { spins }))
    }

    /// Renders the configuration as `/`-separated rows of side `side`.
    pub fn to_grid(&self, side: usize) -> String {
        self.spins
            .chunks(side)
            .map(|row| row.iter().map(|&s| if s > 0 { '+' } else { '-' }).collect::<String>())
            .collect::<Vec<_>>()
            .join("/")
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = (self.spins.len() as f64).sqrt().round() as usize;
        if side * side == self.spins.len() && side > 0 {
            f.write_str(&self.to_grid(side))
        } else {
            f.write_str(&self.to_grid(self.spins.len().max(1)))
        }
    }
}

impl FromStr for SpinConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SpinConfig::parse_grid(s).map(|(_, c)| c)
    }
}

//! Harness bodies shared by the cargo-fuzz targets and the corpus replay
//! tests. Each takes raw bytes, must never panic on malformed input, and
//! asserts the round-trip properties of whatever parses.

use std::str::FromStr;

use ising_pca::{Boundary, KernelKind, SpinConfig};

use crate::config::{Grid, KindArg, RunConfig, Sampler};

pub fn config_json(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = RunConfig::from_json(text) else { return };
    let again = serde_json::to_string(&cfg).expect("a parsed config serialises");
    assert_eq!(RunConfig::from_json(&again).expect("serialised config parses"), cfg);
    let _ = cfg.kernels();
    let _ = cfg.kernel();
    let _ = cfg.params(1.0, 0.1);
}

pub fn spin_grid(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok((side, sigma)) = SpinConfig::parse_grid(text) else { return };
    assert_eq!(sigma.len(), side * side);
    let (side2, again) = SpinConfig::parse_grid(&sigma.to_grid(side)).expect("rendered grid parses");
    assert_eq!((side2, &again), (side, &sigma));
}

pub fn enum_parsing(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(k) = KernelKind::from_str(text) {
        assert_eq!(KernelKind::from_str(k.as_str()).unwrap(), k);
    }
    if let Ok(b) = Boundary::from_str(text) {
        assert_eq!(Boundary::from_str(b.as_str()).unwrap(), b);
    }
    if let Ok(k) = KindArg::from_str(text) {
        assert_eq!(KindArg::from_str(&k.to_string()).unwrap(), k);
    }
    let _ = Sampler::from_str(text);
    if let Ok(g) = Grid::from_str(text) {
        if let Ok(v) = g.values() {
            assert!(!v.is_empty() && v.iter().all(|x| x.is_finite()));
        }
    }
}

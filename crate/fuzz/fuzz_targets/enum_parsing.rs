#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| ising_pca_cli::fuzzing::enum_parsing(data));

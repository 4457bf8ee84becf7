//! Shared fixtures for the benchmarks.

use qsw_core::{
    assemble_generator, DensityMatrix, DrainConfig, Generator, MixingParams, NetworkSpec,
    RMatrix, SourceConfig,
};
use qsw_core::network::symmetric_trimer;

/// Generator of the V-shaped trimer with source rate 0.5 and unit drain rate.
pub fn trimer(alpha: f64, lambda: f64, phase: Option<f64>) -> Generator {
    let (spec, src, drain) = symmetric_trimer(0.5, 1.0);
    let src = match phase {
        Some(p) => src.with_correlation(p),
        None => src,
    };
    let mix = MixingParams::new(alpha, lambda).expect("valid mixing");
    assemble_generator(&spec, &src, &drain, &mix).expect("valid trimer")
}

/// Linear chain of `n` degenerate nodes, fed at node 1 and drained at node `n`.
pub fn chain(n: usize, alpha: f64, lambda: f64) -> Generator {
    let mut v = RMatrix::zeros(n, n);
    for i in 0..n - 1 {
        v[(i, i + 1)] = 1.0;
        v[(i + 1, i)] = 1.0;
    }
    let spec = NetworkSpec::new(vec![1.0; n], v, 1.0).expect("valid chain");
    let src = SourceConfig::independent(vec![1], 0.5);
    let drain = DrainConfig { target: n, rate: 1.0 };
    let mix = MixingParams::new(alpha, lambda).expect("valid mixing");
    assemble_generator(&spec, &src, &drain, &mix).expect("valid chain")
}

pub fn initial(n_nodes: usize) -> DensityMatrix {
    DensityMatrix::source_initial(n_nodes)
}

//! Fixtures shared by the benchmarks under `benches/`.

use nlsusy_core::{AnalyticSolutionFamily, Grid1D, SusyPair};

/// The unit catalog pair on `[-10, 10]` with `n` points.
pub fn catalog_pair(n: usize) -> SusyPair {
    let grid = Grid1D::new(-10.0, 10.0, n).expect("valid grid");
    AnalyticSolutionFamily::new(1.0).and_then(|f| f.pair(grid)).expect("catalog pair")
}

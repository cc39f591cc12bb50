//! Shared inputs for the criterion benchmarks.

use oldroyd2d::initial_data::small_family;
use oldroyd2d::{FlowState, Grid};

/// Smooth small-data state on an `n x n` grid of side `2 pi`.
pub fn bench_state(n: usize) -> FlowState {
    let grid = Grid::new(n, 2.0 * std::f64::consts::PI).expect("valid grid");
    small_family(grid, 0.01, 7).expect("non-degenerate template")
}

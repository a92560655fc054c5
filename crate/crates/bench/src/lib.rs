//! Shared input builders for the criterion benchmarks: deterministic
//! pseudo-random grid functions that exercise the same shapes the library
//! sees in practice (positive weights, sparse monotone steps).

use std::sync::Arc;

use cesaro_core::{Grid, GridFn, XReal, ZERO};

/// Multiplicative hash onto (0, 1); deterministic and dependency-free.
fn unit(i: usize, salt: u64) -> f64 {
    let mut x = (i as u64).wrapping_add(salt).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x ^= x >> 31;
    x = x.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    x ^= x >> 29;
    (x >> 11) as f64 / (1u64 << 53) as f64
}

pub fn log_grid(n: usize) -> Arc<Grid> {
    Grid::log_uniform(1e-4, 1e4, n).unwrap()
}

/// Positive step weight with values spread over two decades.
pub fn positive_step(grid: &Arc<Grid>, salt: u64) -> GridFn {
    let vals = (0..grid.len())
        .map(|i| XReal::nn(10f64.powf(2.0 * unit(i, salt) - 1.0)))
        .collect();
    GridFn::step(Arc::clone(grid), vals).unwrap()
}

/// Nonnegative step with a third of the cells zeroed.
pub fn sparse_step(grid: &Arc<Grid>, salt: u64) -> GridFn {
    let vals = (0..grid.len())
        .map(|i| {
            let u = unit(i, salt);
            if u < 0.33 {
                ZERO
            } else {
                XReal::nn(3.0 * u)
            }
        })
        .collect();
    GridFn::step(Arc::clone(grid), vals).unwrap()
}

/// Nonincreasing step built from sparse suffix sums.
pub fn monotone_step(grid: &Arc<Grid>, salt: u64) -> GridFn {
    let n = grid.len();
    let mut vals = vec![ZERO; n];
    let mut acc = 0.01;
    for i in (0..n).rev() {
        let u = unit(i, salt);
        if u > 0.7 {
            acc += u;
        }
        vals[i] = XReal::nn(acc);
    }
    GridFn::step(Arc::clone(grid), vals).unwrap()
}

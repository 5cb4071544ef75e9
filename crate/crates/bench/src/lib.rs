//! Shared inputs for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tspdraw::geom::Point;
use tspdraw::imaging::DensityField;

/// `n` uniform points in a `side × side` square.
pub fn uniform_points(n: usize, side: f64, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Point::new(rng.random_range(0.0..side), rng.random_range(0.0..side)))
        .collect()
}

/// Horizontal ramp from white (left) to full ink (right).
pub fn ramp(size: usize) -> DensityField {
    DensityField::from_fn(size, size, |x, _| x / size as f64)
}

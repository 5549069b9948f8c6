//! Synthetic inputs shared by the benchmarks.

use ndarray::Array2;
use scalebench_core::rng::SeededRng;

/// Gaussian-ish blobs whose features span several orders of magnitude.
pub fn blobs(n: usize, d: usize, classes: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = SeededRng::new(seed);
    let scales: Vec<f64> = (0..d)
        .map(|_| 10f64.powf(rng.uniform_range(-2.0, 3.0)))
        .collect();
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..d).map(|_| rng.uniform_range(-2.0, 2.0)).collect())
        .collect();
    let y: Vec<f64> = (0..n).map(|i| (i % classes) as f64).collect();
    let x = Array2::from_shape_fn((n, d), |(i, j)| {
        let noise = rng.uniform() + rng.uniform() + rng.uniform() - 1.5;
        (centers[y[i] as usize][j] + noise) * scales[j]
    });
    (x, y)
}

/// Linear target with noise over mixed-scale features.
pub fn linear(n: usize, d: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let (x, _) = blobs(n, d, 1, seed);
    let mut rng = SeededRng::new(seed ^ 0x5eed);
    let y = x
        .rows()
        .into_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(j, v)| v * (j as f64 + 1.0).recip())
                .sum::<f64>()
                + rng.uniform()
        })
        .collect();
    (x, y)
}

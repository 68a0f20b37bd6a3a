//! Seeded Gaussian class data for examples, tests and benchmarks.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::LabeledDataset;

/// Spherical unit-variance classes with pairwise mean distance `separation`.
///
/// Class `g` is centred at `separation / sqrt(2)` times the unit vector of
/// coordinate `g` (so `p` must be at least the number of classes). For two
/// classes the shift is spread over all coordinates instead.
pub fn gaussian_classes(counts: &[usize], p: usize, separation: f64, seed: u64) -> LabeledDataset {
    let g = counts.len();
    assert!(g >= 2 && p >= g, "need at least two classes and p >= G");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &m)| std::iter::repeat_n(c, m))
        .collect();
    let n = labels.len();
    let mean = |class: usize, col: usize| -> f64 {
        if g == 2 {
            if class == 1 {
                separation / (p as f64).sqrt()
            } else {
                0.0
            }
        } else if col == class {
            separation / std::f64::consts::SQRT_2
        } else {
            0.0
        }
    };
    let mut data = Vec::with_capacity(n * p);
    for &y in &labels {
        for c in 0..p {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(mean(y, c) + z);
        }
    }
    let x = DMatrix::from_row_slice(n, p, &data);
    let classes = (1..=g).map(|c| c.to_string()).collect();
    LabeledDataset::new(x, labels, classes).expect("generated data is valid")
}

//! k-nearest-neighbour majority vote, the distance-based reference method.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Upper end of the leave-one-out grid.
pub const MAX_GRID_K: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnnK {
    Fixed(usize),
    /// Leave-one-out over `1..=min(25, n - 1)`.
    LeaveOneOut,
}

#[derive(Debug, Clone)]
pub struct KnnModel {
    /// p x n, one column per training row.
    train_t: DMatrix<f64>,
    labels: Vec<usize>,
    n_classes: usize,
    pub k_nn: usize,
    pub seed: u64,
    /// Leave-one-out error per grid k when cross-validated.
    pub loo_errors: Vec<(usize, f64)>,
}

fn neighbours(train_t: &DMatrix<f64>, x: &[f64], skip: Option<usize>) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = (0..train_t.ncols())
        .filter(|&j| Some(j) != skip)
        .map(|j| {
            let dist: f64 = train_t.column(j).iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
            (dist, j)
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
    d.into_iter().map(|(_, j)| j).collect()
}

/// Majority class among `labels`; frequency ties are drawn uniformly with a
/// generator seeded from `(seed, query)`.
pub fn vote(labels: impl Iterator<Item = usize>, n_classes: usize, seed: u64, query: u64) -> usize {
    let mut counts = vec![0usize; n_classes];
    for y in labels {
        counts[y] += 1;
    }
    let top = *counts.iter().max().expect("at least one class");
    let tied: Vec<usize> = (0..n_classes).filter(|&g| counts[g] == top).collect();
    if tied.len() == 1 {
        return tied[0];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(query);
    tied[rng.random_range(0..tied.len())]
}

pub fn knn_fit(train: &LabeledDataset, k: KnnK, seed: u64) -> Result<KnnModel> {
    let n = train.n();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let train_t = train.features().transpose();
    let labels = train.labels().to_vec();
    let g = train.n_classes();
    let (k_nn, loo_errors) = match k {
        KnnK::Fixed(k) => {
            if k == 0 || k > n {
                return Err(Error::InvalidNeighbours { k, n });
            }
            (k, Vec::new())
        }
        KnnK::LeaveOneOut => {
            let max_k = MAX_GRID_K.min(n.saturating_sub(1));
            if max_k == 0 {
                return Err(Error::InvalidNeighbours { k: 1, n });
            }
            let mut wrong = vec![0usize; max_k];
            for j in 0..n {
                let nb = neighbours(&train_t, train_t.column(j).as_slice(), Some(j));
                for k in 1..=max_k {
                    let pred = vote(nb[..k].iter().map(|&i| labels[i]), g, seed, j as u64);
                    if pred != labels[j] {
                        wrong[k - 1] += 1;
                    }
                }
            }
            let errors: Vec<(usize, f64)> =
                (1..=max_k).map(|k| (k, wrong[k - 1] as f64 / n as f64)).collect();
            let best = crate::tuning::select_k(&errors).expect("nonempty grid");
            (best, errors)
        }
    };
    Ok(KnnModel {
        train_t,
        labels,
        n_classes: g,
        k_nn,
        seed,
        loo_errors,
    })
}

impl KnnModel {
    /// Class of `x`; `query` seeds the tie draw so batches are reproducible.
    pub fn predict(&self, x: &[f64], query: u64) -> usize {
        let nb = neighbours(&self.train_t, x, None);
        vote(nb[..self.k_nn].iter().map(|&i| self.labels[i]), self.n_classes, self.seed, query)
    }

    /// Predicts every row of `features`, using the row index as tie seed.
    pub fn predict_rows(&self, features: &DMatrix<f64>) -> Vec<usize> {
        (0..features.nrows())
            .map(|i| {
                let row: Vec<f64> = features.row(i).iter().copied().collect();
                self.predict(&row, i as u64)
            })
            .collect()
    }
}

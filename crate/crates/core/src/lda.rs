//! Linear discriminant analysis with a pooled within-group covariance and
//! uniform priors.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::localproj::RANK_TOL;

const RIDGE_START: f64 = 1e-8;
const RIDGE_MAX: f64 = 1e-2;
/// Smallest acceptable squared Cholesky pivot relative to the largest variance.
const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LdaModel {
    /// Class codes present in the fit, ascending.
    pub class_ids: Vec<usize>,
    pub means: Vec<DVector<f64>>,
    /// Pooled within-group covariance, ridge included.
    pub pooled_cov: DMatrix<f64>,
    /// Ridge added to the diagonal (absolute), zero when none was needed.
    pub ridge: f64,
    pub log_det: f64,
    chol: Cholesky<f64, Dyn>,
}

impl PartialEq for LdaModel {
    fn eq(&self, other: &Self) -> bool {
        self.class_ids == other.class_ids
            && self.means == other.means
            && self.pooled_cov == other.pooled_cov
            && self.ridge == other.ridge
    }
}

fn accept(cov: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let max_var = cov.diagonal().max();
    if max_var.is_nan() || max_var <= 0.0 {
        return None;
    }
    let chol = cov.clone().cholesky()?;
    let l = chol.l_dirty();
    let min_pivot = (0..cov.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    (min_pivot >= PIVOT_TOL * max_var).then_some(chol)
}

/// Fits class means and the pooled covariance of `points` (m x d).
///
/// A ridge of `eps * trace / d` is added when the covariance is not
/// numerically positive definite, with `eps` escalating from 1e-8 to 1e-2.
pub fn fit_lda(points: &DMatrix<f64>, labels: &[usize]) -> Result<LdaModel> {
    let (m, d) = points.shape();
    if labels.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: labels.len(),
        });
    }
    let mut class_ids: Vec<usize> = labels.to_vec();
    class_ids.sort_unstable();
    class_ids.dedup();
    if class_ids.len() < 2 {
        return Err(Error::TooFewClasses(class_ids.len()));
    }
    if m <= class_ids.len() {
        return Err(Error::NoDegreesOfFreedom {
            points: m,
            classes: class_ids.len(),
        });
    }

    let mut means = Vec::with_capacity(class_ids.len());
    for &g in &class_ids {
        let mut sum = DVector::zeros(d);
        let mut count = 0.0;
        for (row, _) in points.row_iter().zip(labels).filter(|(_, &y)| y == g) {
            sum += row.transpose();
            count += 1.0;
        }
        means.push(sum / count);
    }
    let mut scatter = DMatrix::<f64>::zeros(d, d);
    for (row, &y) in points.row_iter().zip(labels) {
        let slot = class_ids.binary_search(&y).expect("present class");
        let r = row.transpose() - &means[slot];
        scatter.ger(1.0, &r, &r, 1.0);
    }
    let mut cov = scatter / (m - class_ids.len()) as f64;
    // exact symmetry
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let mut ridge = 0.0;
    let mut chol = accept(&cov);
    if chol.is_none() {
        let base = cov.trace() / d as f64;
        let mut eps = RIDGE_START;
        while chol.is_none() && eps <= RIDGE_MAX * (1.0 + 1e-9) && base > 0.0 {
            ridge = eps * base;
            let mut trial = cov.clone();
            for i in 0..d {
                trial[(i, i)] += ridge;
            }
            chol = accept(&trial);
            if chol.is_some() {
                cov = trial;
            }
            eps *= 10.0;
        }
    }
    let chol = chol.ok_or(Error::RidgeExhausted)?;
    LdaModel::assemble(class_ids, means, cov, ridge, chol)
}

impl LdaModel {
    fn assemble(
        class_ids: Vec<usize>,
        means: Vec<DVector<f64>>,
        pooled_cov: DMatrix<f64>,
        ridge: f64,
        chol: Cholesky<f64, Dyn>,
    ) -> Result<Self> {
        let l = chol.l_dirty();
        let log_det = 2.0 * (0..pooled_cov.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>();
        Ok(Self {
            class_ids,
            means,
            pooled_cov,
            ridge,
            log_det,
            chol,
        })
    }

    /// Rebuilds a model from stored parameters; `pooled_cov` already carries the ridge.
    pub fn from_parts(
        class_ids: Vec<usize>,
        means: Vec<DVector<f64>>,
        pooled_cov: DMatrix<f64>,
        ridge: f64,
    ) -> Result<Self> {
        if class_ids.len() < 2 || class_ids.len() != means.len() {
            return Err(Error::ModelFormat("inconsistent discriminant classes".into()));
        }
        let chol = pooled_cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::ModelFormat("stored covariance is not positive definite".into()))?;
        Self::assemble(class_ids, means, pooled_cov, ridge, chol)
    }

    pub fn dim(&self) -> usize {
        self.pooled_cov.nrows()
    }

    /// Gaussian log-densities of `x` for each present class.
    pub fn log_densities(&self, x: &DVector<f64>) -> Vec<f64> {
        let d = self.dim() as f64;
        let norm = -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + self.log_det);
        self.means
            .iter()
            .map(|mu| {
                let diff = x - mu;
                let w = self
                    .chol
                    .l_dirty()
                    .solve_lower_triangular(&diff)
                    .expect("cholesky factor is nonsingular");
                norm - 0.5 * w.norm_squared()
            })
            .collect()
    }

    /// Posterior over the present classes (ordered as `class_ids`).
    pub fn posterior(&self, x: &DVector<f64>) -> DVector<f64> {
        softmax(&self.log_densities(x))
    }

    /// Posterior expanded to all `n_classes`; absent classes get exactly 0.
    pub fn posterior_global(&self, x: &DVector<f64>, n_classes: usize) -> DVector<f64> {
        let local = self.posterior(x);
        let mut out = DVector::zeros(n_classes);
        for (&g, &p) in self.class_ids.iter().zip(local.iter()) {
            out[g] = p;
        }
        out
    }
}

/// Normalised exponentials with max subtraction.
pub fn softmax(logs: &[f64]) -> DVector<f64> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = e.iter().sum();
    DVector::from_iterator(e.len(), e.into_iter().map(|v| v / s))
}

/// Index of the largest entry; the smallest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// LDA on the raw features after projecting onto the span of the centred
/// training data.
#[derive(Debug, Clone)]
pub struct FullRankLda {
    pub mean: DVector<f64>,
    /// p x r
    pub basis: DMatrix<f64>,
    pub lda: LdaModel,
    pub n_classes: usize,
}

pub fn full_rank_lda(train: &LabeledDataset) -> Result<FullRankLda> {
    let x = train.features();
    let (n, p) = x.shape();
    let mean = DVector::from_fn(p, |c, _| x.column(c).mean());
    let centered = DMatrix::from_fn(n, p, |i, c| x[(i, c)] - mean[c]);
    let (v, sv) = crate::localproj::right_singular(centered.clone());
    let largest = sv.iter().copied().fold(0.0, f64::max);
    let kept: Vec<usize> = (0..sv.len())
        .filter(|&i| largest > 0.0 && sv[i] > RANK_TOL * largest)
        .collect();
    let g = train.n_classes();
    if kept.len() + 1 < g {
        return Err(Error::RankTooLow {
            rank: kept.len(),
            needed: g - 1,
        });
    }
    let basis = DMatrix::from_fn(p, kept.len(), |r, c| v[(r, kept[c])]);
    let scores = &centered * &basis;
    let lda = fit_lda(&scores, train.labels())?;
    Ok(FullRankLda {
        mean,
        basis,
        lda,
        n_classes: g,
    })
}

impl FullRankLda {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn posterior(&self, x: &[f64]) -> DVector<f64> {
        let centered = DVector::from_iterator(x.len(), x.iter().zip(self.mean.iter()).map(|(a, m)| a - m));
        let z = self.basis.tr_mul(&centered);
        self.lda.posterior_global(&z, self.n_classes)
    }

    pub fn classify(&self, x: &[f64]) -> usize {
        argmax(self.posterior(x).as_slice())
    }
}

//! The local projection classifier: one discriminant model per training
//! observation, class-specific quality weights, and weighted aggregation of
//! the local posteriors.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::lda::{argmax, fit_lda, LdaModel};
use crate::localproj::{Core, CoreMode};
use crate::tuning::k_interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Weighted,
    Unweighted,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Weighted => "weighted",
            Scheme::Unweighted => "unweighted",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "weighted" => Ok(Scheme::Weighted),
            "unweighted" => Ok(Scheme::Unweighted),
            other => Err(format!("unknown scheme `{other}`")),
        }
    }
}

/// A core with the discriminant model fitted in its local space.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalModel {
    pub core: Core,
    pub lda: LdaModel,
}

impl LocalModel {
    pub fn posterior(&self, x: &[f64], n_classes: usize) -> DVector<f64> {
        self.lda.posterior_global(&self.core.local_coordinates(x), n_classes)
    }
}

/// The local models of one training set together with the posteriors they
/// assign to every training observation.
#[derive(Debug, Clone)]
pub struct LocalEnsemble {
    pub k: usize,
    pub mode: CoreMode,
    pub n_classes: usize,
    pub locals: Vec<LocalModel>,
    /// One n x G matrix per local model.
    pub train_posteriors: Vec<DMatrix<f64>>,
}

fn fit_one(ds: &LabeledDataset, xt: &DMatrix<f64>, owner: usize, k: usize, mode: CoreMode) -> Result<(LocalModel, DMatrix<f64>)> {
    let core = Core::build(ds, owner, k, mode)?;
    let space = core.project_columns(xt);
    let rep = space.representation();
    let keep: Vec<usize> = (0..ds.n()).filter(|j| !core.contains(*j)).collect();
    let rows = DMatrix::from_fn(keep.len(), rep.ncols(), |r, c| rep[(keep[r], c)]);
    let labels: Vec<usize> = keep.iter().map(|&j| ds.label(j)).collect();
    let lda = fit_lda(&rows, &labels)?;
    let g = ds.n_classes();
    let mut post = DMatrix::zeros(ds.n(), g);
    for j in 0..ds.n() {
        let pj = lda.posterior_global(&rep.row(j).transpose(), g);
        post.row_mut(j).copy_from(&pj.transpose());
    }
    Ok((LocalModel { core, lda }, post))
}

/// Fits one local model per training observation. Each discriminant model
/// is fitted on the observations outside its core.
pub fn fit_local_ensemble(train: &LabeledDataset, k: usize, mode: CoreMode) -> Result<LocalEnsemble> {
    let interval = k_interval(train.n(), train.group_counts(), train.n_classes())?;
    if !interval.contains(k) {
        return Err(Error::KOutOfRange {
            k,
            lo: interval.lo,
            hi: interval.hi,
        });
    }
    let xt = train.features().transpose();
    let fitted: Vec<Result<(LocalModel, DMatrix<f64>)>> = (0..train.n())
        .into_par_iter()
        .map(|i| fit_one(train, &xt, i, k, mode).map_err(|e| e.at_owner(i)))
        .collect();
    let mut locals = Vec::with_capacity(train.n());
    let mut train_posteriors = Vec::with_capacity(train.n());
    for f in fitted {
        let (l, p) = f?;
        locals.push(l);
        train_posteriors.push(p);
    }
    Ok(LocalEnsemble {
        k,
        mode,
        n_classes: train.n_classes(),
        locals,
        train_posteriors,
    })
}

/// Quality measures of every local model for every class (all n x G).
#[derive(Debug, Clone, PartialEq)]
pub struct QualityWeights {
    pub q_plus: DMatrix<f64>,
    pub q_minus: DMatrix<f64>,
    pub weights: DMatrix<f64>,
}

/// `q+` is the mean posterior of class g over class-g observations, `q-`
/// the mean posterior of class g over the others, `w = exp(q+ - q-)`.
///
/// `posteriors[i]` is the n x G posterior matrix of local model i. When
/// `exclusions` is given, the rows in `exclusions[i]` are left out of the
/// means of model i.
pub fn quality_from_posteriors(
    posteriors: &[DMatrix<f64>],
    labels: &[usize],
    n_classes: usize,
    exclusions: Option<&[Vec<usize>]>,
) -> QualityWeights {
    let m = posteriors.len();
    let mut q_plus = DMatrix::zeros(m, n_classes);
    let mut q_minus = DMatrix::zeros(m, n_classes);
    for (i, post) in posteriors.iter().enumerate() {
        let skip = exclusions.map(|e| e[i].as_slice()).unwrap_or(&[]);
        for g in 0..n_classes {
            let (mut sp, mut np, mut sm, mut nm) = (0.0, 0usize, 0.0, 0usize);
            for (j, &y) in labels.iter().enumerate() {
                if skip.contains(&j) {
                    continue;
                }
                if y == g {
                    sp += post[(j, g)];
                    np += 1;
                } else {
                    sm += post[(j, g)];
                    nm += 1;
                }
            }
            q_plus[(i, g)] = if np > 0 { sp / np as f64 } else { 0.0 };
            q_minus[(i, g)] = if nm > 0 { sm / nm as f64 } else { 0.0 };
        }
    }
    let weights = (&q_plus - &q_minus).map(f64::exp);
    QualityWeights {
        q_plus,
        q_minus,
        weights,
    }
}

pub fn quality_weights(ens: &LocalEnsemble, train: &LabeledDataset, exclude_core: bool) -> QualityWeights {
    let exclusions: Option<Vec<Vec<usize>>> =
        exclude_core.then(|| ens.locals.iter().map(|l| l.core.members.clone()).collect());
    quality_from_posteriors(
        &ens.train_posteriors,
        train.labels(),
        ens.n_classes,
        exclusions.as_deref(),
    )
}

/// Combines local posteriors `(model index, G-vector)` into one distribution.
///
/// Weighted: per class, the weight-normalised mean of the local posteriors;
/// unweighted: the plain mean. Either is renormalised across classes.
pub fn aggregate<'a, I>(posteriors: I, weights: Option<&DMatrix<f64>>, n_classes: usize) -> DVector<f64>
where
    I: IntoIterator<Item = (usize, &'a DVector<f64>)>,
{
    let mut num = DVector::<f64>::zeros(n_classes);
    let mut den = DVector::<f64>::zeros(n_classes);
    for (i, p) in posteriors {
        for g in 0..n_classes {
            let w = weights.map_or(1.0, |w| w[(i, g)]);
            num[g] += w * p[g];
            den[g] += w;
        }
    }
    let mean = num.component_div(&den);
    let total = mean.sum();
    mean / total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpOptions {
    pub mode: CoreMode,
    /// Leave core members out of the quality means.
    pub exclude_core_in_weights: bool,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            mode: CoreMode::Strict,
            exclude_core_in_weights: false,
        }
    }
}

/// A fitted local projection classifier.
#[derive(Debug, Clone)]
pub struct LpModel {
    pub k: usize,
    pub mode: CoreMode,
    pub exclude_core_in_weights: bool,
    /// Original label strings by class code.
    pub classes: Vec<String>,
    pub feature_names: Vec<String>,
    pub locals: Vec<LocalModel>,
    pub quality: QualityWeights,
    pub train_fingerprint: String,
    /// Posteriors of the training rows per local model; not persisted.
    pub(crate) train_posteriors: Option<Vec<DMatrix<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: usize,
    pub label: String,
    pub posterior: DVector<f64>,
}

impl LpModel {
    pub fn fit(train: &LabeledDataset, k: usize, options: LpOptions) -> Result<Self> {
        let ens = fit_local_ensemble(train, k, options.mode)?;
        let quality = quality_weights(&ens, train, options.exclude_core_in_weights);
        Ok(Self {
            k,
            mode: options.mode,
            exclude_core_in_weights: options.exclude_core_in_weights,
            classes: train.classes().to_vec(),
            feature_names: train.feature_names().to_vec(),
            locals: ens.locals,
            quality,
            train_fingerprint: train.fingerprint(),
            train_posteriors: Some(ens.train_posteriors),
        })
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.quality.weights
    }

    /// Replaces the weight matrix, e.g. to compare against constant weights.
    pub fn set_weights(&mut self, weights: DMatrix<f64>) {
        assert_eq!(weights.shape(), self.quality.weights.shape());
        self.quality.weights = weights;
    }

    /// Posterior of `x` under every local model.
    pub fn local_posteriors(&self, x: &[f64]) -> Vec<DVector<f64>> {
        let g = self.n_classes();
        self.locals.iter().map(|l| l.posterior(x, g)).collect()
    }

    pub fn posterior(&self, x: &[f64], scheme: Scheme) -> DVector<f64> {
        let local = self.local_posteriors(x);
        let weights = match scheme {
            Scheme::Weighted => Some(&self.quality.weights),
            Scheme::Unweighted => None,
        };
        aggregate(local.iter().enumerate(), weights, self.n_classes())
    }

    pub fn classify(&self, x: &[f64], scheme: Scheme) -> Classification {
        let posterior = self.posterior(x, scheme);
        let class = argmax(posterior.as_slice());
        Classification {
            class,
            label: self.classes[class].clone(),
            posterior,
        }
    }

    /// Classifies every row of `features` (m x p), in parallel over rows.
    pub fn classify_rows(&self, features: &DMatrix<f64>, scheme: Scheme) -> Result<Vec<Classification>> {
        if features.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: features.ncols(),
            });
        }
        let xt = features.transpose();
        Ok((0..xt.ncols())
            .into_par_iter()
            .map(|j| self.classify(xt.column(j).as_slice(), scheme))
            .collect())
    }

    /// Posteriors of the training rows, from the fit cache when `train` is
    /// the data the model was fitted on.
    pub(crate) fn training_posteriors(&self, train: &LabeledDataset) -> Vec<DMatrix<f64>> {
        if let Some(cached) = &self.train_posteriors {
            if train.fingerprint() == self.train_fingerprint {
                return cached.clone();
            }
        }
        let xt = train.features().transpose();
        let g = self.n_classes();
        self.locals
            .par_iter()
            .map(|l| {
                let mut post = DMatrix::zeros(train.n(), g);
                for j in 0..train.n() {
                    let p = l.posterior(xt.column(j).as_slice(), g);
                    post.row_mut(j).copy_from(&p.transpose());
                }
                post
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::gaussian_classes;
    use approx::assert_abs_diff_eq;

    #[test]
    fn worked_two_model_example() {
        let p1 = DVector::from_vec(vec![0.8, 0.2]);
        let p2 = DVector::from_vec(vec![0.6, 0.4]);
        // rows are models, columns classes: w^1 = (1, 3) over models, w^2 = (1, 1)
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 3.0, 1.0]);
        let out = aggregate([(0, &p1), (1, &p2)], Some(&w), 2);
        // tilde P = (0.65, 0.30)
        assert_abs_diff_eq!(out[0], 0.65 / 0.95, epsilon = 1e-12);
        assert_abs_diff_eq!(out[0], 0.6842, epsilon = 5e-5);
        assert_abs_diff_eq!(out[1], 0.3158, epsilon = 5e-5);

        let plain = aggregate([(0, &p1), (1, &p2)], None, 2);
        assert_abs_diff_eq!(plain.as_slice(), [0.7, 0.3].as_slice(), epsilon = 1e-12);
        let ones = DMatrix::from_element(2, 2, 1.0);
        let weighted = aggregate([(0, &p1), (1, &p2)], Some(&ones), 2);
        assert_abs_diff_eq!(weighted.as_slice(), plain.as_slice(), epsilon = 1e-12);
    }

    #[test]
    fn perfect_and_uninformative_weights() {
        let labels = [0, 0, 1, 1];
        let perfect = DMatrix::from_row_slice(4, 2, &[1., 0., 1., 0., 0., 1., 0., 1.]);
        let q = quality_from_posteriors(&[perfect], &labels, 2, None);
        assert_abs_diff_eq!(q.weights[(0, 0)], std::f64::consts::E, epsilon = 1e-12);
        assert_abs_diff_eq!(q.weights[(0, 1)], std::f64::consts::E, epsilon = 1e-12);
        let flat = DMatrix::from_element(4, 2, 0.5);
        let q = quality_from_posteriors(&[flat], &labels, 2, None);
        assert_abs_diff_eq!(q.weights[(0, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn four_observation_fixture() {
        let labels = [0, 1, 0, 1];
        let post = DMatrix::from_row_slice(4, 2, &[0.9, 0.1, 0.3, 0.7, 0.6, 0.4, 0.2, 0.8]);
        let q = quality_from_posteriors(std::slice::from_ref(&post), &labels, 2, None);
        // scalar oracle
        let qp0: f64 = (0.9 + 0.6) / 2.0;
        let qm0: f64 = (0.3 + 0.2) / 2.0;
        let qp1: f64 = (0.7 + 0.8) / 2.0;
        let qm1: f64 = (0.1 + 0.4) / 2.0;
        assert_abs_diff_eq!(q.weights[(0, 0)], (qp0 - qm0).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(q.weights[(0, 1)], (qp1 - qm1).exp(), epsilon = 1e-12);
        // excluding rows 0 and 1
        let q = quality_from_posteriors(&[post], &labels, 2, Some(&[vec![0, 1]]));
        assert_abs_diff_eq!(q.q_plus[(0, 0)], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(q.q_minus[(0, 0)], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn fit_produces_one_model_per_observation() {
        let ds = gaussian_classes(&[12, 12], 6, 4.0, 1);
        let model = LpModel::fit(&ds, 3, LpOptions::default()).unwrap();
        assert_eq!(model.locals.len(), 24);
        for l in &model.locals {
            assert_eq!(l.core.members.len(), 3);
            assert_eq!(l.lda.dim(), 3);
        }
        let w = model.weights();
        let (lo, hi) = ((-1.0f64).exp(), 1.0f64.exp());
        assert!(w.iter().all(|&v| v >= lo && v <= hi));
        let again = LpModel::fit(&ds, 3, LpOptions::default()).unwrap();
        assert_eq!(model.weights(), again.weights());
        assert_eq!(model.locals, again.locals);
    }

    #[test]
    fn rejects_k_outside_interval() {
        let ds = gaussian_classes(&[6, 6], 4, 3.0, 2);
        assert!(matches!(
            LpModel::fit(&ds, 4, LpOptions::default()),
            Err(Error::KOutOfRange { k: 4, lo: 1, hi: 3 })
        ));
    }

    #[test]
    fn posteriors_are_distributions_and_ties_go_low() {
        let ds = gaussian_classes(&[10, 10, 10], 8, 3.0, 5);
        let model = LpModel::fit(&ds, 3, LpOptions::default()).unwrap();
        for i in 0..ds.n() {
            for scheme in [Scheme::Weighted, Scheme::Unweighted] {
                let c = model.classify(ds.row(i).as_slice(), scheme);
                assert!((c.posterior.sum() - 1.0).abs() < 1e-12);
                assert!(c.posterior.iter().all(|&v| v >= 0.0));
                assert_eq!(c.class, argmax(c.posterior.as_slice()));
            }
        }
    }
}

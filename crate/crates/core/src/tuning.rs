//! Admissible range of the core size `k` and its selection by training
//! misclassification.

use std::io::Write;

use crate::dataset::LabeledDataset;
use crate::ensemble::{aggregate, LpModel, LpOptions, Scheme};
use crate::error::{Error, Result};
use crate::lda::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KInterval {
    pub lo: usize,
    pub hi: usize,
}

impl KInterval {
    pub fn contains(&self, k: usize) -> bool {
        self.lo <= k && k <= self.hi
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        self.lo..=self.hi
    }
}

/// `[G - 1, min(floor(n / 4), min_g n_g - 1)]`.
///
/// The lower bound gives the local space enough dimensions for G classes,
/// `n / 4` keeps three observations per dimension after removing the core,
/// and `min n_g - 1` leaves every class represented outside each core.
pub fn k_interval(n: usize, group_counts: &[usize], n_classes: usize) -> Result<KInterval> {
    if n_classes < 2 {
        return Err(Error::TooFewClasses(n_classes));
    }
    let min_group = group_counts.iter().copied().min().unwrap_or(0);
    let lo = n_classes - 1;
    let by_size = n / 4;
    let by_group = min_group.saturating_sub(1);
    let hi = by_size.min(by_group);
    if lo > hi {
        let binding = if by_size <= by_group {
            format!("n / 4 = {by_size} with n = {n}")
        } else {
            format!("smallest class size {min_group} minus one")
        };
        return Err(Error::EmptyInterval { lo, hi, binding });
    }
    Ok(KInterval { lo, hi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Denominator {
    /// Misclassifications over all n training observations.
    #[default]
    All,
    /// Misclassifications over n - k.
    NMinusK,
}

/// Share of training observations misclassified when each one is scored
/// only by the local models whose core does not contain it.
pub fn training_error(model: &LpModel, train: &LabeledDataset) -> Result<f64> {
    training_error_with(model, train, Scheme::Weighted, Denominator::All)
}

pub fn training_error_with(
    model: &LpModel,
    train: &LabeledDataset,
    scheme: Scheme,
    denominator: Denominator,
) -> Result<f64> {
    let posteriors = model.training_posteriors(train);
    let g = model.n_classes();
    let weights = match scheme {
        Scheme::Weighted => Some(model.weights()),
        Scheme::Unweighted => None,
    };
    let mut wrong = 0usize;
    let mut rows = Vec::with_capacity(posteriors.len());
    for j in 0..train.n() {
        rows.clear();
        for (i, (local, post)) in model.locals.iter().zip(&posteriors).enumerate() {
            if !local.core.contains(j) {
                rows.push((i, post.row(j).transpose()));
            }
        }
        if rows.is_empty() {
            return Err(Error::Unscored(j));
        }
        let p = aggregate(rows.iter().map(|(i, v)| (*i, v)), weights, g);
        if argmax(p.as_slice()) != train.label(j) {
            wrong += 1;
        }
    }
    let denom = match denominator {
        Denominator::All => train.n(),
        Denominator::NMinusK => train.n() - model.k,
    };
    Ok(wrong as f64 / denom as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningEntry {
    pub k: usize,
    /// `None` when the fit failed for this k.
    pub error: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningReport {
    pub entries: Vec<TuningEntry>,
    pub selected: usize,
}

impl TuningReport {
    pub fn error_at(&self, k: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.k == k).and_then(|e| e.error)
    }

    /// `k,error` lines; failed fits are written as `NA`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "error"])?;
        for e in &self.entries {
            let err = e.error.map_or_else(|| "NA".to_string(), |v| v.to_string());
            w.write_record([e.k.to_string(), err])?;
        }
        w.flush().map_err(|e| Error::io("<tuning report>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TuneOptions {
    pub lp: LpOptions,
    pub scheme: Scheme,
    pub denominator: Denominator,
}

/// Fits every admissible k and keeps the one with the smallest training
/// error, the smallest k among ties. A k whose fit fails is recorded in the
/// report and skipped.
pub fn tune_k(train: &LabeledDataset, options: TuneOptions) -> Result<(LpModel, TuningReport)> {
    let interval = k_interval(train.n(), train.group_counts(), train.n_classes())?;
    let mut entries = Vec::new();
    let mut best: Option<(f64, LpModel)> = None;
    let mut first_failure = None;
    for k in interval.iter() {
        let outcome = LpModel::fit(train, k, options.lp)
            .and_then(|m| training_error_with(&m, train, options.scheme, options.denominator).map(|e| (e, m)));
        match outcome {
            Ok((err, model)) => {
                entries.push(TuningEntry {
                    k,
                    error: Some(err),
                    failure: None,
                });
                if best.as_ref().is_none_or(|(b, _)| err < *b) {
                    best = Some((err, model));
                }
            }
            Err(e) => {
                entries.push(TuningEntry {
                    k,
                    error: None,
                    failure: Some(e.to_string()),
                });
                first_failure.get_or_insert(e);
            }
        }
    }
    match best {
        Some((_, model)) => {
            let selected = model.k;
            Ok((model, TuningReport { entries, selected }))
        }
        None => Err(first_failure.expect("interval is nonempty")),
    }
}

/// Smallest k with the minimal error in `(k, error)` pairs.
pub fn select_k(curve: &[(usize, f64)]) -> Option<usize> {
    curve
        .iter()
        .fold(None, |acc: Option<(usize, f64)>, &(k, e)| match acc {
            Some((_, b)) if e >= b => acc,
            _ => Some((k, e)),
        })
        .map(|(k, _)| k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::gaussian_classes;
    use proptest::prelude::*;

    #[test]
    fn interval_examples() {
        assert_eq!(k_interval(96, &[8, 20, 30, 38], 4).unwrap(), KInterval { lo: 3, hi: 7 });
        assert_eq!(k_interval(8, &[4, 4], 2).unwrap(), KInterval { lo: 1, hi: 2 });
        match k_interval(12, &[2, 2, 2, 3, 3], 5) {
            Err(Error::EmptyInterval { lo: 4, hi: 1, binding }) => assert!(binding.contains("smallest class")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            k_interval(7, &[3, 4], 3),
            Err(Error::EmptyInterval { binding, .. }) if binding.contains("n / 4")
        ));
    }

    proptest! {
        #[test]
        #[allow(clippy::int_plus_one)]
        fn interval_matches_inequalities(counts in proptest::collection::vec(1usize..40, 2..7)) {
            let n: usize = counts.iter().sum();
            let g = counts.len();
            let min_g = *counts.iter().min().unwrap();
            let ok = |k: usize| g - 1 <= k && 3 * k <= n - k && k + 1 <= n - k && k <= min_g - 1;
            let admissible: Vec<usize> = (0..=n).filter(|&k| ok(k)).collect();
            match k_interval(n, &counts, g) {
                Ok(iv) => prop_assert_eq!(iv.iter().collect::<Vec<_>>(), admissible),
                Err(_) => prop_assert!(admissible.is_empty()),
            }
        }
    }

    #[test]
    fn selection_rule() {
        assert_eq!(select_k(&[(1, 0.3), (2, 0.2), (3, 0.1)]), Some(3));
        assert_eq!(select_k(&[(1, 0.2), (2, 0.2), (3, 0.2)]), Some(1));
        assert_eq!(select_k(&[(2, 0.3), (3, 0.1), (4, 0.1)]), Some(3));
        assert_eq!(select_k(&[]), None);
    }

    #[test]
    fn separable_training_error_is_zero() {
        let ds = gaussian_classes(&[15, 15], 10, 30.0, 3);
        let model = LpModel::fit(&ds, 3, LpOptions::default()).unwrap();
        assert_eq!(training_error(&model, &ds).unwrap(), 0.0);
    }

    #[test]
    fn tuning_picks_argmin_and_is_reproducible() {
        let ds = gaussian_classes(&[14, 14, 14], 12, 2.0, 8);
        let (model, report) = tune_k(&ds, TuneOptions::default()).unwrap();
        let curve: Vec<(usize, f64)> = report.entries.iter().map(|e| (e.k, e.error.unwrap())).collect();
        assert_eq!(curve.first().unwrap().0, 2);
        assert_eq!(curve.last().unwrap().0, 10);
        assert_eq!(Some(report.selected), select_k(&curve));
        assert_eq!(model.k, report.selected);
        assert!(curve.iter().all(|(_, e)| (0.0..=1.0).contains(e)));
        let (_, again) = tune_k(&ds, TuneOptions::default()).unwrap();
        assert_eq!(report, again);

        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,error\n2,"));
        assert_eq!(text.lines().count(), 10);
    }

    #[test]
    fn n_minus_k_denominator() {
        let ds = gaussian_classes(&[10, 10], 6, 1.0, 4);
        let model = LpModel::fit(&ds, 2, LpOptions::default()).unwrap();
        let all = training_error_with(&model, &ds, Scheme::Weighted, Denominator::All).unwrap();
        let reduced = training_error_with(&model, &ds, Scheme::Weighted, Denominator::NMinusK).unwrap();
        assert!((reduced * 18.0 - all * 20.0).abs() < 1e-12);
    }
}

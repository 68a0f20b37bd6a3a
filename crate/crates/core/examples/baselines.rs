//! Compare LP with full-rank LDA and leave-one-out KNN on flat data.

use lop::baselines::{knn_fit, KnnK};
use lop::lda::full_rank_lda;
use lop::tuning::{tune_k, TuneOptions};
use lop::{gaussian_classes, Scheme};

fn rate(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a != b).count() as f64 / truth.len() as f64
}

fn main() -> lop::Result<()> {
    let train = gaussian_classes(&[50, 50], 200, 6.0, 11);
    let test = gaussian_classes(&[100, 100], 200, 6.0, 12);

    let (lp, _) = tune_k(&train, TuneOptions::default())?;
    let pred: Vec<usize> = lp
        .classify_rows(test.features(), Scheme::Weighted)?
        .iter()
        .map(|c| c.class)
        .collect();
    println!("LP  (k = {:>2})    {:.3}", lp.k, rate(&pred, test.labels()));

    let lda = full_rank_lda(&train)?;
    let pred: Vec<usize> = (0..test.n()).map(|i| lda.classify(test.row(i).as_slice())).collect();
    println!("LDA (rank = {:>2}) {:.3}", lda.rank(), rate(&pred, test.labels()));

    let knn = knn_fit(&train, KnnK::LeaveOneOut, 5)?;
    println!("KNN (k = {:>2})    {:.3}", knn.k_nn, rate(&knn.predict_rows(test.features()), test.labels()));
    Ok(())
}

//! Fit a local projection classifier with a fixed k and classify new data.

use lop::{gaussian_classes, LpModel, LpOptions, Scheme};

fn main() -> lop::Result<()> {
    let train = gaussian_classes(&[30, 30, 30], 60, 4.0, 1);
    let test = gaussian_classes(&[20, 20, 20], 60, 4.0, 2);

    let model = LpModel::fit(&train, 5, LpOptions::default())?;
    let out = model.classify_rows(test.features(), Scheme::Weighted)?;
    let wrong = out.iter().zip(test.labels()).filter(|(c, &y)| c.class != y).count();
    println!("{} local models, k = {}", model.locals.len(), model.k);
    println!("test error {:.3} ({wrong} of {})", wrong as f64 / test.n() as f64, test.n());

    let first = &out[0];
    println!("row 0 -> class {} with posterior {:.3?}", first.label, first.posterior.as_slice());
    Ok(())
}

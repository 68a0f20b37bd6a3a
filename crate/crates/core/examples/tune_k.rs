//! Choose k by the training error over the admissible interval.

use lop::tuning::{k_interval, tune_k, TuneOptions};
use lop::gaussian_classes;

fn main() -> lop::Result<()> {
    let train = gaussian_classes(&[25, 25, 25], 80, 4.0, 3);
    let iv = k_interval(train.n(), train.group_counts(), train.n_classes())?;
    println!("admissible k: [{}, {}]", iv.lo, iv.hi);

    let (model, report) = tune_k(&train, TuneOptions::default())?;
    for e in &report.entries {
        match e.error {
            Some(err) => println!("k = {:>2}  training error {err:.4}", e.k),
            None => println!("k = {:>2}  failed: {}", e.k, e.failure.as_deref().unwrap_or("")),
        }
    }
    println!("selected k = {}", model.k);
    report.write_csv(std::io::stdout())?;
    Ok(())
}

//! Save a model to JSON, load it back and check the predictions agree.

use lop::{gaussian_classes, LpModel, LpOptions, Scheme};

fn main() -> lop::Result<()> {
    let train = gaussian_classes(&[20, 20, 20], 30, 3.0, 4);
    let model = LpModel::fit(&train, 4, LpOptions::default())?;
    let path = std::env::temp_dir().join("lop_example_model.json");
    model.save(&path)?;
    let loaded = LpModel::load(&path)?;

    let test = gaussian_classes(&[10, 10, 10], 30, 3.0, 5);
    let mut worst = 0.0f64;
    for i in 0..test.n() {
        let x = test.row(i);
        let a = model.posterior(x.as_slice(), Scheme::Weighted);
        let b = loaded.posterior(x.as_slice(), Scheme::Weighted);
        worst = worst.max((a - b).amax());
    }
    println!("model file {} ({} bytes)", path.display(), std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0));
    println!("max posterior difference after reload: {worst:e}");
    std::fs::remove_file(&path).ok();
    Ok(())
}

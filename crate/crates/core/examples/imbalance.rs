//! Resampling benchmark over the six imbalanced training designs.

use std::path::PathBuf;

use lop::evaluation::{imbalance_plans, run_on_dataset, ExperimentSpec, LpSettings, Method};
use lop::gaussian_classes;

fn main() -> lop::Result<()> {
    // a stand-in for a three-class table with enough rows in every class
    let ds = gaussian_classes(&[200, 120, 200], 40, 3.5, 9);
    for (s, plan) in imbalance_plans(5, 42).into_iter().enumerate() {
        let spec = ExperimentSpec {
            dataset: PathBuf::from("synthetic"),
            label_column: "class".into(),
            plan,
            methods: vec![Method::Lp, Method::Lda, Method::Knn],
            // a fixed k keeps the run short; `k: None` tunes it per repetition
            lp: LpSettings {
                k: Some(10),
                ..Default::default()
            },
            knn: Default::default(),
            output_dir: None,
            dump_posteriors: false,
            deduplicate: true,
        };
        let out = run_on_dataset(&ds, &spec)?;
        let line: Vec<String> = out
            .summary
            .iter()
            .map(|m| format!("{} {:.3} ({:.3})", m.method, m.median, m.mad))
            .collect();
        println!("scenario {}: {}", s + 1, line.join(", "));
    }
    Ok(())
}

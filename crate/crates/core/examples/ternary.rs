//! Ternary diagrams of aggregated posteriors, written as SVG.
//!
//! Usage: `cargo run --example ternary [out_dir]`

use std::path::PathBuf;

use lop::viz::{render_matrix, render_ternary, DumpRow, PosteriorDump, Role, TernaryDiagram};
use lop::{gaussian_classes, LpModel, LpOptions, Scheme};

fn main() -> lop::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let train = gaussian_classes(&[30, 30, 30, 30], 50, 3.0, 5);
    let test = gaussian_classes(&[15, 15, 15, 15], 50, 3.0, 6);
    let model = LpModel::fit(&train, 6, LpOptions::default())?;

    let rows: Vec<DumpRow> = model
        .classify_rows(test.features(), Scheme::Weighted)?
        .into_iter()
        .enumerate()
        .map(|(i, c)| DumpRow {
            row_index: i,
            true_class: test.label(i),
            posterior: c.posterior.as_slice().to_vec(),
            role: Role::Test,
        })
        .collect();
    let dump = PosteriorDump { n_classes: 4, rows };
    let names: Vec<String> = ["north", "south", "east", "west"].map(String::from).to_vec();

    let single = TernaryDiagram::from_dump(&dump, 0, 1, names.clone(), &[Role::Test])?;
    render_ternary(&single, out.join("ternary_1_2.svg"))?;
    render_matrix(&dump, &names, &[Role::Test], out.join("ternary_matrix.svg"))?;
    println!("wrote ternary_1_2.svg and ternary_matrix.svg to {}", out.display());
    Ok(())
}

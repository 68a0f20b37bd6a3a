//! One core, its local space and the score/orthogonal distances.

use lop::localproj::{local_space, Core, CoreMode};
use lop::gaussian_classes;

fn main() -> lop::Result<()> {
    let ds = gaussian_classes(&[20, 20], 40, 3.0, 7);
    let k = 5;
    let core = Core::build(&ds, 0, k, CoreMode::Strict)?;
    println!("core of row 0: {:?}", core.members);
    println!("singular values: {:.3?}", core.singular_values.as_slice());

    let space = local_space(&ds, &core);
    println!("{:>4} {:>6} {:>8} {:>8}", "row", "class", "SD", "OD");
    for j in 0..ds.n() {
        let mark = if core.contains(j) { "*" } else { "" };
        println!("{:>4} {:>6} {:>8.4} {:>8.4} {mark}", j, ds.classes()[ds.label(j)], space.sd[j], space.od[j]);
    }
    // core members sit on the core plane at a common whitened distance
    println!("expected core SD: {:.4}", ((k as f64 - 1.0) / k as f64).sqrt());
    Ok(())
}

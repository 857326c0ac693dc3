//! Screened Poisson operator with collocation (GLL) and full (GL) quadrature.
//!
//! cargo run --release --example screened_poisson

use bakeoff::mesh::build_cube_mesh;
use bakeoff::operators::{Benchmark, FieldVector, OperatorInstance, Variant};

fn main() -> bakeoff::Result<()> {
    let mesh = build_cube_mesh(4, 2.0)?.perturbed(0.25, 2)?;
    let lambda = 0.5;
    println!(
        "{:>2} {:>10} {:>12} {:>12} {:>14}",
        "N", "bp", "|S*1|", "u^T A u", "|A_coll-A_full|"
    );
    for degree in 1..=6 {
        let coll = OperatorInstance::new(Benchmark::Bp35, degree, lambda, &mesh, Variant::Fused)?;
        let full = OperatorInstance::new(Benchmark::Bp3, degree, lambda, &mesh, Variant::Fused)?;
        let np = coll.points_per_element();
        let ones = FieldVector::constant(mesh.len(), np, 1.0);
        let u = FieldVector::random(mesh.len(), np, degree as u64);
        let a = coll.apply_untallied(&u)?;
        let b = full.apply_untallied(&u)?;
        let gap = a.rel_diff(&b);
        for (name, op, au) in [("3.5", &coll, &a), ("3.0", &full, &b)] {
            let s1 = op.with_lambda(0.0)?.apply_untallied(&ones)?.max_abs();
            println!("{degree:>2} {name:>10} {s1:>12.2e} {:>12.5} {gap:>14.2e}", u.dot(au));
        }
    }
    Ok(())
}

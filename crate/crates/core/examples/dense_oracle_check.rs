//! Compares matrix-free application with dense elemental matrices assembled
//! directly from the quadrature sums.
//!
//! cargo run --release --example dense_oracle_check

use bakeoff::mesh::build_cube_mesh;
use bakeoff::operators::{Benchmark, FieldVector, OperatorInstance};
use bakeoff::oracle;

fn main() -> bakeoff::Result<()> {
    let mesh = build_cube_mesh(2, 2.0)?.perturbed(0.2, 11)?;
    let lambda = 1.0;
    for bp in Benchmark::ALL {
        for degree in 1..=oracle::MAX_ORACLE_DEGREE {
            let dense = (0..mesh.len())
                .map(|e| oracle::assemble(bp, &mesh, e, degree, lambda))
                .collect::<bakeoff::Result<Vec<_>>>()?;
            for variant in bp.variants() {
                let op = OperatorInstance::new(bp, degree, lambda, &mesh, variant)?;
                let q = FieldVector::random(mesh.len(), op.points_per_element(), 42);
                let out = op.apply_untallied(&q)?;
                let mut err = 0.0f64;
                for (e, d) in dense.iter().enumerate() {
                    let want = d.matvec(q.element(e));
                    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    for (x, y) in out.element(e).iter().zip(&want) {
                        err = err.max((x - y).abs() / scale);
                    }
                }
                println!("BP{bp} N={degree} {variant:<9} max relative error {err:.2e}");
            }
        }
    }
    let a = oracle::assemble_stiffness_full_quadrature(&mesh, 0, 3, lambda)?;
    let b = oracle::assemble_stiffness_full_quadrature_composed(&mesh, 0, 3, lambda)?;
    println!(
        "two dense BP3.0 routes differ by {:.2e}",
        (&a.matrix - &b.matrix).amax()
    );
    Ok(())
}

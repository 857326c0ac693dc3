//! Matrix-free mass matrix (full Gauss-Legendre quadrature).
//!
//! cargo run --release --example mass_operator -- 6

use bakeoff::mesh::build_cube_mesh;
use bakeoff::operators::{AccessCounters, Benchmark, FieldVector, OperatorInstance, Variant};

fn main() -> bakeoff::Result<()> {
    let degree: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4);
    let mesh = build_cube_mesh(8, 2.0)?.perturbed(0.2, 1)?;
    let op = OperatorInstance::new(Benchmark::Bp1, degree, 0.0, &mesh, Variant::Fused)?;

    let ones = FieldVector::constant(mesh.len(), op.points_per_element(), 1.0);
    let mut counters = AccessCounters::default();
    let m1 = op.apply(&ones, &mut counters)?;
    println!("N = {degree}, {} elements", mesh.len());
    println!("sum of M*1 = {:.15}, mesh volume = {:.15}", m1.sum(), mesh.volume()?);
    println!(
        "one application: {} flops, {} global bytes, {} scratch bytes, {} barriers",
        counters.flops,
        counters.global_bytes(),
        counters.scratch_bytes(),
        counters.syncs
    );

    let u = FieldVector::random(mesh.len(), op.points_per_element(), 3);
    let mu = op.apply_untallied(&u)?;
    println!("u^T M u = {:.6} (positive)", u.dot(&mu));
    Ok(())
}

//! Data movement of the Baseline, Fused and SymFused kernels against the
//! minimal-traffic model.
//!
//! cargo run --release --example kernel_variants -- 12

use bakeoff::mesh::build_cube_mesh;
use bakeoff::operators::{Benchmark, OperatorInstance};
use bakeoff::perf_model::traffic;

fn main() -> bakeoff::Result<()> {
    let degree: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(8);
    let mesh = build_cube_mesh(1, 2.0)?;
    println!(
        "per element, N = {degree}\n{:>4} {:<9} {:>12} {:>12} {:>12} {:>10} {:>6} {:>10}",
        "bp", "variant", "flops", "global B", "scratch B", "I loads", "syncs", "model B"
    );
    for bp in Benchmark::ALL {
        let model = traffic(bp, degree, 1)?.bytes_per_element();
        for variant in bp.variants() {
            let c = OperatorInstance::new(bp, degree, 1.0, &mesh, variant)?.element_counters();
            println!(
                "{bp:>4} {variant:<9} {:>12} {:>12} {:>12} {:>10} {:>6} {model:>10}",
                c.flops,
                c.global_bytes(),
                c.scratch_bytes(),
                c.interp_loads,
                c.syncs
            );
        }
    }
    Ok(())
}

//! Global and shared-memory roofline bounds over N for a given bandwidth.
//!
//! cargo run --release --example roofline_series -- 549

use bakeoff::operators::{Benchmark, Variant};
use bakeoff::perf_model::{composite_roofline, roofline_series, SharedMemoryConfig};

fn main() -> bakeoff::Result<()> {
    let gbps: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(549.0);
    let shared = SharedMemoryConfig::default();
    println!("B_gl = {gbps} GB/s, B_sh = {:.4e} B/s", shared.bandwidth()?);
    for bp in Benchmark::ALL {
        let variant = if bp.interpolates() {
            Variant::SymFused
        } else {
            Variant::Fused
        };
        let s = roofline_series(bp, variant, 1..=15, gbps * 1e9, Some(&shared))?;
        println!(
            "\nBP{bp} ({variant})\n{:>3} {:>10} {:>9} {:>10} {:>10} {:>10}",
            "N", "F", "bytes", "R_global", "R_shared", "bound"
        );
        for p in &s.points {
            let shared = p.r_shared.map_or("-".to_string(), |r| format!("{:.3e}", r));
            println!(
                "{:>3} {:>10} {:>9} {:>10.3e} {:>10} {:>10.3e}",
                p.degree,
                p.flops,
                p.bytes,
                p.r_global,
                shared,
                composite_roofline(p.r_global, p.r_shared)
            );
        }
    }
    Ok(())
}

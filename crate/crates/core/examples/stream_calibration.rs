//! Host copy bandwidth, single stream and multi-threaded.
//!
//! cargo run --release --example stream_calibration -- 128

use bakeoff::perf_model::{measure_stream_bandwidth, measure_stream_bandwidth_parallel, DEFAULT_TRIALS};

fn main() -> bakeoff::Result<()> {
    let mib: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(64);
    for bytes in [mib << 20, mib << 21] {
        let c = measure_stream_bandwidth(bytes, DEFAULT_TRIALS)?;
        let times: Vec<String> = c.trial_seconds.iter().map(|t| format!("{:.2}ms", t * 1e3)).collect();
        println!(
            "{} MiB: {:.2} GB/s  (warm-up {:.2}ms; {})",
            bytes >> 20,
            c.bandwidth / 1e9,
            c.warmup_seconds * 1e3,
            times.join(" ")
        );
    }
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let c = measure_stream_bandwidth_parallel(mib << 20, DEFAULT_TRIALS, threads)?;
    println!("{threads} threads: {:.2} GB/s", c.bandwidth / 1e9);
    Ok(())
}

//! Bandwidth-bound performance model.
//!
//! Minimal global traffic per element is
//!
//! | | BP1.0 | BP3.5 | BP3.0 |
//! |---|---|---|---|
//! | read  | `N_p + N_p^GL` | `8 N_p` | `N_p + 7 N_p^GL` |
//! | write | `N_p` | `N_p` | `N_p` |
//!
//! in doubles. The global roofline is `B_gl · F / (d_r + d_w)`, the shared
//! (scratch) roofline `B_sh · F / (s_r + s_w)`, and the usable bound is the
//! smaller of the two.

use std::hint::black_box;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mesh::{HexElement, HexMesh};
use crate::operators::{Benchmark, OperatorInstance, Variant, WORD_BYTES};
use crate::reference_ops::MAX_DEGREE;

/// Peak bandwidth of the reference GPU, bytes/s.
pub const REFERENCE_PEAK_BANDWIDTH: f64 = 549e9;

/// Timed copies per calibration.
pub const DEFAULT_TRIALS: usize = 10;

const MIN_CALIBRATION_BYTES: usize = 1 << 20;

fn check(bp: Benchmark, degree: usize) -> Result<()> {
    let _ = bp;
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(invalid(format!("polynomial degree {degree} outside 1..={MAX_DEGREE}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficModel {
    pub bp: Benchmark,
    pub degree: usize,
    pub n_el: usize,
    /// Doubles read per element.
    pub reads: u64,
    /// Doubles written per element.
    pub writes: u64,
    /// `reads + writes`.
    pub total: u64,
    /// Floating-point operations per element.
    pub flops: u64,
}

impl TrafficModel {
    pub fn bytes_per_element(&self) -> u64 {
        WORD_BYTES * self.total
    }

    pub fn read_bytes(&self) -> u64 {
        WORD_BYTES * self.reads * self.n_el as u64
    }

    pub fn write_bytes(&self) -> u64 {
        WORD_BYTES * self.writes * self.n_el as u64
    }

    /// Size of the equivalent device-to-device copy, `8 N_el T / 2`: a copy
    /// of this many bytes moves the same total traffic since it both reads
    /// and writes it.
    pub fn copy_bytes(&self) -> u64 {
        WORD_BYTES * self.n_el as u64 * self.total / 2
    }
}

/// Minimal global traffic of `bp` at degree `degree` on `n_el` elements.
pub fn traffic(bp: Benchmark, degree: usize, n_el: usize) -> Result<TrafficModel> {
    check(bp, degree)?;
    let np = (degree as u64 + 1).pow(3);
    let np_gl = (degree as u64 + 2).pow(3);
    let (reads, writes) = match bp {
        Benchmark::Bp1 => (np + np_gl, np),
        Benchmark::Bp35 => (8 * np, np),
        Benchmark::Bp3 => (np + 7 * np_gl, np),
    };
    Ok(TrafficModel {
        bp,
        degree,
        n_el,
        reads,
        writes,
        total: reads + writes,
        flops: flop_model(bp, Variant::Fused, degree)?,
    })
}

/// Closed-form FLOPs per element.
///
/// A multiply-add counts 2, a pointwise scale 1, a chain-rule row 5 and the
/// `λ·J·q` update 3. Every 1D contraction producing `m` values from `n`
/// inputs costs `2 m n`.
pub fn flop_model(bp: Benchmark, variant: Variant, degree: usize) -> Result<u64> {
    check(bp, degree)?;
    if !bp.supports(variant) {
        return Err(Error::UnsupportedVariant { bp, variant });
    }
    let q = degree as u64 + 1;
    let g = degree as u64 + 2;
    // interpolation: q³g + q²g² + qg³ multiply-adds; projection the same
    let interp_and_project = 2 * 2 * (q * q * q * g + q * q * g * g + q * g * g * g);
    // six collocation contractions of n each per point, 15 chain, 3 mass
    let stiffness = |n: u64| 12 * n.pow(4) + 18 * n.pow(3);
    Ok(match bp {
        Benchmark::Bp1 => interp_and_project + g.pow(3),
        Benchmark::Bp35 => stiffness(q),
        Benchmark::Bp3 => interp_and_project + stiffness(g),
    })
}

/// Copy-bandwidth calibration on host memory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthCalibration {
    /// Bytes copied per trial; each trial reads and writes this many.
    pub bytes_copied: u64,
    pub threads: usize,
    pub warmup_seconds: f64,
    pub trial_seconds: Vec<f64>,
    /// Per-trial traffic bandwidth `2 · bytes_copied / t`, bytes/s.
    pub trial_bandwidths: Vec<f64>,
    /// Mean of the per-trial bandwidths, bytes/s.
    pub bandwidth: f64,
    pub theoretical_peak: f64,
}

/// Times `trials` copies of `bytes` bytes (after one untimed warm-up) on the
/// calling thread.
pub fn measure_stream_bandwidth(bytes: usize, trials: usize) -> Result<BandwidthCalibration> {
    calibrate(bytes, trials, 1)
}

/// Same as [`measure_stream_bandwidth`] with the copy split across `threads`
/// workers.
pub fn measure_stream_bandwidth_parallel(bytes: usize, trials: usize, threads: usize) -> Result<BandwidthCalibration> {
    if threads == 0 {
        return Err(invalid("threads must be at least 1"));
    }
    calibrate(bytes, trials, threads)
}

fn alloc(words: usize, fill: f64) -> Result<Vec<f64>> {
    let mut v = Vec::new();
    v.try_reserve_exact(words)
        .map_err(|e| Error::Resource(format!("cannot allocate {} bytes: {e}", words * 8)))?;
    v.resize(words, fill);
    Ok(v)
}

fn calibrate(bytes: usize, trials: usize, threads: usize) -> Result<BandwidthCalibration> {
    if bytes < MIN_CALIBRATION_BYTES {
        return Err(invalid(format!("calibration needs at least 1 MiB, got {bytes} bytes")));
    }
    if trials < 3 {
        return Err(invalid(format!("calibration needs at least 3 trials, got {trials}")));
    }
    let words = bytes / WORD_BYTES as usize;
    let src = alloc(words, 1.0)?;
    let mut dst = alloc(words, 0.0)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Resource(e.to_string()))?;
    let chunk = words.div_ceil(threads);
    let copy = |dst: &mut [f64]| {
        let start = Instant::now();
        if threads == 1 {
            dst.copy_from_slice(black_box(&src));
        } else {
            pool.install(|| {
                dst.par_chunks_mut(chunk)
                    .zip(src.par_chunks(chunk))
                    .for_each(|(d, s)| d.copy_from_slice(s));
            });
        }
        black_box(&dst);
        start.elapsed().as_secs_f64().max(1e-9)
    };
    let warmup_seconds = copy(&mut dst);
    let trial_seconds: Vec<f64> = (0..trials).map(|_| copy(&mut dst)).collect();
    let moved = 2.0 * (words * WORD_BYTES as usize) as f64;
    let trial_bandwidths: Vec<f64> = trial_seconds.iter().map(|t| moved / t).collect();
    let bandwidth = trial_bandwidths.iter().sum::<f64>() / trials as f64;
    Ok(BandwidthCalibration {
        bytes_copied: (words * WORD_BYTES as usize) as u64,
        threads,
        warmup_seconds,
        trial_seconds,
        trial_bandwidths,
        bandwidth,
        theoretical_peak: REFERENCE_PEAK_BANDWIDTH,
    })
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// `B_gl · F / (d_r + d_w)`.
pub fn roofline_global(bandwidth: f64, flops: f64, read_bytes: f64, write_bytes: f64) -> Result<f64> {
    positive("bandwidth", bandwidth)?;
    positive("flops", flops)?;
    positive("global bytes", read_bytes + write_bytes)?;
    Ok(bandwidth * flops / (read_bytes + write_bytes))
}

/// Scratch bandwidth estimate `#SMs × SIMD width × word bytes × clock`, bytes/s.
pub fn shared_bandwidth_ansatz(sm_count: u32, simd_width: u32, word_bytes: u32, clock_ghz: f64) -> Result<f64> {
    if sm_count == 0 || simd_width == 0 || word_bytes == 0 {
        return Err(invalid("SM count, SIMD width and word length must be positive"));
    }
    positive("clock", clock_ghz)?;
    Ok(sm_count as f64 * simd_width as f64 * word_bytes as f64 * clock_ghz * 1e9)
}

/// `B_sh · F / (s_r + s_w)`.
pub fn roofline_shared(shared_bandwidth: f64, flops: f64, scratch_reads: f64, scratch_writes: f64) -> Result<f64> {
    positive("shared bandwidth", shared_bandwidth)?;
    positive("flops", flops)?;
    positive("scratch bytes", scratch_reads + scratch_writes)?;
    Ok(shared_bandwidth * flops / (scratch_reads + scratch_writes))
}

/// The usable bound: the smaller of the two rooflines.
pub fn composite_roofline(global: f64, shared: Option<f64>) -> f64 {
    shared.map_or(global, |s| global.min(s))
}

/// Hardware constants for [`shared_bandwidth_ansatz`]. Defaults describe the
/// reference GPU (56 SMs, 32 lanes, 4-byte banks, 1.328 GHz).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharedMemoryConfig {
    pub sm_count: u32,
    pub simd_width: u32,
    pub word_bytes: u32,
    pub clock_ghz: f64,
}

impl Default for SharedMemoryConfig {
    fn default() -> Self {
        Self {
            sm_count: 56,
            simd_width: 32,
            word_bytes: 4,
            clock_ghz: 1.328,
        }
    }
}

impl SharedMemoryConfig {
    pub fn bandwidth(&self) -> Result<f64> {
        shared_bandwidth_ansatz(self.sm_count, self.simd_width, self.word_bytes, self.clock_ghz)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RooflinePoint {
    pub degree: usize,
    /// FLOPs per element.
    pub flops: u64,
    /// Minimal global bytes per element.
    pub bytes: u64,
    pub r_global: f64,
    pub r_shared: Option<f64>,
    /// Measured FLOPS/s, when a benchmark run supplied one.
    pub achieved: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RooflineSeries {
    pub bp: Benchmark,
    pub variant: Variant,
    /// `B_gl`, bytes/s.
    pub bandwidth: f64,
    /// `B_sh`, bytes/s; absent for BP3.5.
    pub shared_bandwidth: Option<f64>,
    pub points: Vec<RooflinePoint>,
}

/// Scratch bytes per element of `variant`, from an instrumented application
/// on one reference element.
pub fn scratch_bytes_per_element(bp: Benchmark, variant: Variant, degree: usize) -> Result<(u64, u64)> {
    let mesh = HexMesh::from_elements(vec![HexElement::reference()], 2.0);
    let op = OperatorInstance::new(bp, degree, 1.0, &mesh, variant)?;
    let c = op.element_counters();
    Ok((c.scratch_reads, c.scratch_writes))
}

/// Roofline bounds over `degrees`. The shared roofline is evaluated for the
/// interpolating benchmarks only, with scratch traffic of `variant`.
pub fn roofline_series(
    bp: Benchmark,
    variant: Variant,
    degrees: impl IntoIterator<Item = usize>,
    bandwidth: f64,
    shared: Option<&SharedMemoryConfig>,
) -> Result<RooflineSeries> {
    if !bp.supports(variant) {
        return Err(Error::UnsupportedVariant { bp, variant });
    }
    let shared_bandwidth = match shared {
        Some(cfg) if bp.interpolates() => Some(cfg.bandwidth()?),
        _ => None,
    };
    let mut points = Vec::new();
    for degree in degrees {
        let t = traffic(bp, degree, 1)?;
        let flops = flop_model(bp, variant, degree)?;
        let r_global = roofline_global(
            bandwidth,
            flops as f64,
            (WORD_BYTES * t.reads) as f64,
            (WORD_BYTES * t.writes) as f64,
        )?;
        let r_shared = match shared_bandwidth {
            Some(bsh) => {
                let (sr, sw) = scratch_bytes_per_element(bp, variant, degree)?;
                Some(roofline_shared(bsh, flops as f64, sr as f64, sw as f64)?)
            }
            None => None,
        };
        points.push(RooflinePoint {
            degree,
            flops,
            bytes: t.bytes_per_element(),
            r_global,
            r_shared,
            achieved: None,
        });
    }
    Ok(RooflineSeries {
        bp,
        variant,
        bandwidth,
        shared_bandwidth,
        points,
    })
}

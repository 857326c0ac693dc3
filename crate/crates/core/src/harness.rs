//! Verification, timing and roofline runs behind the `bakeoff` binary.
//!
//! Everything here returns plain report values; reading flags and writing
//! files is left to the caller.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mesh::{build_cube_mesh, HexMesh};
use crate::operators::{AccessCounters, Benchmark, FieldVector, OperatorInstance, Variant, WORD_BYTES};
use crate::oracle::{self, MAX_ORACLE_DEGREE};
use crate::perf_model::{
    self, flop_model, roofline_global, roofline_series, roofline_shared, traffic, BandwidthCalibration, RooflineSeries,
    SharedMemoryConfig,
};
use crate::reference_ops::MAX_DEGREE;

/// Side length of every generated mesh.
pub const MESH_EXTENT: f64 = 2.0;
/// Vertex perturbation used by `verify` so the geometry is not affine.
pub const VERIFY_PERTURBATION: f64 = 0.2;
/// Bytes per copy when a run calibrates bandwidth itself.
pub const DEFAULT_CALIBRATION_BYTES: usize = 64 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum BpSelection {
    One(Benchmark),
    All,
}

impl BpSelection {
    pub fn benchmarks(self) -> Vec<Benchmark> {
        match self {
            BpSelection::One(bp) => vec![bp],
            BpSelection::All => Benchmark::ALL.to_vec(),
        }
    }
}

impl fmt::Display for BpSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BpSelection::One(bp) => write!(f, "{bp}"),
            BpSelection::All => f.write_str("all"),
        }
    }
}

impl FromStr for BpSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("all") {
            Ok(BpSelection::All)
        } else {
            s.parse().map(BpSelection::One)
        }
    }
}

impl From<BpSelection> for String {
    fn from(b: BpSelection) -> String {
        b.to_string()
    }
}

impl TryFrom<String> for BpSelection {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Inclusive degree range, written `A..B` (or a single degree `A`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct DegreeRange {
    pub first: usize,
    pub last: usize,
}

impl DegreeRange {
    pub fn new(first: usize, last: usize) -> Result<Self> {
        if first < 1 || last > MAX_DEGREE || first > last {
            return Err(invalid(format!(
                "degree range {first}..{last} must satisfy 1 <= A <= B <= {MAX_DEGREE}"
            )));
        }
        Ok(Self { first, last })
    }

    pub fn single(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last
    }
}

impl fmt::Display for DegreeRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.first, self.last)
    }
}

impl FromStr for DegreeRange {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| invalid(format!("expected A..B with integer degrees, got '{s}'")))
        };
        match s.split_once("..") {
            Some((a, b)) => Self::new(parse(a)?, parse(b.trim_start_matches('='))?),
            None => Self::single(parse(s)?),
        }
    }
}

impl From<DegreeRange> for String {
    fn from(d: DegreeRange) -> String {
        d.to_string()
    }
}

impl TryFrom<String> for DegreeRange {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Named mesh sizes: `small` is 8³ elements, `large` 16³.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshPreset {
    Small,
    Large,
}

impl MeshPreset {
    pub fn per_side(self) -> usize {
        match self {
            MeshPreset::Small => 8,
            MeshPreset::Large => 16,
        }
    }
}

impl FromStr for MeshPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "small" => Ok(MeshPreset::Small),
            "large" => Ok(MeshPreset::Large),
            _ => Err(invalid(format!("unknown mesh preset '{s}' (expected small or large)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(invalid(format!("unknown format '{s}' (expected json or csv)"))),
        }
    }
}

/// Where `B_gl` comes from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "source", content = "bytes_per_second")]
pub enum BandwidthSource {
    Supplied(f64),
    Measured,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub bp: BpSelection,
    pub degrees: DegreeRange,
    /// Elements per side of the cube mesh.
    pub elements_per_side: usize,
    /// `None` runs every variant the benchmark supports.
    pub variant: Option<Variant>,
    pub lambda: f64,
    pub repeats: usize,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            bp: BpSelection::All,
            degrees: DegreeRange { first: 1, last: 4 },
            elements_per_side: MeshPreset::Small.per_side(),
            variant: None,
            lambda: 1.0,
            repeats: 5,
            threads: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        DegreeRange::new(self.degrees.first, self.degrees.last)?;
        if self.elements_per_side == 0 {
            return Err(invalid("elements per side must be at least 1"));
        }
        if self.repeats == 0 {
            return Err(invalid("repeats must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads must be at least 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        if let Some(v) = self.variant {
            for bp in self.bp.benchmarks() {
                if !bp.supports(v) {
                    return Err(Error::UnsupportedVariant { bp, variant: v });
                }
            }
        }
        Ok(())
    }

    fn variants(&self, bp: Benchmark) -> Vec<Variant> {
        match self.variant {
            Some(v) => vec![v],
            None => bp.variants(),
        }
    }

    /// Runs `f` on a pool of `threads` workers, or inline.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> Result<R> {
        match self.threads {
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Resource(e.to_string()))?;
                Ok(pool.install(f))
            }
            None => Ok(f()),
        }
    }
}

/// One outcome of [`run_verify`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckResult {
    pub bp: Benchmark,
    pub degree: usize,
    pub variant: Variant,
    pub check: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyReport {
    pub config: RunConfig,
    pub n_el: usize,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn oracle_tolerance(bp: Benchmark) -> f64 {
    match bp {
        Benchmark::Bp1 => 1e-12,
        Benchmark::Bp35 => 1e-11,
        Benchmark::Bp3 => 1e-10,
    }
}

/// The perturbed cube mesh that `verify` runs on.
pub fn verify_mesh(config: &RunConfig) -> Result<HexMesh> {
    let mesh = build_cube_mesh(config.elements_per_side, MESH_EXTENT)?;
    if config.elements_per_side > 1 {
        mesh.perturbed(VERIFY_PERTURBATION, config.seed)
    } else {
        Ok(mesh)
    }
}

/// Runs the oracle, symmetry, null-space, conservation, variant-equivalence
/// and counter checks over the configured grid.
pub fn run_verify(config: &RunConfig) -> Result<VerifyReport> {
    config.validate()?;
    let mesh = verify_mesh(config)?;
    let volume = mesh.volume()?;
    let perturbed = config.elements_per_side > 1;
    let checks = config.install(|| -> Result<Vec<CheckResult>> {
        let mut checks = Vec::new();
        for bp in config.bp.benchmarks() {
            for degree in config.degrees.iter() {
                let dense = if degree <= MAX_ORACLE_DEGREE {
                    Some(
                        (0..mesh.len())
                            .map(|e| oracle::assemble(bp, &mesh, e, degree, config.lambda))
                            .collect::<Result<Vec<_>>>()?,
                    )
                } else {
                    None
                };
                let baseline = OperatorInstance::new(bp, degree, config.lambda, &mesh, Variant::Baseline)?;
                let np = baseline.points_per_element();
                let u = FieldVector::random(mesh.len(), np, config.seed.wrapping_mul(31).wrapping_add(degree as u64));
                let w = FieldVector::random(
                    mesh.len(),
                    np,
                    config.seed.wrapping_mul(37).wrapping_add(1000 + degree as u64),
                );
                let base_out = baseline.apply_untallied(&u)?;
                for variant in config.variants(bp) {
                    let op = baseline.with_variant(variant)?;
                    let mut push = |check: &str, max_error: f64, tolerance: f64| {
                        checks.push(CheckResult {
                            bp,
                            degree,
                            variant,
                            check: check.to_string(),
                            max_error,
                            tolerance,
                            passed: max_error <= tolerance,
                        })
                    };
                    let au = op.apply_untallied(&u)?;
                    if let Some(dense) = &dense {
                        let mut err = 0.0f64;
                        for (e, d) in dense.iter().enumerate() {
                            let want = d.matvec(u.element(e));
                            let scale = want.iter().fold(f64::MIN_POSITIVE, |m, x| m.max(x.abs()));
                            let diff = au
                                .element(e)
                                .iter()
                                .zip(&want)
                                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                            err = err.max(diff / scale);
                        }
                        push("oracle", err, oracle_tolerance(bp));
                    }
                    let aw = op.apply_untallied(&w)?;
                    let sym = (au.dot(&w) - u.dot(&aw)).abs() / (au.norm() * w.norm()).max(f64::MIN_POSITIVE);
                    push("symmetry", sym, 1e-11);
                    push("positive_semidefinite", (-au.dot(&u)).max(0.0), 1e-10);
                    push("variant_equivalence", au.rel_diff(&base_out), 1e-12);

                    let ones = FieldVector::constant(mesh.len(), np, 1.0);
                    if bp != Benchmark::Bp1 {
                        let s = op.with_lambda(0.0)?.apply_untallied(&ones)?;
                        push("null_space", s.max_abs(), 1e-10);
                    }
                    // two GLL points integrate |J| exactly only on affine elements
                    if bp != Benchmark::Bp35 || degree >= 2 || !perturbed {
                        let mut total = op.with_lambda(1.0)?.apply_untallied(&ones)?.sum();
                        if bp != Benchmark::Bp1 {
                            total -= op.with_lambda(0.0)?.apply_untallied(&ones)?.sum();
                        }
                        push("conservation", (total - volume).abs(), 1e-10);
                    }

                    let c = op.element_counters();
                    let t = traffic(bp, degree, 1)?;
                    let model = flop_model(bp, variant, degree)?;
                    push("flop_model", c.flops.abs_diff(model) as f64, 0.0);
                    let table = (WORD_BYTES * t.total) as f64;
                    if variant == Variant::Baseline {
                        // must move strictly more than the minimum
                        let excess = c.global_bytes() as f64 - table;
                        push(
                            "baseline_excess_traffic",
                            if excess > 0.0 { 0.0 } else { 1.0 - excess },
                            0.0,
                        );
                    } else {
                        push("minimal_traffic", (c.global_bytes() as f64 - table).abs(), 0.0);
                    }
                }
            }
        }
        Ok(checks)
    })??;
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        config: config.clone(),
        n_el: mesh.len(),
        checks,
        passed,
    })
}

/// Host description for reports.
pub fn machine_descriptor() -> String {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{}-{} cores={} pool_threads={}",
        std::env::consts::ARCH,
        std::env::consts::OS,
        cores,
        rayon::current_num_threads()
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchRun {
    pub bp: Benchmark,
    pub degree: usize,
    pub variant: Variant,
    pub n_el: usize,
    /// Seconds per timed application, warm-up excluded.
    pub wall_times: Vec<f64>,
    pub mean_seconds: f64,
    pub median_seconds: f64,
    /// Counted events of one application.
    pub counters: AccessCounters,
    /// `counters.flops / mean_seconds`.
    pub achieved_flops: f64,
    /// Minimal global bytes of one application.
    pub model_global_bytes: u64,
    pub r_global: f64,
    pub r_shared: Option<f64>,
    /// Symmetry of the operator on a random pair, relative.
    pub symmetry_error: f64,
    pub verified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchReport {
    pub config: RunConfig,
    pub machine: String,
    /// `B_gl`, bytes/s.
    pub bandwidth: f64,
    pub bandwidth_source: BandwidthSource,
    pub shared_bandwidth: f64,
    pub runs: Vec<BenchRun>,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Resolves `source` to bytes/s, calibrating on this machine if asked.
pub fn resolve_bandwidth(
    source: BandwidthSource,
    threads: Option<usize>,
) -> Result<(f64, Option<BandwidthCalibration>)> {
    match source {
        BandwidthSource::Supplied(b) => {
            if !(b > 0.0 && b.is_finite()) {
                return Err(invalid(format!("bandwidth must be positive, got {b}")));
            }
            Ok((b, None))
        }
        BandwidthSource::Measured => {
            let cal = match threads {
                Some(t) if t > 1 => perf_model::measure_stream_bandwidth_parallel(
                    DEFAULT_CALIBRATION_BYTES,
                    perf_model::DEFAULT_TRIALS,
                    t,
                )?,
                _ => perf_model::measure_stream_bandwidth(DEFAULT_CALIBRATION_BYTES, perf_model::DEFAULT_TRIALS)?,
            };
            Ok((cal.bandwidth, Some(cal)))
        }
    }
}

/// Times `repeats` applications (after one warm-up) of every configured
/// benchmark, degree and variant on an unperturbed cube mesh.
pub fn run_bench(config: &RunConfig, bandwidth: BandwidthSource) -> Result<BenchReport> {
    config.validate()?;
    let (b_gl, _) = resolve_bandwidth(bandwidth, config.threads)?;
    let shared = SharedMemoryConfig::default();
    let b_sh = shared.bandwidth()?;
    let mesh = build_cube_mesh(config.elements_per_side, MESH_EXTENT)?;
    let runs = config.install(|| -> Result<Vec<BenchRun>> {
        let mut runs = Vec::new();
        for bp in config.bp.benchmarks() {
            for degree in config.degrees.iter() {
                for variant in config.variants(bp) {
                    runs.push(bench_one(config, &mesh, bp, degree, variant, b_gl, b_sh)?);
                }
            }
        }
        Ok(runs)
    })??;
    Ok(BenchReport {
        config: config.clone(),
        machine: machine_descriptor(),
        bandwidth: b_gl,
        bandwidth_source: bandwidth,
        shared_bandwidth: b_sh,
        runs,
    })
}

fn bench_one(
    config: &RunConfig,
    mesh: &HexMesh,
    bp: Benchmark,
    degree: usize,
    variant: Variant,
    b_gl: f64,
    b_sh: f64,
) -> Result<BenchRun> {
    let op = OperatorInstance::new(bp, degree, config.lambda, mesh, variant)?;
    let np = op.points_per_element();
    let q = FieldVector::random(mesh.len(), np, config.seed);
    let mut out = op.zeros();
    op.apply_into(&q, &mut out)?;
    let wall_times = (0..config.repeats)
        .map(|_| {
            let start = Instant::now();
            op.apply_into(&q, &mut out)?;
            Ok(start.elapsed().as_secs_f64().max(1e-9))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean_seconds = wall_times.iter().sum::<f64>() / wall_times.len() as f64;
    let mut counters = AccessCounters::default();
    let aq = op.apply(&q, &mut counters)?;
    let w = FieldVector::random(mesh.len(), np, config.seed ^ 0x5eed);
    let aw = op.apply_untallied(&w)?;
    let symmetry_error = (aq.dot(&w) - q.dot(&aw)).abs() / (aq.norm() * w.norm()).max(f64::MIN_POSITIVE);
    let t = traffic(bp, degree, mesh.len())?;
    let flops = counters.flops as f64;
    let r_global = roofline_global(b_gl, flops, t.read_bytes() as f64, t.write_bytes() as f64)?;
    let r_shared = if bp.interpolates() {
        Some(roofline_shared(
            b_sh,
            flops,
            counters.scratch_reads as f64,
            counters.scratch_writes as f64,
        )?)
    } else {
        None
    };
    Ok(BenchRun {
        bp,
        degree,
        variant,
        n_el: mesh.len(),
        median_seconds: median(&wall_times),
        mean_seconds,
        achieved_flops: flops / mean_seconds,
        wall_times,
        counters,
        model_global_bytes: t.read_bytes() + t.write_bytes(),
        r_global,
        r_shared,
        symmetry_error,
        verified: symmetry_error <= 1e-11 && aq.data().iter().all(|v| v.is_finite()),
    })
}

/// Fixed column order of bench CSV output.
pub const BENCH_CSV_COLUMNS: [&str; 15] = [
    "bp",
    "N",
    "variant",
    "n_el",
    "mean_seconds",
    "median_seconds",
    "flops",
    "achieved_flops",
    "global_bytes",
    "scratch_bytes",
    "model_global_bytes",
    "syncs",
    "R_global",
    "R_shared",
    "verified",
];

pub fn bench_csv(report: &BenchReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BENCH_CSV_COLUMNS).map_err(csv_err)?;
    for r in &report.runs {
        w.write_record([
            r.bp.to_string(),
            r.degree.to_string(),
            r.variant.to_string(),
            r.n_el.to_string(),
            r.mean_seconds.to_string(),
            r.median_seconds.to_string(),
            r.counters.flops.to_string(),
            r.achieved_flops.to_string(),
            r.counters.global_bytes().to_string(),
            r.counters.scratch_bytes().to_string(),
            r.model_global_bytes.to_string(),
            r.counters.syncs.to_string(),
            r.r_global.to_string(),
            r.r_shared.map_or(String::new(), |v| v.to_string()),
            r.verified.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn verify_csv(report: &VerifyReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bp", "N", "variant", "check", "max_error", "tolerance", "passed"])
        .map_err(csv_err)?;
    for c in &report.checks {
        w.write_record([
            c.bp.to_string(),
            c.degree.to_string(),
            c.variant.to_string(),
            c.check.clone(),
            format!("{:e}", c.max_error),
            format!("{:e}", c.tolerance),
            c.passed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Resource(e.to_string())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Resource(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Resource(e.to_string()))
}

/// Roofline series for one benchmark plus how its bandwidth was obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RooflineReport {
    pub bandwidth_source: BandwidthSource,
    pub calibration: Option<BandwidthCalibration>,
    pub series: RooflineSeries,
}

/// Model series per benchmark. With `timed`, the `achieved` column is filled
/// by a bench run on the configured mesh.
pub fn run_roofline(config: &RunConfig, bandwidth: BandwidthSource, timed: bool) -> Result<Vec<RooflineReport>> {
    config.validate()?;
    let (b_gl, calibration) = resolve_bandwidth(bandwidth, config.threads)?;
    let shared = SharedMemoryConfig::default();
    let b_sh = shared.bandwidth()?;
    let mesh = if timed {
        Some(build_cube_mesh(config.elements_per_side, MESH_EXTENT)?)
    } else {
        None
    };
    let mut reports = Vec::new();
    for bp in config.bp.benchmarks() {
        let variant = config.variant.unwrap_or(Variant::Fused);
        let mut series = roofline_series(bp, variant, config.degrees.iter(), b_gl, Some(&shared))?;
        if let Some(mesh) = &mesh {
            config.install(|| -> Result<()> {
                for p in &mut series.points {
                    let run = bench_one(config, mesh, bp, p.degree, variant, b_gl, b_sh)?;
                    p.achieved = Some(run.achieved_flops);
                }
                Ok(())
            })??;
        }
        reports.push(RooflineReport {
            bandwidth_source: bandwidth,
            calibration: calibration.clone(),
            series,
        });
    }
    Ok(reports)
}

/// CSV with `#` metadata lines. Columns are `N,F,bytes,R_global,R_shared,achieved`,
/// without `R_shared` when the series has no shared roofline.
pub fn roofline_csv(report: &RooflineReport) -> Result<String> {
    let s = &report.series;
    let mut out = String::new();
    out.push_str(&format!("# bp={}\n", s.bp));
    out.push_str(&format!("# variant={}\n", s.variant));
    out.push_str(&format!("# bandwidth_bytes_per_s={}\n", s.bandwidth));
    let source = match report.bandwidth_source {
        BandwidthSource::Supplied(_) => "supplied",
        BandwidthSource::Measured => "measured",
    };
    out.push_str(&format!("# bandwidth_source={source}\n"));
    if let Some(bsh) = s.shared_bandwidth {
        out.push_str(&format!("# shared_bandwidth_bytes_per_s={bsh}\n"));
    }
    let with_shared = s.shared_bandwidth.is_some();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["N", "F", "bytes", "R_global"];
    if with_shared {
        header.push("R_shared");
    }
    header.push("achieved");
    w.write_record(&header).map_err(csv_err)?;
    for p in &s.points {
        let mut row = vec![
            p.degree.to_string(),
            p.flops.to_string(),
            p.bytes.to_string(),
            p.r_global.to_string(),
        ];
        if with_shared {
            row.push(p.r_shared.map_or(String::new(), |v| v.to_string()));
        }
        row.push(p.achieved.map_or(String::new(), |v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    out.push_str(&finish(w)?);
    Ok(out)
}

/// File name used for a roofline series inside an output directory.
pub fn roofline_file_name(report: &RooflineReport, format: OutputFormat) -> String {
    let ext = match format {
        OutputFormat::Json => "json",
        OutputFormat::Csv => "csv",
    };
    format!("roofline_bp{}_{}.{ext}", report.series.bp, report.series.variant)
}

/// Applies `op` on a dedicated pool of `threads` workers, instrumented.
pub fn apply_on_threads(
    op: &OperatorInstance,
    q: &FieldVector,
    threads: usize,
) -> Result<(FieldVector, AccessCounters)> {
    let config = RunConfig {
        threads: Some(threads),
        ..RunConfig::default()
    };
    config.install(|| {
        let mut c = AccessCounters::default();
        op.apply(q, &mut c).map(|out| (out, c))
    })?
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig {
            degrees: DegreeRange::new(1, 2).unwrap(),
            elements_per_side: 2,
            repeats: 2,
            ..RunConfig::default()
        }
    }

    #[test]
    fn parse_selections() {
        assert_eq!("all".parse::<BpSelection>().unwrap(), BpSelection::All);
        assert_eq!("3.5".parse::<BpSelection>().unwrap(), BpSelection::One(Benchmark::Bp35));
        assert_eq!(
            "1..15".parse::<DegreeRange>().unwrap(),
            DegreeRange { first: 1, last: 15 }
        );
        assert_eq!("4".parse::<DegreeRange>().unwrap(), DegreeRange { first: 4, last: 4 });
        assert_eq!("2..=5".parse::<DegreeRange>().unwrap().iter().count(), 4);
        for bad in ["0..3", "3..1", "1..16", "a..b", "1-4", ""] {
            assert!(bad.parse::<DegreeRange>().is_err(), "{bad}");
        }
        assert_eq!("large".parse::<MeshPreset>().unwrap().per_side(), 16);
    }

    #[test]
    fn config_round_trips_and_rejects_unknown_fields() {
        let c = RunConfig {
            variant: Some(Variant::SymFused),
            bp: BpSelection::One(Benchmark::Bp3),
            threads: Some(3),
            ..small()
        };
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), c);
        let extra = json.replacen('{', "{\"colour\":1,", 1);
        assert!(serde_json::from_str::<RunConfig>(&extra).is_err());
    }

    #[test]
    fn validation() {
        let bad = RunConfig {
            bp: BpSelection::All,
            variant: Some(Variant::SymFused),
            ..small()
        };
        assert!(matches!(bad.validate(), Err(Error::UnsupportedVariant { .. })));
        assert!(RunConfig { repeats: 0, ..small() }.validate().is_err());
        assert!(RunConfig {
            threads: Some(0),
            ..small()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn verify_passes_and_is_reproducible() {
        let a = run_verify(&small()).unwrap();
        assert!(a.passed, "{:?}", a.failures().collect::<Vec<_>>());
        let b = run_verify(&small()).unwrap();
        assert_eq!(a, b);
        let csv = verify_csv(&a).unwrap();
        assert_eq!(csv.lines().count(), a.checks.len() + 1);
    }

    #[test]
    fn bench_counts_are_deterministic() {
        let c = RunConfig {
            bp: BpSelection::One(Benchmark::Bp1),
            ..small()
        };
        let a = run_bench(&c, BandwidthSource::Supplied(1e10)).unwrap();
        let b = run_bench(&c, BandwidthSource::Supplied(1e10)).unwrap();
        assert_eq!(a.runs.len(), 2 * 3);
        for (x, y) in a.runs.iter().zip(&b.runs) {
            assert_eq!(x.counters, y.counters);
            assert_eq!(x.wall_times.len(), 2);
            assert!(x.verified);
            assert!((x.achieved_flops - x.counters.flops as f64 / x.mean_seconds).abs() <= 1e-9 * x.achieved_flops);
        }
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<BenchReport>(&json).unwrap(), a);
        let csv = bench_csv(&a).unwrap();
        assert!(csv.starts_with(&BENCH_CSV_COLUMNS.join(",")));
    }

    #[test]
    fn roofline_csv_layout() {
        let c = RunConfig {
            degrees: DegreeRange::new(1, 15).unwrap(),
            ..small()
        };
        let reports = run_roofline(&c, BandwidthSource::Supplied(549e9), false).unwrap();
        assert_eq!(reports.len(), 3);
        for r in &reports {
            let csv = roofline_csv(r).unwrap();
            let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
            if r.series.bp == Benchmark::Bp35 {
                assert_eq!(header, "N,F,bytes,R_global,achieved");
            } else {
                assert_eq!(header, "N,F,bytes,R_global,R_shared,achieved");
            }
            assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 16);
            assert!(csv.contains("# bandwidth_bytes_per_s=549000000000"));
        }
    }
}

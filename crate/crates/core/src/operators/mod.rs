//! Matrix-free, element-by-element application of the three benchmark
//! operators:
//!
//! | benchmark | operator per element | points |
//! |-----------|----------------------|--------|
//! | BP1.0 | `Iᵀ J I` (mass) | GL |
//! | BP3.5 | `Dᵀ G D + λ J` (collocation screened Poisson) | GLL |
//! | BP3.0 | `Iᵀ D̃ᵀ G D̃ I + λ Iᵀ J I` (full quadrature) | GL |
//!
//! Elements never interact, so application is element-parallel on the
//! current rayon pool. Counter totals are integer sums and therefore do not
//! depend on the pool size.

mod counters;
mod kernels;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mesh::{geometric_factors, GeometricFactors, HexMesh};
use crate::quadrature::{gl_rule, gll_rule, RuleKind};
use crate::reference_ops::{contract_dim, diff_matrix_gl, diff_matrix_gll, interp_matrix, OperatorMatrix, Tensor3};

pub use counters::{AccessCounters, Tally, Untallied, WORD_BYTES};
use kernels::{KernelPlan, Workspace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Benchmark {
    /// Mass matrix with full GL quadrature.
    #[serde(rename = "1.0")]
    Bp1,
    /// Screened Poisson with GLL collocation quadrature.
    #[serde(rename = "3.5")]
    Bp35,
    /// Screened Poisson with full GL quadrature.
    #[serde(rename = "3.0")]
    Bp3,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [Benchmark::Bp1, Benchmark::Bp35, Benchmark::Bp3];

    /// Point set the geometric factors live on.
    pub fn point_set(self) -> RuleKind {
        match self {
            Benchmark::Bp35 => RuleKind::Gll,
            Benchmark::Bp1 | Benchmark::Bp3 => RuleKind::Gl,
        }
    }

    /// Whether the operator interpolates to GL points (and so has a SymFused form).
    pub fn interpolates(self) -> bool {
        self.point_set() == RuleKind::Gl
    }

    pub fn supports(self, variant: Variant) -> bool {
        variant != Variant::SymFused || self.interpolates()
    }

    pub fn variants(self) -> Vec<Variant> {
        Variant::ALL.into_iter().filter(|v| self.supports(*v)).collect()
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Benchmark::Bp1 => "1.0",
            Benchmark::Bp35 => "3.5",
            Benchmark::Bp3 => "3.0",
        })
    }
}

impl FromStr for Benchmark {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().trim_start_matches("bp") {
            "1" | "1.0" => Ok(Benchmark::Bp1),
            "3.5" => Ok(Benchmark::Bp35),
            "3" | "3.0" => Ok(Benchmark::Bp3),
            _ => Err(invalid(format!("unknown benchmark '{s}' (expected 1.0, 3.5 or 3.0)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Baseline,
    Fused,
    SymFused,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Baseline, Variant::Fused, Variant::SymFused];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Variant::Baseline => "baseline",
            Variant::Fused => "fused",
            Variant::SymFused => "symfused",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "baseline" => Ok(Variant::Baseline),
            "fused" => Ok(Variant::Fused),
            "symfused" | "sym-fused" | "sym_fused" => Ok(Variant::SymFused),
            _ => Err(invalid(format!(
                "unknown variant '{s}' (expected baseline, fused or symfused)"
            ))),
        }
    }
}

/// Element-blocked nodal values, lexicographic `(k, j, i)` within an element.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldVector {
    n_el: usize,
    n_p: usize,
    data: Vec<f64>,
}

impl FieldVector {
    pub fn zeros(n_el: usize, n_p: usize) -> Self {
        Self {
            n_el,
            n_p,
            data: vec![0.0; n_el * n_p],
        }
    }

    pub fn from_vec(n_el: usize, n_p: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_el * n_p {
            return Err(Error::Shape {
                what: "field vector",
                expected: n_el * n_p,
                found: data.len(),
            });
        }
        Ok(Self { n_el, n_p, data })
    }

    pub fn constant(n_el: usize, n_p: usize, value: f64) -> Self {
        Self {
            n_el,
            n_p,
            data: vec![value; n_el * n_p],
        }
    }

    /// Uniform entries in `[-1, 1)` from a seeded generator.
    pub fn random(n_el: usize, n_p: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n_el * n_p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Self { n_el, n_p, data }
    }

    pub fn from_fn(n_el: usize, n_p: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let data = (0..n_el)
            .flat_map(|e| (0..n_p).map(move |p| (e, p)))
            .map(|(e, p)| f(e, p))
            .collect();
        Self { n_el, n_p, data }
    }

    pub fn n_el(&self) -> usize {
        self.n_el
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn element(&self, e: usize) -> &[f64] {
        &self.data[e * self.n_p..(e + 1) * self.n_p]
    }

    pub fn dot(&self, other: &FieldVector) -> f64 {
        assert_eq!(self.len(), other.len());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// `max |self - other| / max(max |other|, tiny)`.
    pub fn rel_diff(&self, other: &FieldVector) -> f64 {
        assert_eq!(self.len(), other.len());
        let diff = self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        diff / other.max_abs().max(f64::MIN_POSITIVE)
    }
}

/// A benchmark operator bound to a mesh and degree.
#[derive(Clone, Debug)]
pub struct OperatorInstance {
    pub bp: Benchmark,
    pub degree: usize,
    pub lambda: f64,
    pub variant: Variant,
    interp: OperatorMatrix,
    diff: Option<OperatorMatrix>,
    factors: GeometricFactors,
}

impl OperatorInstance {
    pub fn new(bp: Benchmark, degree: usize, lambda: f64, mesh: &HexMesh, variant: Variant) -> Result<Self> {
        if !bp.supports(variant) {
            return Err(Error::UnsupportedVariant { bp, variant });
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda must be finite and non-negative, got {lambda}")));
        }
        let interp = interp_matrix(degree)?;
        let (diff, rule) = match bp {
            Benchmark::Bp1 => (None, gl_rule(degree + 2)?),
            Benchmark::Bp35 => (Some(diff_matrix_gll(degree)?), gll_rule(degree + 1)?),
            Benchmark::Bp3 => (Some(diff_matrix_gl(degree)?), gl_rule(degree + 2)?),
        };
        let factors = geometric_factors(mesh, &rule)?;
        Ok(Self {
            bp,
            degree,
            lambda,
            variant,
            interp,
            diff,
            factors,
        })
    }

    /// Same operator and geometry, different kernel variant.
    pub fn with_variant(&self, variant: Variant) -> Result<Self> {
        if !self.bp.supports(variant) {
            return Err(Error::UnsupportedVariant { bp: self.bp, variant });
        }
        Ok(Self {
            variant,
            ..self.clone()
        })
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda must be finite and non-negative, got {lambda}")));
        }
        Ok(Self { lambda, ..self.clone() })
    }

    pub fn n_el(&self) -> usize {
        self.factors.n_el()
    }

    /// GLL points per element, `(N + 1)^3`.
    pub fn points_per_element(&self) -> usize {
        (self.degree + 1).pow(3)
    }

    pub fn interp(&self) -> &OperatorMatrix {
        &self.interp
    }

    pub fn diff(&self) -> Option<&OperatorMatrix> {
        self.diff.as_ref()
    }

    pub fn factors(&self) -> &GeometricFactors {
        &self.factors
    }

    pub fn zeros(&self) -> FieldVector {
        FieldVector::zeros(self.n_el(), self.points_per_element())
    }

    fn plan(&self) -> KernelPlan<'_> {
        KernelPlan {
            bp: self.bp,
            variant: self.variant,
            lambda: self.lambda,
            nq: self.degree + 1,
            ng: self.degree + 2,
            interp: &self.interp,
            diff: self.diff.as_ref(),
        }
    }

    fn check_input(&self, q: &FieldVector) -> Result<()> {
        let np = self.points_per_element();
        if q.n_p() != np || q.n_el() != self.n_el() {
            return Err(Error::Shape {
                what: "operator input",
                expected: self.n_el() * np,
                found: q.len(),
            });
        }
        if q.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// Applies the operator, adding this application's events to `counters`.
    pub fn apply(&self, q: &FieldVector, counters: &mut AccessCounters) -> Result<FieldVector> {
        self.check_input(q)?;
        let plan = self.plan();
        let np = self.points_per_element();
        let mut out = self.zeros();
        let total = out
            .data
            .par_chunks_mut(np)
            .zip(q.data.par_chunks(np))
            .enumerate()
            .fold(
                || (Workspace::default(), AccessCounters::default()),
                |(mut ws, mut c), (e, (o, qe))| {
                    plan.apply(qe, self.factors.element(e), o, &mut ws, &mut c);
                    (ws, c)
                },
            )
            .map(|(_, c)| c)
            .reduce(AccessCounters::default, |a, b| a + b);
        *counters += total;
        Ok(out)
    }

    /// Applies the operator without instrumentation.
    pub fn apply_untallied(&self, q: &FieldVector) -> Result<FieldVector> {
        let mut out = self.zeros();
        self.apply_into(q, &mut out)?;
        Ok(out)
    }

    /// Uninstrumented application into a preallocated output.
    pub fn apply_into(&self, q: &FieldVector, out: &mut FieldVector) -> Result<()> {
        self.check_input(q)?;
        if out.len() != q.len() {
            return Err(Error::Shape {
                what: "operator output",
                expected: q.len(),
                found: out.len(),
            });
        }
        let plan = self.plan();
        let np = self.points_per_element();
        out.data
            .par_chunks_mut(np)
            .zip(q.data.par_chunks(np))
            .enumerate()
            .for_each_init(Workspace::default, |ws, (e, (o, qe))| {
                plan.apply(qe, self.factors.element(e), o, ws, &mut Untallied);
            });
        Ok(())
    }

    /// Counters for a single element application (every element of a
    /// benchmark costs the same).
    pub fn element_counters(&self) -> AccessCounters {
        let plan = self.plan();
        let np = self.points_per_element();
        let q = vec![1.0; np];
        let mut out = vec![0.0; np];
        let mut c = AccessCounters::default();
        plan.apply(&q, self.factors.element(0), &mut out, &mut Workspace::default(), &mut c);
        c
    }
}

fn expect_bp(op: &OperatorInstance, bp: Benchmark) -> Result<()> {
    if op.bp != bp {
        return Err(invalid(format!("operator is BP{} but BP{bp} was requested", op.bp)));
    }
    Ok(())
}

/// Mass-matrix action, BP1.0.
pub fn apply_bp1(op: &OperatorInstance, q: &FieldVector, counters: &mut AccessCounters) -> Result<FieldVector> {
    expect_bp(op, Benchmark::Bp1)?;
    op.apply(q, counters)
}

/// Collocation screened-Poisson action, BP3.5.
pub fn apply_bp35(op: &OperatorInstance, q: &FieldVector, counters: &mut AccessCounters) -> Result<FieldVector> {
    expect_bp(op, Benchmark::Bp35)?;
    op.apply(q, counters)
}

/// Full-quadrature screened-Poisson action, BP3.0.
pub fn apply_bp3(op: &OperatorInstance, q: &FieldVector, counters: &mut AccessCounters) -> Result<FieldVector> {
    expect_bp(op, Benchmark::Bp3)?;
    op.apply(q, counters)
}

/// `(I ⊗ I ⊗ I) q_e` as three contractions, `s` then `r` then `t`.
pub fn interpolate_to_gl(q_e: &Tensor3, interp: &OperatorMatrix) -> Result<Tensor3> {
    let t = contract_dim(interp, q_e, 1)?;
    let t = contract_dim(interp, &t, 0)?;
    contract_dim(interp, &t, 2)
}

/// `(Iᵀ ⊗ Iᵀ ⊗ Iᵀ) q̃_e`, same axis order as [`interpolate_to_gl`].
pub fn project_to_gll(q_gl: &Tensor3, interp: &OperatorMatrix) -> Result<Tensor3> {
    let it = interp.transpose();
    let t = contract_dim(&it, q_gl, 1)?;
    let t = contract_dim(&it, &t, 0)?;
    contract_dim(&it, &t, 2)
}

//! Matrix-free high-order finite element operators on hexahedral meshes,
//! with a dense reference implementation for checking them and a
//! bandwidth-bound roofline model for judging their performance.
//!
//! The three operators are the mass matrix with full Gauss-Legendre
//! quadrature ([`Benchmark::Bp1`]), screened Poisson with collocation
//! Gauss-Lobatto-Legendre quadrature ([`Benchmark::Bp35`]) and screened
//! Poisson with full Gauss-Legendre quadrature ([`Benchmark::Bp3`]).

pub mod error;
pub mod harness;
pub mod mesh;
pub mod operators;
pub mod oracle;
pub mod perf_model;
pub mod quadrature;
pub mod reference_ops;

pub use error::{Error, Result};
pub use mesh::{build_cube_mesh, geometric_factors, GeometricFactors, HexElement, HexMesh};
pub use operators::{AccessCounters, Benchmark, FieldVector, OperatorInstance, Variant};
pub use quadrature::{gl_rule, gll_rule, QuadratureRule, RuleKind};

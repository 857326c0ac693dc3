//! One-dimensional operator matrices on the reference interval and the
//! single-axis tensor contraction that applies them to element tensors.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{gl_rule, gll_rule, LagrangeBasis};

/// Largest polynomial degree the operator tables are built for.
pub const MAX_DEGREE: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatrixKind {
    /// GLL Lagrange basis sampled at the `N + 2` GL points.
    Interp,
    /// Collocation derivative on the `N + 1` GLL points.
    DiffGll,
    /// Collocation derivative on the `N + 2` GL points.
    DiffGl,
    /// Anything built by hand.
    General,
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MatrixKind::Interp => "interp",
            MatrixKind::DiffGll => "diff-gll",
            MatrixKind::DiffGl => "diff-gl",
            MatrixKind::General => "general",
        };
        f.write_str(s)
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    pub kind: MatrixKind,
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl OperatorMatrix {
    pub fn from_rows(kind: MatrixKind, rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Shape {
                what: "matrix entries",
                expected: rows * cols,
                found: entries.len(),
            });
        }
        Ok(Self {
            kind,
            rows,
            cols,
            entries,
        })
    }

    pub fn from_fn(kind: MatrixKind, rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let entries = (0..rows)
            .flat_map(|a| (0..cols).map(move |i| (a, i)))
            .map(|(a, i)| f(a, i))
            .collect();
        Self {
            kind,
            rows,
            cols,
            entries,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(MatrixKind::General, n, n, |a, i| if a == i { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize) -> f64 {
        self.entries[a * self.cols + i]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.entries[a * self.cols..(a + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.kind, self.cols, self.rows, |a, i| self.get(i, a))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|a| self.row(a).iter().sum()).collect()
    }

    /// Largest deviation from `A[a][i] == A[rows-1-a][cols-1-i]`.
    pub fn centro_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.rows {
            for i in 0..self.cols {
                let d = (self.get(a, i) - self.get(self.rows - 1 - a, self.cols - 1 - i)).abs();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|a| self.row(a).iter().zip(x).map(|(m, v)| m * v).sum())
            .collect()
    }
}

fn check_degree(n: usize) -> Result<()> {
    if !(1..=MAX_DEGREE).contains(&n) {
        return Err(invalid(format!("polynomial degree {n} outside 1..={MAX_DEGREE}")));
    }
    Ok(())
}

/// `I[a][i] = l_i(r̃_a)`: GLL cardinal functions at the GL points.
pub fn interp_matrix(degree: usize) -> Result<OperatorMatrix> {
    check_degree(degree)?;
    let gll = gll_rule(degree + 1)?;
    let gl = gl_rule(degree + 2)?;
    let basis = LagrangeBasis::new(&gll.nodes)?;
    Ok(OperatorMatrix::from_fn(
        MatrixKind::Interp,
        gl.len(),
        gll.len(),
        |a, i| basis.eval(i, gl.nodes[a]),
    ))
}

/// Collocation differentiation `D[a][i] = l_i'(x_a)` on `nodes`.
///
/// The diagonal is replaced by the negative off-diagonal row sum so that
/// constants are differentiated to zero up to a single rounding per row.
pub fn collocation_derivative(kind: MatrixKind, nodes: &[f64]) -> Result<OperatorMatrix> {
    let basis = LagrangeBasis::new(nodes)?;
    let n = nodes.len();
    let mut m = OperatorMatrix::from_fn(kind, n, n, |a, i| if a == i { 0.0 } else { basis.deriv(i, nodes[a]) });
    for a in 0..n {
        let off: f64 = m.row(a).iter().sum();
        m.entries[a * n + a] = -off;
    }
    Ok(m)
}

/// `D[a][i] = l_i'(r_a)` on the `N + 1` GLL points.
pub fn diff_matrix_gll(degree: usize) -> Result<OperatorMatrix> {
    check_degree(degree)?;
    collocation_derivative(MatrixKind::DiffGll, &gll_rule(degree + 1)?.nodes)
}

/// `D̃[a][i] = l̃_i'(r̃_a)` on the `N + 2` GL points.
pub fn diff_matrix_gl(degree: usize) -> Result<OperatorMatrix> {
    check_degree(degree)?;
    collocation_derivative(MatrixKind::DiffGl, &gl_rule(degree + 2)?.nodes)
}

/// Element-local 3-index array. Axis 0 (`r`) varies fastest, so a flat
/// index is `i + n0 * (j + n1 * k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let expected = dims.iter().product();
        if data.len() != expected {
            return Err(Error::Shape {
                what: "tensor data",
                expected,
                found: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dims);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let idx = t.index(i, j, k);
                    t.data[idx] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn cube(n: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_vec([n, n, n], data)
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn dot(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.dims, other.dims);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}

/// Applies `op` along `axis`: `out[..a..] = Σ_b op[a][b] · in[..b..]`.
pub fn contract_dim(op: &OperatorMatrix, tensor: &Tensor3, axis: usize) -> Result<Tensor3> {
    if axis > 2 {
        return Err(invalid(format!("axis {axis} is not one of 0, 1, 2")));
    }
    let dims = tensor.dims();
    if dims[axis] != op.cols() {
        return Err(Error::Shape {
            what: "contraction extent",
            expected: op.cols(),
            found: dims[axis],
        });
    }
    let mut out_dims = dims;
    out_dims[axis] = op.rows();
    let mut out = Tensor3::zeros(out_dims);
    for k in 0..out_dims[2] {
        for j in 0..out_dims[1] {
            for i in 0..out_dims[0] {
                let idx = [i, j, k];
                let a = idx[axis];
                let mut acc = 0.0;
                for b in 0..op.cols() {
                    let mut src = idx;
                    src[axis] = b;
                    acc += op.get(a, b) * tensor.get(src[0], src[1], src[2]);
                }
                let o = out.index(i, j, k);
                out.data[o] = acc;
            }
        }
    }
    Ok(out)
}

//! Dense elemental matrices assembled straight from the quadrature sums.
//!
//! Nothing here goes through sum factorization or the 1D operator tables:
//! basis values and gradients come from [`LagrangeBasis`] and the metric is
//! formed from the element map at each point. The only exception is
//! [`assemble_stiffness_full_quadrature_composed`], which is the second,
//! deliberately different route for the BP3.0 stiffness.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{invalid, Error, Result};
use crate::mesh::{factor, geometric_factors, HexElement, HexMesh};
use crate::operators::Benchmark;
use crate::quadrature::{gl_rule, gll_rule, LagrangeBasis, QuadratureRule};
use crate::reference_ops::{diff_matrix_gl, interp_matrix, OperatorMatrix};

/// Largest degree the dense oracle accepts.
pub const MAX_ORACLE_DEGREE: usize = 4;

#[derive(Clone, Debug)]
pub struct DenseElementMatrix {
    pub bp: Benchmark,
    pub element: usize,
    pub matrix: DMatrix<f64>,
}

impl DenseElementMatrix {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let y = &self.matrix * DVector::from_column_slice(x);
        y.as_slice().to_vec()
    }

    /// `max |A - Aᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// Largest absolute row sum, i.e. `‖A·1‖∞`.
    pub fn constant_residual(&self) -> f64 {
        self.matrix.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max)
    }
}

fn check_degree(degree: usize) -> Result<()> {
    if !(1..=MAX_ORACLE_DEGREE).contains(&degree) {
        return Err(invalid(format!(
            "dense oracle supports degrees 1..={MAX_ORACLE_DEGREE}, got {degree}"
        )));
    }
    Ok(())
}

fn element(mesh: &HexMesh, e: usize) -> Result<&HexElement> {
    mesh.elements
        .get(e)
        .ok_or_else(|| invalid(format!("element {e} out of range ({} elements)", mesh.len())))
}

/// Values and derivatives of the GLL cardinal functions at the points of `rule`,
/// indexed `[basis][point]`.
struct Tabulation {
    val: Vec<Vec<f64>>,
    der: Vec<Vec<f64>>,
}

impl Tabulation {
    fn new(degree: usize, rule: &QuadratureRule) -> Result<Self> {
        let gll = gll_rule(degree + 1)?;
        let basis = LagrangeBasis::new(&gll.nodes)?;
        let val = (0..=degree)
            .map(|i| rule.nodes.iter().map(|&x| basis.eval(i, x)).collect())
            .collect();
        let der = (0..=degree)
            .map(|i| rule.nodes.iter().map(|&x| basis.deriv(i, x)).collect())
            .collect();
        Ok(Self { val, der })
    }
}

/// One quadrature point: tensor weight, `|J|`, the scaled metric
/// `|J| A^{-1} A^{-T}` and the reference indices.
struct Point {
    weight: f64,
    det: f64,
    metric: Matrix3<f64>,
    abc: [usize; 3],
}

fn points(el: &HexElement, rule: &QuadratureRule) -> Result<Vec<Point>> {
    let n = rule.len();
    let mut pts = Vec::with_capacity(n * n * n);
    for c in 0..n {
        for b in 0..n {
            for a in 0..n {
                let (jac, det) = el.jacobian(rule.nodes[a], rule.nodes[b], rule.nodes[c])?;
                let inv = jac.try_inverse().ok_or(Error::DegenerateGeometry { det })?;
                pts.push(Point {
                    weight: rule.weights[a] * rule.weights[b] * rule.weights[c],
                    det,
                    metric: inv * inv.transpose() * det,
                    abc: [a, b, c],
                });
            }
        }
    }
    Ok(pts)
}

/// Basis multi-index `(i, j, k)` for flat index `idx`, `i` fastest.
fn multi_index(idx: usize, nq: usize) -> [usize; 3] {
    [idx % nq, (idx / nq) % nq, idx / (nq * nq)]
}

fn value(tab: &Tabulation, ijk: [usize; 3], abc: [usize; 3]) -> f64 {
    tab.val[ijk[0]][abc[0]] * tab.val[ijk[1]][abc[1]] * tab.val[ijk[2]][abc[2]]
}

fn gradient(tab: &Tabulation, ijk: [usize; 3], abc: [usize; 3]) -> [f64; 3] {
    let [i, j, k] = ijk;
    let [a, b, c] = abc;
    [
        tab.der[i][a] * tab.val[j][b] * tab.val[k][c],
        tab.val[i][a] * tab.der[j][b] * tab.val[k][c],
        tab.val[i][a] * tab.val[j][b] * tab.der[k][c],
    ]
}

/// `Σ_points mass_coeff·w|J| l_row l_col + w ∇l_rowᵀ G ∇l_col`.
fn quadrature_sum(
    el: &HexElement,
    degree: usize,
    rule: &QuadratureRule,
    mass_coeff: f64,
    with_stiffness: bool,
) -> Result<DMatrix<f64>> {
    let nq = degree + 1;
    let np = nq * nq * nq;
    let tab = Tabulation::new(degree, rule)?;
    let pts = points(el, rule)?;
    let mut m = DMatrix::zeros(np, np);
    for row in 0..np {
        let ri = multi_index(row, nq);
        for col in 0..np {
            let ci = multi_index(col, nq);
            let mut acc = 0.0;
            for pt in &pts {
                if mass_coeff != 0.0 {
                    acc += mass_coeff * pt.weight * pt.det * value(&tab, ri, pt.abc) * value(&tab, ci, pt.abc);
                }
                if with_stiffness {
                    let gr = Vector3::from(gradient(&tab, ri, pt.abc));
                    let gc = Vector3::from(gradient(&tab, ci, pt.abc));
                    acc += pt.weight * gr.dot(&(pt.metric * gc));
                }
            }
            m[(row, col)] = acc;
        }
    }
    Ok(m)
}

/// Dense `M^e` on GL points.
pub fn assemble_mass(mesh: &HexMesh, e: usize, degree: usize) -> Result<DenseElementMatrix> {
    check_degree(degree)?;
    let el = element(mesh, e)?;
    let rule = gl_rule(degree + 2)?;
    Ok(DenseElementMatrix {
        bp: Benchmark::Bp1,
        element: e,
        matrix: quadrature_sum(el, degree, &rule, 1.0, false)?,
    })
}

/// Dense `S^e + λ M^e` with GLL collocation quadrature.
pub fn assemble_stiffness_collocation(
    mesh: &HexMesh,
    e: usize,
    degree: usize,
    lambda: f64,
) -> Result<DenseElementMatrix> {
    check_degree(degree)?;
    let el = element(mesh, e)?;
    let rule = gll_rule(degree + 1)?;
    Ok(DenseElementMatrix {
        bp: Benchmark::Bp35,
        element: e,
        matrix: quadrature_sum(el, degree, &rule, lambda, true)?,
    })
}

/// Dense `S^e + λ M^e` with full GL quadrature, summed point by point.
pub fn assemble_stiffness_full_quadrature(
    mesh: &HexMesh,
    e: usize,
    degree: usize,
    lambda: f64,
) -> Result<DenseElementMatrix> {
    check_degree(degree)?;
    let el = element(mesh, e)?;
    let rule = gl_rule(degree + 2)?;
    Ok(DenseElementMatrix {
        bp: Benchmark::Bp3,
        element: e,
        matrix: quadrature_sum(el, degree, &rule, lambda, true)?,
    })
}

fn dense(m: &OperatorMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |a, i| m.get(a, i))
}

/// Same matrix as [`assemble_stiffness_full_quadrature`], built as the
/// explicit product `Iᵀ D̃ᵀ G D̃ I + λ Iᵀ J I` from Kronecker-expanded 1D
/// operators and the stored geometric factors.
pub fn assemble_stiffness_full_quadrature_composed(
    mesh: &HexMesh,
    e: usize,
    degree: usize,
    lambda: f64,
) -> Result<DenseElementMatrix> {
    check_degree(degree)?;
    element(mesh, e)?;
    let ng = degree + 2;
    let i1 = dense(&interp_matrix(degree)?);
    let d1 = dense(&diff_matrix_gl(degree)?);
    let id = DMatrix::<f64>::identity(ng, ng);
    // flat index a + ng (b + ng c): the r operator is the innermost factor
    let interp = i1.kronecker(&i1).kronecker(&i1);
    let grads = [
        id.kronecker(&id).kronecker(&d1) * &interp,
        id.kronecker(&d1).kronecker(&id) * &interp,
        d1.kronecker(&id).kronecker(&id) * &interp,
    ];
    let single = HexMesh::from_elements(vec![mesh.elements[e]], mesh.extent);
    let geo = geometric_factors(&single, &gl_rule(ng)?)?;
    let npg = geo.points();
    let entry = [
        [factor::GRR, factor::GRS, factor::GRT],
        [factor::GRS, factor::GSS, factor::GST],
        [factor::GRT, factor::GST, factor::GTT],
    ];
    let mut s = DMatrix::zeros(interp.ncols(), interp.ncols());
    for x in 0..3 {
        for y in 0..3 {
            let g = DMatrix::from_diagonal(&DVector::from_fn(npg, |p, _| geo.get(0, entry[x][y], p)));
            s += grads[x].transpose() * g * &grads[y];
        }
    }
    let j = DMatrix::from_diagonal(&DVector::from_fn(npg, |p, _| geo.get(0, factor::GWJ, p)));
    s += (interp.transpose() * j * &interp) * lambda;
    Ok(DenseElementMatrix {
        bp: Benchmark::Bp3,
        element: e,
        matrix: s,
    })
}

/// Dense matrix for `bp` on element `e`.
pub fn assemble(bp: Benchmark, mesh: &HexMesh, e: usize, degree: usize, lambda: f64) -> Result<DenseElementMatrix> {
    match bp {
        Benchmark::Bp1 => assemble_mass(mesh, e, degree),
        Benchmark::Bp35 => assemble_stiffness_collocation(mesh, e, degree, lambda),
        Benchmark::Bp3 => assemble_stiffness_full_quadrature(mesh, e, degree, lambda),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cube_mesh;

    fn curved() -> HexMesh {
        build_cube_mesh(2, 2.0).unwrap().perturbed(0.2, 3).unwrap()
    }

    fn sheared() -> HexMesh {
        let el = HexElement::reference();
        let corners = el
            .corners
            .map(|[x, y, z]| [1.5 * x + 0.3 * y, 0.8 * y + 0.2 * z, 1.1 * z + 0.1 * x]);
        HexMesh::from_elements(vec![HexElement { corners }], 2.0)
    }

    #[test]
    fn reference_mass_sums_to_volume() {
        let mesh = HexMesh::from_elements(vec![HexElement::reference()], 2.0);
        let m = assemble_mass(&mesh, 0, 1).unwrap();
        assert_eq!(m.n(), 8);
        assert!((m.matrix.sum() - 8.0).abs() < 1e-13);
        assert!(m.asymmetry() <= 1e-13);
    }

    #[test]
    fn all_oracles_symmetric() {
        let mesh = curved();
        for degree in 1..=3 {
            for bp in Benchmark::ALL {
                let m = assemble(bp, &mesh, 5, degree, 0.7).unwrap();
                let scale = m.matrix.amax();
                assert!(m.asymmetry() <= 1e-12 * scale, "BP{bp} N={degree}");
            }
        }
    }

    #[test]
    fn constants_in_stiffness_null_space() {
        let mesh = curved();
        for degree in 1..=3 {
            for bp in [Benchmark::Bp35, Benchmark::Bp3] {
                let s = assemble(bp, &mesh, 2, degree, 0.0).unwrap();
                assert!(s.constant_residual() <= 1e-10, "BP{bp} N={degree}");
            }
        }
    }

    #[test]
    fn screened_matrices_positive_definite() {
        let mesh = curved();
        for bp in [Benchmark::Bp35, Benchmark::Bp3] {
            let s = assemble(bp, &mesh, 1, 3, 0.5).unwrap();
            assert!(s.matrix.clone().cholesky().is_some(), "BP{bp}");
        }
    }

    #[test]
    fn two_full_quadrature_routes_agree() {
        let mesh = curved();
        for degree in 1..=3 {
            for e in [0, 7] {
                let a = assemble_stiffness_full_quadrature(&mesh, e, degree, 0.4).unwrap();
                let b = assemble_stiffness_full_quadrature_composed(&mesh, e, degree, 0.4).unwrap();
                let diff = (&a.matrix - &b.matrix).amax();
                assert!(diff <= 1e-11, "N={degree} e={e}: {diff:e}");
            }
        }
    }

    #[test]
    fn quadratures_agree_on_low_degree_polynomials_of_affine_elements() {
        let mesh = sheared();
        for degree in 1..=4 {
            let coll = assemble_stiffness_collocation(&mesh, 0, degree, 0.0).unwrap();
            let full = assemble_stiffness_full_quadrature(&mesh, 0, degree, 0.0).unwrap();
            let x = gll_rule(degree + 1).unwrap().nodes;
            let nq = degree + 1;
            // total degree N in reference coordinates, hence also physical
            let u = DVector::from_fn(nq * nq * nq, |p, _| {
                let [i, j, k] = multi_index(p, nq);
                let (r, s, t) = (x[i], x[j], x[k]);
                let mut v = 0.0;
                for a in 0..=degree {
                    for b in 0..=degree - a {
                        for c in 0..=degree - a - b {
                            let coeff = 1.0 / (1 + a + 2 * b + 3 * c) as f64;
                            v += coeff * r.powi(a as i32) * s.powi(b as i32) * t.powi(c as i32);
                        }
                    }
                }
                v
            });
            let diff = (&coll.matrix * &u - &full.matrix * &u).amax();
            assert!(diff <= 1e-10, "N={degree}: {diff:e}");
        }
    }

    #[test]
    fn quadratures_differ_on_curved_elements() {
        let mesh = curved();
        for degree in 2..=3 {
            let coll = assemble_stiffness_collocation(&mesh, 0, degree, 0.0).unwrap();
            let full = assemble_stiffness_full_quadrature(&mesh, 0, degree, 0.0).unwrap();
            assert!((&coll.matrix - &full.matrix).amax() > 1e-6, "N={degree}");
        }
    }

    #[test]
    fn rejects_out_of_range_requests() {
        let mesh = curved();
        assert!(assemble_mass(&mesh, 0, 0).is_err());
        assert!(assemble_mass(&mesh, 0, MAX_ORACLE_DEGREE + 1).is_err());
        assert!(assemble_mass(&mesh, 99, 1).is_err());
        let flat = HexMesh::from_elements(vec![HexElement { corners: [[0.0; 3]; 8] }], 1.0);
        assert!(matches!(
            assemble_mass(&flat, 0, 1),
            Err(Error::DegenerateGeometry { .. })
        ));
    }
}

//! Structured hexahedral meshes of a cube, trilinear element maps and the
//! per-point geometric factors consumed by the operators.

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{gl_rule, QuadratureRule, RuleKind};

/// Below this `|det J|` an element map is treated as degenerate.
pub const DEGENERATE_DET: f64 = 1e-14;

/// Eight physical corners ordered lexicographically in `(r, s, t)`:
/// corner `c = ir + 2 is + 4 it` sits at reference coordinate
/// `(2 ir - 1, 2 is - 1, 2 it - 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HexElement {
    pub corners: [[f64; 3]; 8],
}

#[inline]
fn corner_sign(c: usize, axis: usize) -> f64 {
    if (c >> axis) & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

impl HexElement {
    /// The reference cube `[-1, 1]^3` itself.
    pub fn reference() -> Self {
        Self::axis_aligned([0.0; 3], [2.0; 3])
    }

    /// Box centred at `center` with side lengths `size`.
    pub fn axis_aligned(center: [f64; 3], size: [f64; 3]) -> Self {
        let mut corners = [[0.0; 3]; 8];
        for (c, corner) in corners.iter_mut().enumerate() {
            for d in 0..3 {
                corner[d] = center[d] + 0.5 * size[d] * corner_sign(c, d);
            }
        }
        Self { corners }
    }

    /// Physical point `x(r, s, t)`.
    pub fn map(&self, r: f64, s: f64, t: f64) -> [f64; 3] {
        let xi = [r, s, t];
        let mut x = [0.0; 3];
        for (c, corner) in self.corners.iter().enumerate() {
            let shape: f64 = (0..3).map(|m| 0.5 * (1.0 + corner_sign(c, m) * xi[m])).product();
            for d in 0..3 {
                x[d] += shape * corner[d];
            }
        }
        x
    }

    /// Forward Jacobian `A[d][m] = ∂x_d/∂ξ_m` and its determinant.
    pub fn jacobian(&self, r: f64, s: f64, t: f64) -> Result<(Matrix3<f64>, f64)> {
        trilinear_jacobian(&self.corners, r, s, t)
    }
}

/// Jacobian of the trilinear map through `corners` at `(r, s, t)`.
pub fn trilinear_jacobian(corners: &[[f64; 3]; 8], r: f64, s: f64, t: f64) -> Result<(Matrix3<f64>, f64)> {
    let xi = [r, s, t];
    let mut a = Matrix3::<f64>::zeros();
    for (c, corner) in corners.iter().enumerate() {
        let sign = [corner_sign(c, 0), corner_sign(c, 1), corner_sign(c, 2)];
        let f = [
            0.5 * (1.0 + sign[0] * xi[0]),
            0.5 * (1.0 + sign[1] * xi[1]),
            0.5 * (1.0 + sign[2] * xi[2]),
        ];
        let grad = [
            0.5 * sign[0] * f[1] * f[2],
            0.5 * sign[1] * f[0] * f[2],
            0.5 * sign[2] * f[0] * f[1],
        ];
        for d in 0..3 {
            for m in 0..3 {
                a[(d, m)] += corner[d] * grad[m];
            }
        }
    }
    let det = a.determinant();
    if det.abs() <= DEGENERATE_DET || !det.is_finite() {
        return Err(Error::DegenerateGeometry { det });
    }
    Ok((a, det))
}

#[derive(Clone, Debug, PartialEq)]
pub struct HexMesh {
    pub elements: Vec<HexElement>,
    /// Side length of the meshed cube.
    pub extent: f64,
    /// Elements along each axis, when the mesh is a structured grid.
    pub per_side: Option<usize>,
}

/// Regular grid of `elements_per_side^3` congruent cubes filling
/// `[-extent/2, extent/2]^3`.
pub fn build_cube_mesh(elements_per_side: usize, extent: f64) -> Result<HexMesh> {
    if elements_per_side == 0 {
        return Err(invalid("elements_per_side must be at least 1"));
    }
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(invalid(format!("mesh extent must be positive, got {extent}")));
    }
    let n = elements_per_side;
    let h = extent / n as f64;
    let coord = |i: usize| -0.5 * extent + h * i as f64;
    let grid = GridVertices::new(n, |i, j, k| [coord(i), coord(j), coord(k)]);
    Ok(grid.into_mesh(extent))
}

struct GridVertices {
    n: usize,
    xyz: Vec<[f64; 3]>,
}

impl GridVertices {
    fn new(n: usize, f: impl Fn(usize, usize, usize) -> [f64; 3]) -> Self {
        let m = n + 1;
        let mut xyz = Vec::with_capacity(m * m * m);
        for k in 0..m {
            for j in 0..m {
                for i in 0..m {
                    xyz.push(f(i, j, k));
                }
            }
        }
        Self { n, xyz }
    }

    fn at(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let m = self.n + 1;
        self.xyz[i + m * (j + m * k)]
    }

    fn into_mesh(self, extent: f64) -> HexMesh {
        let n = self.n;
        let mut elements = Vec::with_capacity(n * n * n);
        for ez in 0..n {
            for ey in 0..n {
                for ex in 0..n {
                    let mut corners = [[0.0; 3]; 8];
                    for (c, corner) in corners.iter_mut().enumerate() {
                        *corner = self.at(ex + (c & 1), ey + ((c >> 1) & 1), ez + ((c >> 2) & 1));
                    }
                    elements.push(HexElement { corners });
                }
            }
        }
        HexMesh {
            elements,
            extent,
            per_side: Some(n),
        }
    }
}

impl HexMesh {
    pub fn from_elements(elements: Vec<HexElement>, extent: f64) -> Self {
        Self {
            elements,
            extent,
            per_side: None,
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Moves every interior grid vertex by a uniform random offset of at most
    /// `amplitude · h` per coordinate. Boundary vertices stay put, so the
    /// elements still tile the same cube.
    pub fn perturbed(&self, amplitude: f64, seed: u64) -> Result<HexMesh> {
        let n = self
            .per_side
            .ok_or_else(|| invalid("only structured meshes can be perturbed"))?;
        if !(0.0..0.5).contains(&amplitude) {
            return Err(invalid(format!("perturbation amplitude {amplitude} outside [0, 0.5)")));
        }
        let h = self.extent / n as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coord = |i: usize| -0.5 * self.extent + h * i as f64;
        let mut offsets = vec![[0.0; 3]; (n + 1).pow(3)];
        for k in 1..n {
            for j in 1..n {
                for i in 1..n {
                    let o = &mut offsets[i + (n + 1) * (j + (n + 1) * k)];
                    for v in o.iter_mut() {
                        *v = amplitude * h * rng.gen_range(-1.0..1.0);
                    }
                }
            }
        }
        let grid = GridVertices::new(n, |i, j, k| {
            let o = offsets[i + (n + 1) * (j + (n + 1) * k)];
            [coord(i) + o[0], coord(j) + o[1], coord(k) + o[2]]
        });
        let mesh = grid.into_mesh(self.extent);
        // reject tangled results early
        let probe = gl_rule(2)?;
        for el in &mesh.elements {
            for &r in &probe.nodes {
                for &s in &probe.nodes {
                    for &t in &probe.nodes {
                        let (_, det) = el.jacobian(r, s, t)?;
                        if det <= 0.0 {
                            return Err(Error::DegenerateGeometry { det });
                        }
                    }
                }
            }
        }
        Ok(mesh)
    }

    /// Physical volume, integrated with a 2-point Gauss rule per axis (exact
    /// for trilinear maps).
    pub fn volume(&self) -> Result<f64> {
        let rule = gl_rule(2)?;
        let mut v = 0.0;
        for el in &self.elements {
            for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
                for (&s, &ws) in rule.nodes.iter().zip(&rule.weights) {
                    for (&r, &wr) in rule.nodes.iter().zip(&rule.weights) {
                        v += wr * ws * wt * el.jacobian(r, s, t)?.1;
                    }
                }
            }
        }
        Ok(v)
    }
}

/// Index of each stored factor within an element block.
pub mod factor {
    pub const GRR: usize = 0;
    pub const GRS: usize = 1;
    pub const GRT: usize = 2;
    pub const GSS: usize = 3;
    pub const GST: usize = 4;
    pub const GTT: usize = 5;
    pub const GWJ: usize = 6;
    pub const COUNT: usize = 7;
}

/// Weighted metric entries and weighted Jacobian at every quadrature point.
///
/// Layout is element-major, then factor, then point (`r` fastest):
/// `data[(e * 7 + f) * points + p]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometricFactors {
    pub point_set: RuleKind,
    pub points_1d: usize,
    n_el: usize,
    data: Vec<f64>,
}

impl GeometricFactors {
    pub fn n_el(&self) -> usize {
        self.n_el
    }

    pub fn points(&self) -> usize {
        self.points_1d.pow(3)
    }

    /// All seven factors of element `e`, factor-major.
    pub fn element(&self, e: usize) -> &[f64] {
        let block = factor::COUNT * self.points();
        &self.data[e * block..(e + 1) * block]
    }

    pub fn get(&self, e: usize, f: usize, p: usize) -> f64 {
        self.element(e)[f * self.points() + p]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Symmetric weighted metric at point `p` of element `e`.
    pub fn metric(&self, e: usize, p: usize) -> Matrix3<f64> {
        use factor::*;
        let g = |f| self.get(e, f, p);
        Matrix3::new(
            g(GRR),
            g(GRS),
            g(GRT), //
            g(GRS),
            g(GSS),
            g(GST), //
            g(GRT),
            g(GST),
            g(GTT),
        )
    }

    /// Sum of all weighted Jacobians, i.e. the integrated mesh volume.
    pub fn total_weighted_jacobian(&self) -> f64 {
        (0..self.n_el)
            .map(|e| {
                let np = self.points();
                self.element(e)[factor::GWJ * np..(factor::GWJ + 1) * np]
                    .iter()
                    .sum::<f64>()
            })
            .sum()
    }
}

/// Evaluates `G = det(A) A^{-1} A^{-T}` and `det(A)` at every tensor-product
/// point of `rule`, scaled by `w_a w_b w_c`.
pub fn geometric_factors(mesh: &HexMesh, rule: &QuadratureRule) -> Result<GeometricFactors> {
    let n = rule.len();
    let np = n * n * n;
    let block = factor::COUNT * np;
    let mut data = vec![0.0; mesh.len() * block];
    data.par_chunks_mut(block)
        .zip(mesh.elements.par_iter())
        .try_for_each(|(out, el)| element_factors(el, rule, out))?;
    Ok(GeometricFactors {
        point_set: rule.kind,
        points_1d: n,
        n_el: mesh.len(),
        data,
    })
}

fn element_factors(el: &HexElement, rule: &QuadratureRule, out: &mut [f64]) -> Result<()> {
    use factor::*;
    let n = rule.len();
    let np = n * n * n;
    for c in 0..n {
        for b in 0..n {
            for a in 0..n {
                let p = a + n * (b + n * c);
                let (jac, det) = el.jacobian(rule.nodes[a], rule.nodes[b], rule.nodes[c])?;
                if det <= 0.0 {
                    return Err(Error::DegenerateGeometry { det });
                }
                let inv = jac.try_inverse().ok_or(Error::DegenerateGeometry { det })?;
                let g = inv * inv.transpose() * det;
                let w = rule.weights[a] * rule.weights[b] * rule.weights[c];
                out[GRR * np + p] = w * g[(0, 0)];
                out[GRS * np + p] = w * g[(0, 1)];
                out[GRT * np + p] = w * g[(0, 2)];
                out[GSS * np + p] = w * g[(1, 1)];
                out[GST * np + p] = w * g[(1, 2)];
                out[GTT * np + p] = w * g[(2, 2)];
                out[GWJ * np + p] = w * det;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gll_rule;

    fn jittered_element(seed: u64, amp: f64) -> HexElement {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut el = HexElement::reference();
        for c in el.corners.iter_mut() {
            for v in c.iter_mut() {
                *v += amp * rng.gen_range(-1.0..1.0);
            }
        }
        el
    }

    #[test]
    fn preset_mesh_sizes() {
        assert_eq!(build_cube_mesh(8, 2.0).unwrap().len(), 512);
        assert_eq!(build_cube_mesh(16, 2.0).unwrap().len(), 4096);
        assert!(build_cube_mesh(0, 2.0).is_err());
        assert!(build_cube_mesh(2, 0.0).is_err());
        assert!(build_cube_mesh(2, -1.0).is_err());
    }

    #[test]
    fn single_element_is_reference_cube() {
        let mesh = build_cube_mesh(1, 2.0).unwrap();
        assert_eq!(mesh.elements[0], HexElement::reference());
        for (r, s, t) in [(0.0, 0.0, 0.0), (-0.3, 0.9, 0.1), (1.0, -1.0, 1.0)] {
            let (a, det) = mesh.elements[0].jacobian(r, s, t).unwrap();
            assert!((a - Matrix3::identity()).abs().max() < 1e-15);
            assert!((det - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn scaled_element_jacobian() {
        let h = 0.6;
        let el = HexElement::axis_aligned([0.3, -0.2, 1.0], [h; 3]);
        let (a, det) = el.jacobian(0.2, -0.7, 0.4).unwrap();
        assert!((a - Matrix3::identity() * (h / 2.0)).abs().max() < 1e-15);
        assert!((det - (h / 2.0f64).powi(3)).abs() < 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let el = jittered_element(5, 0.2);
        let h = 1e-6;
        for &(r, s, t) in &[(0.1, -0.4, 0.6), (-0.9, 0.9, 0.0), (0.5, 0.5, -0.5)] {
            let (a, det) = el.jacobian(r, s, t).unwrap();
            let mut fd = Matrix3::zeros();
            for m in 0..3 {
                let mut p = [r, s, t];
                let mut q = [r, s, t];
                p[m] += h;
                q[m] -= h;
                let xp = el.map(p[0], p[1], p[2]);
                let xq = el.map(q[0], q[1], q[2]);
                for d in 0..3 {
                    fd[(d, m)] = (xp[d] - xq[d]) / (2.0 * h);
                }
            }
            assert!((a - fd).abs().max() < 1e-8);
            assert!((det - fd.determinant()).abs() < 1e-7);
        }
    }

    #[test]
    fn flat_element_is_degenerate() {
        let mut el = HexElement::reference();
        for c in el.corners.iter_mut() {
            c[2] = 0.0;
        }
        assert!(matches!(
            el.jacobian(0.0, 0.0, 0.0),
            Err(Error::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn identity_factors_are_weights() {
        let mesh = build_cube_mesh(1, 2.0).unwrap();
        let rule = gll_rule(2).unwrap();
        let g = geometric_factors(&mesh, &rule).unwrap();
        for p in 0..8 {
            let w = 1.0; // all 2-point GLL weights are 1
            assert_eq!(g.get(0, factor::GRR, p), w);
            assert_eq!(g.get(0, factor::GSS, p), w);
            assert_eq!(g.get(0, factor::GTT, p), w);
            assert_eq!(g.get(0, factor::GRS, p), 0.0);
            assert_eq!(g.get(0, factor::GWJ, p), w);
        }
    }

    #[test]
    fn affine_scaling_factors() {
        let h = 0.7;
        let mesh = HexMesh::from_elements(vec![HexElement::axis_aligned([0.0; 3], [h; 3])], h);
        let rule = gl_rule(4).unwrap();
        let g = geometric_factors(&mesh, &rule).unwrap();
        let n = 4;
        for c in 0..n {
            for b in 0..n {
                for a in 0..n {
                    let p = a + n * (b + n * c);
                    let w = rule.weights[a] * rule.weights[b] * rule.weights[c];
                    assert!((g.get(0, factor::GRR, p) - w * h / 2.0).abs() < 1e-12);
                    assert!((g.get(0, factor::GWJ, p) - w * (h / 2.0).powi(3)).abs() < 1e-12);
                }
            }
        }
        let half = HexMesh::from_elements(vec![HexElement::axis_aligned([0.0; 3], [1.0; 3])], 1.0);
        let g = geometric_factors(&half, &rule).unwrap();
        let w = rule.weights[0].powi(3);
        assert!((g.get(0, factor::GWJ, 0) - w / 8.0).abs() < 1e-15);
    }

    #[test]
    fn factor_volume_matches_mesh_volume() {
        let mesh = build_cube_mesh(3, 1.5).unwrap().perturbed(0.2, 9).unwrap();
        assert!((mesh.volume().unwrap() - 1.5f64.powi(3)).abs() < 1e-10);
        for n in 1..=6 {
            let g = geometric_factors(&mesh, &gl_rule(n + 2).unwrap()).unwrap();
            assert!((g.total_weighted_jacobian() - 1.5f64.powi(3)).abs() < 1e-10, "N={n}");
        }
    }

    #[test]
    fn metric_is_spd_at_sample_points() {
        let mesh = build_cube_mesh(2, 2.0).unwrap().perturbed(0.25, 4).unwrap();
        let g = geometric_factors(&mesh, &gl_rule(5).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let e = rng.gen_range(0..mesh.len());
            let p = rng.gen_range(0..g.points());
            let m = g.metric(e, p);
            assert!(m.cholesky().is_some());
            assert!(g.get(e, factor::GWJ, p) > 0.0);
        }
    }

    #[test]
    fn congruent_elements_share_factors() {
        let mesh = build_cube_mesh(3, 2.0).unwrap();
        let g = geometric_factors(&mesh, &gll_rule(4).unwrap()).unwrap();
        let first = g.element(0).to_vec();
        for e in 1..mesh.len() {
            for (a, b) in g.element(e).iter().zip(&first) {
                assert!((a - b).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn perturbation_keeps_boundary() {
        let base = build_cube_mesh(2, 2.0).unwrap();
        let p = base.perturbed(0.3, 1).unwrap();
        assert_ne!(base, p);
        assert!((p.volume().unwrap() - 8.0).abs() < 1e-12);
        assert!(base.perturbed(0.6, 1).is_err());
    }
}

//! Gauss–Legendre and Gauss–Lobatto–Legendre rules on `[-1, 1]`, Legendre
//! polynomial evaluation and barycentric Lagrange cardinal functions.
//!
//! Nodes are always returned in ascending order; every operator matrix in the
//! crate indexes its points in that order.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Newton stops once the update falls below this.
pub const NEWTON_TOL: f64 = 1e-14;
pub const NEWTON_MAX_ITERS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleKind {
    /// Interior Gauss–Legendre points.
    Gl,
    /// Gauss–Lobatto–Legendre points, endpoints included.
    Gll,
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleKind::Gl => f.write_str("GL"),
            RuleKind::Gll => f.write_str("GLL"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub kind: RuleKind,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest monomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        let n = self.len();
        match self.kind {
            RuleKind::Gl => 2 * n - 1,
            RuleKind::Gll => 2 * n - 3,
        }
    }

    /// Applies the rule to `f`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
///
/// The derivative uses `P'_{k+1} = P'_{k-1} + (2k+1) P_k`, which stays finite
/// at `x = ±1`.
pub fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let (p, dp, _) = legendre_with_second(n, x);
    (p, dp)
}

/// `P_n`, `P_n'` and `P_n''` at `x`.
fn legendre_with_second(n: usize, x: f64) -> (f64, f64, f64) {
    debug_assert!(x.abs() <= 1.0 + 1e-12, "x = {x} outside [-1, 1]");
    if n == 0 {
        return (1.0, 0.0, 0.0);
    }
    // (value, first, second) at k-1 and k
    let (mut p0, mut d0, mut s0) = (1.0, 0.0, 0.0);
    let (mut p1, mut d1, mut s1) = (x, 1.0, 0.0);
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        let d2 = d0 + (2.0 * kf + 1.0) * p1;
        let s2 = s0 + (2.0 * kf + 1.0) * d1;
        (p0, d0, s0) = (p1, d1, s1);
        (p1, d1, s1) = (p2, d2, s2);
    }
    (p1, d1, s1)
}

fn newton(mut x: f64, f: impl Fn(f64) -> (f64, f64)) -> Result<f64> {
    for _ in 0..NEWTON_MAX_ITERS {
        let (value, slope) = f(x);
        let dx = value / slope;
        x -= dx;
        if dx.abs() <= NEWTON_TOL {
            return Ok(x);
        }
    }
    Err(invalid(format!("Newton iteration did not converge from x = {x}")))
}

/// `n`-point Gauss–Legendre rule.
pub fn gl_rule(n: usize) -> Result<QuadratureRule> {
    if n < 1 {
        return Err(invalid("Gauss-Legendre rule needs n >= 1"));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // roots come in ± pairs; solve the upper half and mirror
    for i in 0..n.div_ceil(2) {
        let guess = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut x = newton(guess, |x| legendre_and_derivative(n, x))?;
        if n % 2 == 1 && i == n / 2 {
            x = 0.0;
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    Ok(QuadratureRule {
        kind: RuleKind::Gl,
        nodes,
        weights,
    })
}

/// `n`-point Gauss–Lobatto–Legendre rule: `±1` plus the roots of `P'_{n-1}`.
pub fn gll_rule(n: usize) -> Result<QuadratureRule> {
    if n < 2 {
        return Err(invalid("Gauss-Lobatto-Legendre rule needs n >= 2"));
    }
    let degree = n - 1;
    let mut nodes = vec![0.0; n];
    nodes[0] = -1.0;
    nodes[n - 1] = 1.0;
    for i in 1..n.div_ceil(2) {
        // Chebyshev–Gauss–Lobatto guess, upper half
        let guess = (PI * i as f64 / degree as f64).cos();
        let mut x = newton(guess, |x| {
            let (_, d1, d2) = legendre_with_second(degree, x);
            (d1, d2)
        })?;
        if n % 2 == 1 && i == n / 2 {
            x = 0.0;
        }
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
    }
    let scale = 2.0 / (n * degree) as f64;
    let weights = nodes
        .iter()
        .map(|&x| {
            let (p, _) = legendre_and_derivative(degree, x);
            scale / (p * p)
        })
        .collect::<Vec<_>>();
    let mut rule = QuadratureRule {
        kind: RuleKind::Gll,
        nodes,
        weights,
    };
    symmetrize(&mut rule.weights);
    Ok(rule)
}

fn symmetrize(w: &mut [f64]) {
    let n = w.len();
    for i in 0..n / 2 {
        let avg = 0.5 * (w[i] + w[n - 1 - i]);
        w[i] = avg;
        w[n - 1 - i] = avg;
    }
}

/// Lagrange cardinal polynomials on a fixed node set, in barycentric form.
#[derive(Clone, Debug)]
pub struct LagrangeBasis {
    nodes: Vec<f64>,
    bary: Vec<f64>,
}

impl LagrangeBasis {
    pub fn new(nodes: &[f64]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(invalid("Lagrange basis needs at least one node"));
        }
        let mut bary = vec![1.0; nodes.len()];
        for (j, &xj) in nodes.iter().enumerate() {
            for (k, &xk) in nodes.iter().enumerate() {
                if j != k {
                    let d = xj - xk;
                    if d == 0.0 {
                        return Err(invalid(format!(
                            "duplicate interpolation node {xj} at positions {k} and {j}"
                        )));
                    }
                    bary[j] /= d;
                }
            }
        }
        Ok(Self {
            nodes: nodes.to_vec(),
            bary,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn node_at(&self, x: f64) -> Option<usize> {
        self.nodes.iter().position(|&xj| xj == x)
    }

    /// `l_i(x)`.
    pub fn eval(&self, i: usize, x: f64) -> f64 {
        assert!(i < self.len(), "basis index {i} out of range");
        if let Some(j) = self.node_at(x) {
            return if i == j { 1.0 } else { 0.0 };
        }
        let denom: f64 = self.nodes.iter().zip(&self.bary).map(|(&xj, &wj)| wj / (x - xj)).sum();
        self.bary[i] / (x - self.nodes[i]) / denom
    }

    /// `l_i'(x)`.
    pub fn deriv(&self, i: usize, x: f64) -> f64 {
        assert!(i < self.len(), "basis index {i} out of range");
        match self.node_at(x) {
            Some(j) if j == i => self
                .nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &xk)| 1.0 / (x - xk))
                .sum(),
            Some(j) => self.bary[i] / self.bary[j] / (self.nodes[j] - self.nodes[i]),
            None => {
                let s: f64 = self
                    .nodes
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i)
                    .map(|(_, &xk)| 1.0 / (x - xk))
                    .sum();
                self.eval(i, x) * s
            }
        }
    }
}

/// Value of the `i`-th Lagrange cardinal polynomial on `nodes` at `x`.
pub fn lagrange_eval(nodes: &[f64], i: usize, x: f64) -> Result<f64> {
    check_index(nodes, i)?;
    Ok(LagrangeBasis::new(nodes)?.eval(i, x))
}

/// First derivative of the `i`-th Lagrange cardinal polynomial on `nodes` at `x`.
pub fn lagrange_deriv(nodes: &[f64], i: usize, x: f64) -> Result<f64> {
    check_index(nodes, i)?;
    Ok(LagrangeBasis::new(nodes)?.deriv(i, x))
}

fn check_index(nodes: &[f64], i: usize) -> Result<()> {
    if i >= nodes.len() {
        return Err(invalid(format!(
            "basis index {i} out of range for {} nodes",
            nodes.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of x^p over [-1, 1].
    fn monomial_integral(p: usize) -> f64 {
        if p % 2 == 1 {
            0.0
        } else {
            2.0 / (p as f64 + 1.0)
        }
    }

    fn check_rule(rule: &QuadratureRule) {
        let n = rule.len();
        for w in rule.nodes.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(rule.nodes.iter().all(|x| x.abs() <= 1.0));
        for i in 0..n {
            assert!((rule.nodes[i] + rule.nodes[n - 1 - i]).abs() <= 1e-14);
            assert!((rule.weights[i] - rule.weights[n - 1 - i]).abs() <= 1e-14);
            assert!(rule.weights[i] > 0.0);
        }
        assert!((rule.weights.iter().sum::<f64>() - 2.0).abs() <= 1e-13);
        for p in 0..=rule.exact_degree() {
            let got = rule.integrate(|x| x.powi(p as i32));
            assert!(
                (got - monomial_integral(p)).abs() <= 1e-12,
                "{} n={n} p={p}: {got}",
                rule.kind
            );
        }
    }

    #[test]
    fn gl_small_rules() {
        let r1 = gl_rule(1).unwrap();
        assert_eq!(r1.nodes, vec![0.0]);
        assert_eq!(r1.weights, vec![2.0]);

        let r2 = gl_rule(2).unwrap();
        let x = 1.0 / 3f64.sqrt();
        assert!((r2.nodes[0] + 0.5773502691896258).abs() < 1e-15);
        assert!((r2.nodes[1] - x).abs() < 1e-15);
        assert!((r2.weights[0] - 1.0).abs() < 1e-15 && (r2.weights[1] - 1.0).abs() < 1e-15);

        let r3 = gl_rule(3).unwrap();
        assert!((r3.integrate(|x| x.powi(4)) - 0.4).abs() <= 1e-13);
    }

    #[test]
    fn gll_small_rules() {
        let r2 = gll_rule(2).unwrap();
        assert_eq!(r2.nodes, vec![-1.0, 1.0]);
        assert_eq!(r2.weights, vec![1.0, 1.0]);

        let r3 = gll_rule(3).unwrap();
        assert_eq!(r3.nodes, vec![-1.0, 0.0, 1.0]);
        for (w, e) in r3.weights.iter().zip([1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]) {
            assert!((w - e).abs() < 1e-15);
        }
        let r4 = gll_rule(4).unwrap();
        assert!((r4.weights.iter().sum::<f64>() - 2.0).abs() <= 1e-13);
    }

    #[test]
    fn rules_satisfy_invariants_up_to_20() {
        for n in 2..=20 {
            check_rule(&gl_rule(n).unwrap());
            check_rule(&gll_rule(n).unwrap());
        }
    }

    #[test]
    fn newton_residuals_are_tiny() {
        for n in 2..=20 {
            for &x in &gl_rule(n).unwrap().nodes {
                assert!(legendre_and_derivative(n, x).0.abs() <= 1e-14, "GL n={n}");
            }
            let gll = gll_rule(n).unwrap();
            for &x in &gll.nodes[1..n - 1] {
                assert!(legendre_and_derivative(n - 1, x).1.abs() <= 1e-14 * (n * n) as f64);
            }
        }
    }

    #[test]
    fn rejects_too_few_points() {
        assert!(gl_rule(0).is_err());
        assert!(gll_rule(1).is_err());
    }

    #[test]
    fn legendre_values() {
        assert_eq!(legendre_and_derivative(2, 0.0), (-0.5, 0.0));
        assert_eq!(legendre_and_derivative(1, 0.3), (0.3, 1.0));
        let (p, dp) = legendre_and_derivative(5, 1.0);
        assert!((p - 1.0).abs() < 1e-15 && (dp - 15.0).abs() < 1e-13);
        // finite-difference oracle for the derivative at the endpoint
        let h = 1e-6;
        let fd = (legendre_and_derivative(5, 1.0).0 - legendre_and_derivative(5, 1.0 - h).0) / h;
        assert!((fd - 15.0).abs() < 1e-3);
    }

    #[test]
    fn lagrange_cardinality_and_partition_of_unity() {
        let nodes = gll_rule(6).unwrap().nodes;
        let basis = LagrangeBasis::new(&nodes).unwrap();
        for i in 0..nodes.len() {
            for (j, &xj) in nodes.iter().enumerate() {
                assert_eq!(basis.eval(i, xj), if i == j { 1.0 } else { 0.0 });
            }
        }
        for x in [-0.93, -0.1, 0.0001, 0.7] {
            let s: f64 = (0..nodes.len()).map(|i| basis.eval(i, x)).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn lagrange_rejects_duplicates_and_bad_index() {
        assert!(lagrange_eval(&[0.0, 0.5, 0.5], 0, 0.1).is_err());
        assert!(lagrange_deriv(&[0.0, 0.5], 2, 0.1).is_err());
    }

    #[test]
    fn lagrange_derivative_at_nodes_matches_fd() {
        let nodes = gl_rule(5).unwrap().nodes;
        let h = 1e-6;
        for i in 0..5 {
            for &x in &nodes {
                let fd =
                    (lagrange_eval(&nodes, i, x + h).unwrap() - lagrange_eval(&nodes, i, x - h).unwrap()) / (2.0 * h);
                let d = lagrange_deriv(&nodes, i, x).unwrap();
                assert!((d - fd).abs() <= 1e-6 * d.abs().max(1.0));
            }
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn lagrange_deriv_matches_central_differences(n in 1usize..=15, x in -0.99f64..0.99, i_frac in 0.0f64..1.0) {
                let nodes = gll_rule(n + 1).unwrap().nodes;
                let basis = LagrangeBasis::new(&nodes).unwrap();
                let i = ((i_frac * nodes.len() as f64) as usize).min(n);
                let h = 1e-6;
                let fd = (basis.eval(i, x + h) - basis.eval(i, x - h)) / (2.0 * h);
                let d = basis.deriv(i, x);
                prop_assert!((d - fd).abs() <= 1e-6 * d.abs().max(1.0), "d={} fd={}", d, fd);
            }
        }
    }
}

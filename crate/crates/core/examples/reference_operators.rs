//! One-dimensional interpolation and differentiation matrices, and the
//! sum-factorized contraction that applies them along one tensor axis.
//!
//! cargo run --example reference_operators -- 3

use bakeoff::quadrature::{gl_rule, gll_rule};
use bakeoff::reference_ops::{contract_dim, diff_matrix_gl, diff_matrix_gll, interp_matrix, OperatorMatrix, Tensor3};

fn show(name: &str, m: &OperatorMatrix) {
    println!(
        "{name} ({}x{}), centro-asymmetry {:.1e}",
        m.rows(),
        m.cols(),
        m.centro_asymmetry()
    );
    for a in 0..m.rows() {
        let row: Vec<String> = m.row(a).iter().map(|v| format!("{v:+.4}")).collect();
        println!("  {}", row.join(" "));
    }
}

fn main() -> bakeoff::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2);
    let interp = interp_matrix(n)?;
    show("GLL -> GL interpolation", &interp);
    show("GLL differentiation", &diff_matrix_gll(n)?);
    show("GL differentiation", &diff_matrix_gl(n)?);

    // interpolate x·y² + z sampled on GLL nodes, compare with the GL samples
    let gll = gll_rule(n + 1)?.nodes;
    let gl = gl_rule(n + 2)?.nodes;
    let f = |x: f64, y: f64, z: f64| x * y * y + z;
    let q = Tensor3::from_fn([n + 1; 3], |i, j, k| f(gll[i], gll[j], gll[k]));
    let mut t = q;
    for axis in [1, 0, 2] {
        t = contract_dim(&interp, &t, axis)?;
    }
    let mut err = 0.0f64;
    for k in 0..n + 2 {
        for j in 0..n + 2 {
            for i in 0..n + 2 {
                err = err.max((t.get(i, j, k) - f(gl[i], gl[j], gl[k])).abs());
            }
        }
    }
    println!(
        "3D interpolation of x*y^2 + z: max error {err:.2e} at {} GL points",
        t.data().len()
    );
    Ok(())
}

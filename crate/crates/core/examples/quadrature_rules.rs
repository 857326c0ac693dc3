//! Gauss-Legendre and Gauss-Lobatto-Legendre rules and their exactness.
//!
//! cargo run --example quadrature_rules -- 5

use bakeoff::quadrature::{gl_rule, gll_rule, LagrangeBasis};

fn main() -> bakeoff::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4);

    for rule in [gl_rule(n)?, gll_rule(n.max(2))?] {
        println!(
            "{} rule, {} points, exact to degree {}",
            rule.kind,
            rule.len(),
            rule.exact_degree()
        );
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            println!("  x = {x:+.16}  w = {w:.16}");
        }
        let d = rule.exact_degree() as i32;
        let exact = if d % 2 == 0 { 2.0 / (d as f64 + 1.0) } else { 0.0 };
        let got = rule.integrate(|x| x.powi(d));
        println!("  integral of x^{d}: {got:.16} (exact {exact})");
        let d = d + 1;
        let exact = if d % 2 == 0 { 2.0 / (d as f64 + 1.0) } else { 0.0 };
        println!(
            "  integral of x^{d}: {:.16} (exact {exact})",
            rule.integrate(|x| x.powi(d))
        );
    }

    // cardinal functions on the GLL nodes
    let gll = gll_rule(n.max(2))?;
    let basis = LagrangeBasis::new(&gll.nodes)?;
    let x = 0.3;
    let sum: f64 = (0..basis.len()).map(|i| basis.eval(i, x)).sum();
    let dsum: f64 = (0..basis.len()).map(|i| basis.deriv(i, x)).sum();
    println!(
        "partition of unity at x = {x}: sum l_i = {sum:.3e} - 1, sum l_i' = {dsum:.3e}",
        sum = sum - 1.0
    );
    Ok(())
}

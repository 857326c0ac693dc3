//! Cube meshes, vertex perturbation and the stored geometric factors.
//!
//! cargo run --example mesh_geometry

use bakeoff::mesh::{build_cube_mesh, factor, geometric_factors};
use bakeoff::quadrature::gl_rule;

fn main() -> bakeoff::Result<()> {
    let mesh = build_cube_mesh(4, 2.0)?;
    let curved = mesh.perturbed(0.3, 7)?;
    println!(
        "{} elements, volume {:.15} (perturbed {:.15})",
        mesh.len(),
        mesh.volume()?,
        curved.volume()?
    );

    let rule = gl_rule(4)?;
    let geo = geometric_factors(&curved, &rule)?;
    println!(
        "{} factors per element ({} points x 7), sum of GwJ = {:.15}",
        geo.element(0).len(),
        geo.points(),
        geo.total_weighted_jacobian()
    );
    let e = 21;
    let g = geo.metric(e, 0);
    println!("element {e}, first point: GwJ = {:.6}", geo.get(e, factor::GWJ, 0));
    println!("  G = {g:.6}");
    println!("  symmetric eigenvalues {:?}", g.symmetric_eigenvalues().as_slice());
    Ok(())
}

// Hessian-based metric for a steep front and the mesh that equidistributes it.

use std::sync::Arc;

use lahmesh::metric::{hessian_metric, smooth_metric};
use lahmesh::{equidistribute, mesh_quality, Mesh1D};

pub fn main() -> lahmesh::Result<()> {
    let fine = Arc::new(Mesh1D::uniform(0.0, 1.0, 400)?);
    let u: Vec<f64> = fine.nodes().iter().map(|x| ((x - 0.6) / 0.02).tanh()).collect();
    let m = smooth_metric(&hessian_metric(&u, &fine, 1.0)?, 3);

    let mesh = Arc::new(equidistribute(&m, &fine, 40)?);
    let q = mesh_quality(&mesh, &m.interpolate_to(&mesh)?)?;
    println!(
        "40 elements: widths {:.2e}..{:.2e}, equidistribution residual {:.3}",
        q.min_width, q.max_width, q.equidistribution_residual
    );
    let near_front = mesh.nodes().iter().filter(|x| (*x - 0.6).abs() < 0.1).count();
    println!("{near_front} of {} nodes within 0.1 of the front", mesh.len());
    Ok(())
}

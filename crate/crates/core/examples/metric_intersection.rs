// Intersecting metric tensors: the result asks for the finer resolution of both inputs.

use std::sync::Arc;

use lahmesh::{metric_intersect_field, spd_intersect, Mesh1D, MetricField, SpdMatrix};

pub fn main() -> lahmesh::Result<()> {
    // two anisotropic 2x2 metrics, refined along different directions
    let a = SpdMatrix::diag(&[100.0, 1.0])?;
    let b = SpdMatrix::new(2, &[5.0, 4.0, 4.0, 5.0])?;
    let c = spd_intersect(&a, &b)?;
    println!("A = {:?}", a.upper_triangle());
    println!("B = {:?}", b.upper_triangle());
    println!("A ∩ B = {:?}, det {:.3} (A {:.1}, B {:.1})", c.upper_triangle(), c.det(), a.det(), b.det());

    // in 1D the intersection is a pointwise maximum
    let mesh = Arc::new(Mesh1D::uniform(0.0, 1.0, 4)?);
    let m1 = MetricField::from_scalars(mesh.clone(), vec![1.0, 4.0, 2.0, 1.0, 1.0])?;
    let m2 = MetricField::from_scalars(mesh, vec![3.0, 1.0, 1.0, 1.0, 9.0])?;
    let m = metric_intersect_field(&[m1, m2])?;
    println!("1D intersection: {:?}", m.scalars());
    Ok(())
}

// Point and kernel-averaged observations of a field on a nonuniform mesh, static and moving.

use std::sync::Arc;

use lahmesh::observations::{moving_locations, obs_nonlocal, obs_pointwise, GaussKernel};
use lahmesh::{Mesh1D, StateField};

pub fn main() -> lahmesh::Result<()> {
    let x: Vec<f64> = (0..=100).map(|i| 0.5 - 0.5 * (std::f64::consts::PI * i as f64 / 100.0).cos()).collect();
    let mesh = Arc::new(Mesh1D::new(x)?);
    let u = StateField::from_fn(mesh.clone(), 1, |_, x| (6.0 * x).sin());

    let locs = [0.1, 0.35, 0.6, 0.85];
    let point = obs_pointwise(u.component(0), &mesh, &locs)?;
    let kernel = GaussKernel::new(2e-2)?;
    let averaged = obs_nonlocal(u.component(0), &mesh, &locs, &kernel, 0.05)?;
    for ((l, p), a) in locs.iter().zip(&point).zip(&averaged) {
        println!("x = {l:.2}: point {p:+.4}, kernel average {a:+.4}, exact {:+.4}", (6.0 * l).sin());
    }

    // observers sliding back and forth
    let base: Vec<f64> = (0..5).map(|k| 0.3 + 0.1 * k as f64).collect();
    for t in [0.0, 2e-4, 4e-4] {
        let at = moving_locations(t, &base, 0.25, 750.0);
        println!("t = {t:.1e}: {:?}", at.iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>());
    }
    Ok(())
}

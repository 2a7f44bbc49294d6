// Coupled Kuramoto-Sivashinsky system with linearly implicit Euler steps.

use std::sync::Arc;

use lahmesh::config::KseConfig;
use lahmesh::models::kse::kse_initial;
use lahmesh::models::kse_step;
use lahmesh::Mesh1D;

pub fn main() -> lahmesh::Result<()> {
    let p = KseConfig::default().params();
    let mesh = Arc::new(Mesh1D::uniform(0.0, 1.0, 200)?);
    let mut u = kse_initial(mesh, 1.0);
    let dt = 2.5e-5;
    let mut t = 0.0;
    for block in 0..5 {
        for _ in 0..40 {
            u = kse_step(&u, dt, &p, t)?;
            t += dt;
        }
        let amp: Vec<f64> = u
            .components()
            .iter()
            .map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect();
        println!("block {block}: t = {t:.4}, max|u1| {:.3}, max|u2| {:.3}", amp[0], amp[1]);
    }
    Ok(())
}

// Nonuniform finite differences against exact derivatives of sin(pi x).

use std::f64::consts::PI;

use lahmesh::models::fd_apply;
use lahmesh::Mesh1D;

pub fn main() -> lahmesh::Result<()> {
    for n in [50, 100, 200] {
        // smoothly graded mesh, widths vary by a factor of about 2.3;
        // nested differences lose accuracy where neighbouring widths jump
        let x: Vec<f64> = (0..=n)
            .map(|i| {
                let s = i as f64 / n as f64;
                s - 0.4 * (2.0 * PI * s).sin() / (2.0 * PI)
            })
            .collect();
        let mesh = Mesh1D::new(x)?;
        let u: Vec<f64> = mesh.nodes().iter().map(|x| (PI * x).sin()).collect();
        let d2 = fd_apply(&u, &mesh, 2)?;
        let d4 = fd_apply(&u, &mesh, 4)?;
        let (mut e2, mut e4) = (0.0f64, 0.0f64);
        for (j, &x) in mesh.nodes().iter().enumerate().skip(2).take(n - 3) {
            e2 = e2.max((d2[j] + PI * PI * (PI * x).sin()).abs());
            e4 = e4.max((d4[j] - PI.powi(4) * (PI * x).sin()).abs());
        }
        println!("n = {n:>3}: max error u_xx {e2:.2e}, u_xxxx {e4:.2e}");
    }
    Ok(())
}

// Adaptive time stepping and arc-length remeshing for the Nagumo travelling front.

use std::sync::Arc;

use lahmesh::models::nagumo::RemeshOptions;
use lahmesh::models::{nagumo_exact, nagumo_run_adaptive, AdaptiveOptions, NagumoParams};
use lahmesh::{Mesh1D, StateField};

pub fn main() -> lahmesh::Result<()> {
    let p = NagumoParams::default();
    let mesh = Arc::new(Mesh1D::uniform(0.0, p.length, 200)?);
    let u0 = StateField::from_fn(mesh, 1, |_, x| nagumo_exact(x, 0.0, &p));
    let tol = AdaptiveOptions {
        tol_abs: 1e-4,
        tol_rel: 1e-4,
        dt_max: 0.5,
        ..Default::default()
    };
    // arc-length refines this front only about twofold, so the linear interpolation
    // at each remesh costs about as much accuracy as the finer elements recover
    for remesh in [None, Some(RemeshOptions::default())] {
        let run = nagumo_run_adaptive(&u0, (0.0, 10.0), &p, tol, remesh)?;
        let u = &run.final_state;
        let err = u
            .mesh()
            .nodes()
            .iter()
            .zip(u.component(0))
            .fold(0.0f64, |m, (&x, &v)| m.max((v - nagumo_exact(x, run.t_end, &p)).abs()));
        println!(
            "{:<8} steps {:>3} (rejected {}), remeshes {}, max error {err:.2e}",
            if remesh.is_some() { "moving" } else { "fixed" },
            run.accepted_dt.len(),
            run.rejected,
            run.remeshes
        );
    }
    println!("front speed c = {:.5}", p.c());
    Ok(())
}

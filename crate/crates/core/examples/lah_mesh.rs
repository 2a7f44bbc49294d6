// Look-ahead mesh for one observation interval from a small ensemble of pre-forecasts.

use std::sync::Arc;

use lahmesh::config::{CycleConfig, ModelConfig, Variant};
use lahmesh::cycle::{build_lah_metric, build_model, pre_forecast, MeshPolicy};
use lahmesh::models::nagumo_exact;
use lahmesh::rng::{stream, Purpose};
use lahmesh::{equidistribute, Mesh1D, StateField};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn main() -> lahmesh::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/nagumo.toml");
    let cfg = CycleConfig::load(path.as_ref())?;
    let ModelConfig::Nagumo(nc) = &cfg.model else {
        unreachable!("nagumo config")
    };
    let model = build_model(&cfg);
    let policy = MeshPolicy::new(&cfg.mesh, cfg.observations.spec()?)?;
    let (lo, hi) = model.domain();
    let mesh = Arc::new(Mesh1D::uniform(lo, hi, cfg.n_elements)?);

    // members differ in front position
    let small: Vec<StateField> = (0..cfg.n_small)
        .map(|i| {
            let z: f64 = stream(cfg.seed, Purpose::InitialEnsemble, 0, i as u64).sample(StandardNormal);
            let p = lahmesh::models::NagumoParams {
                x0: nc.x0 + 0.5 * z,
                ..nc.params()
            };
            StateField::from_fn(mesh.clone(), 1, |_, x| nagumo_exact(x, 0.0, &p))
        })
        .collect();

    let t1 = 10.0;
    let mut contributions = Vec::new();
    for (i, u) in small.iter().enumerate() {
        let pf = pre_forecast(model.as_ref(), &policy, u, 0.0, t1, Variant::Nonflow)?;
        println!("member {i}: {} steps, {} mesh moves", pf.accepted_steps, pf.remeshes);
        contributions.push(pf.contribution);
    }
    let m = build_lah_metric(&contributions, &mesh, cfg.mesh.smoothing_sweeps)?;
    let lah = equidistribute(&m, &mesh, cfg.n_elements)?;

    let c = nc.params().c();
    let (a, b) = (nc.x0 - 1.5, nc.x0 + 1.5 + t1 * c);
    let inside = lah.nodes().iter().filter(|x| (a..=b).contains(*x)).count();
    let uniform = mesh.nodes().iter().filter(|x| (a..=b).contains(*x)).count();
    println!(
        "look-ahead mesh: widths {:.3e}..{:.3e}; {inside} nodes on the fronts' path [{a:.2}, {b:.2}], {uniform} on a uniform mesh",
        lah.min_width(),
        lah.max_width(),
    );
    Ok(())
}

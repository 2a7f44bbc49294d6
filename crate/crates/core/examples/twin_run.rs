// A short KSE twin experiment with look-ahead meshes.

use lahmesh::config::{CycleConfig, ModelConfig};
use lahmesh::cycle::run_twin_with;
use lahmesh::experiments::summarize;

pub fn main() -> lahmesh::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/kse_static.toml");
    let mut cfg = CycleConfig::load(path.as_ref())?;
    // a small version of the bundled protocol
    cfg.n_cycles = 12;
    cfg.spinup_cycles = 4;
    cfg.n_elements = 100;
    cfg.observations.count = 100;
    cfg.observations.first = 5e-3;
    cfg.observations.spacing = 1e-2;
    cfg.mesh.sigma = 2.5e-3;
    if let ModelConfig::Kse(k) = &mut cfg.model {
        k.truth_spinup = 0.01;
    }
    let t = std::time::Instant::now();
    let run = run_twin_with(&cfg, |r| {
        println!(
            "cycle {:>2}: rmse {:.4}/{:.4}, spread {:.4}, min width {:.2e}",
            r.cycle,
            r.rmse[0],
            r.rmse[1],
            r.spread[0],
            r.mesh.min_width()
        )
    })?;
    println!("{}", summarize(&run, t.elapsed().as_secs_f64()));
    Ok(())
}

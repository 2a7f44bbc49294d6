// Matched runs along one axis: coupled and uncoupled analyses.

use lahmesh::config::{CycleConfig, ModelConfig};
use lahmesh::cycle::run_twin;
use lahmesh::experiments::{compare_configs, summarize, CompareAxis};

pub fn main() -> lahmesh::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/kse_static.toml");
    let mut cfg = CycleConfig::load(path.as_ref())?;
    cfg.n_cycles = 8;
    cfg.spinup_cycles = 2;
    cfg.n_elements = 80;
    cfg.observations.count = 80;
    cfg.observations.first = 6.25e-3;
    cfg.observations.spacing = 1.25e-2;
    cfg.mesh.sigma = 3e-3;
    if let ModelConfig::Kse(k) = &mut cfg.model {
        k.truth_spinup = 0.01;
    }
    for (label, c) in compare_configs(&cfg, CompareAxis::Coupling) {
        let t = std::time::Instant::now();
        let run = run_twin(&c)?;
        println!("[{label}]\n{}\n", summarize(&run, t.elapsed().as_secs_f64()));
    }
    Ok(())
}

// Meshes for a travelling front at several times, and the single mesh that serves them all.

use lahmesh::config::CycleConfig;
use lahmesh::experiments::mesh_demo;

pub fn main() -> lahmesh::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/nagumo.toml");
    let cfg = CycleConfig::load(path.as_ref())?;
    let demo = mesh_demo(&cfg, &[0.0, 20.0, 40.0])?;
    for (t, m) in demo.times.iter().zip(&demo.snapshot_meshes) {
        println!("t = {t:>4}: min width {:.3e}, max width {:.3e}", m.min_width(), m.max_width());
    }
    let m = &demo.combined_mesh;
    println!("combined: min width {:.3e}, max width {:.3e}", m.min_width(), m.max_width());
    Ok(())
}

//! Experiment drivers behind the `lahmesh` commands. Each writes CSV files into
//! an output directory and returns a summary.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use crate::config::{CycleConfig, CouplingChoice, ModelConfig, Variant};
use crate::cycle::{rmse_series, run_twin, TwinRun};
use crate::error::{Error, Result};
use crate::io::{csv_writer, fmt_f64};
use crate::mesh::{equidistribute, Mesh1D};
use crate::metric::{arclength_metric, metric_intersect_field, MetricField};
use crate::models::nagumo_exact;

/// Time-averaged results of one twin run.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinSummary {
    pub cycles: usize,
    pub spinup: usize,
    pub mean_rmse: Vec<f64>,
    /// Fraction of post-spin-up cycles whose windowed RMSE is below `sqrt(R)`, per component.
    pub below_obs_error: Vec<f64>,
    pub steps_mean: f64,
    pub steps_std: f64,
    pub wall_seconds: f64,
}

impl fmt::Display for TwinSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cycles {} (spin-up {})", self.cycles, self.spinup)?;
        for (c, (r, b)) in self.mean_rmse.iter().zip(&self.below_obs_error).enumerate() {
            writeln!(f, "component {c}: mean RMSE {r:.5}, windowed RMSE below sqrt(R) in {:.1}% of cycles", 100.0 * b)?;
        }
        writeln!(f, "forecast steps per member: mean {:.2}, std {:.3}", self.steps_mean, self.steps_std)?;
        write!(f, "wall time {:.2} s", self.wall_seconds)
    }
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

pub fn summarize(run: &TwinRun, wall_seconds: f64) -> TwinSummary {
    let cfg = &run.config;
    let spinup = cfg.spinup_cycles.min(run.records.len());
    let windowed = rmse_series(&run.records, cfg.rmse_window);
    let threshold = cfg.observations.r_var.sqrt();
    let below_obs_error = windowed
        .iter()
        .map(|s| {
            let tail = &s[spinup..];
            tail.iter().filter(|&&v| v < threshold).count() as f64 / tail.len().max(1) as f64
        })
        .collect();
    let steps: Vec<f64> = run.steps_per_member().iter().map(|&s| s as f64).collect();
    let (steps_mean, steps_std) = mean_std(&steps);
    TwinSummary {
        cycles: run.records.len(),
        spinup,
        mean_rmse: run.mean_rmse(spinup),
        below_obs_error,
        steps_mean,
        steps_std,
        wall_seconds,
    }
}

fn component_headers(prefix: &str, nc: usize) -> Vec<String> {
    (0..nc).map(|c| format!("{prefix}_c{c}")).collect()
}

/// Writes rmse.csv, steps.csv, mesh.csv, timings.csv and config.toml into `out`.
pub fn write_run(run: &TwinRun, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.toml"), run.config.resolved().to_toml()?)?;
    let nc = run.records.first().map_or(0, |r| r.rmse.len());
    let windowed = rmse_series(&run.records, run.config.rmse_window);

    let mut w = csv_writer(&out.join("rmse.csv"), "rmse")?;
    let mut header = vec!["cycle".to_string(), "t".to_string()];
    for p in ["rmse", "rmse_window", "forecast_rmse", "spread"] {
        header.extend(component_headers(p, nc));
    }
    header.extend(["min_width", "max_width", "interpolations", "nodes_without_obs"].map(String::from));
    w.write_record(&header)?;
    for (i, r) in run.records.iter().enumerate() {
        let mut row = vec![r.cycle.to_string(), fmt_f64(r.time)];
        row.extend(r.rmse.iter().map(|&v| fmt_f64(v)));
        row.extend(windowed.iter().map(|s| fmt_f64(s[i])));
        row.extend(r.forecast_rmse.iter().map(|&v| fmt_f64(v)));
        row.extend(r.spread.iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(r.mesh.min_width()));
        row.push(fmt_f64(r.mesh.max_width()));
        row.push(r.interpolations.to_string());
        row.push(r.nodes_without_obs.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv_writer(&out.join("steps.csv"), "steps")?;
    w.write_record(["cycle", "t", "phase", "member", "accepted_steps"])?;
    for r in &run.records {
        for (phase, steps) in [("forecast", &r.steps), ("pre_forecast", &r.pre_steps)] {
            for (i, s) in steps.iter().enumerate() {
                w.write_record([r.cycle.to_string(), fmt_f64(r.time), phase.into(), i.to_string(), s.to_string()])?;
            }
        }
    }
    w.flush()?;

    let mut w = csv_writer(&out.join("mesh.csv"), "mesh")?;
    w.write_record(["cycle", "t", "node", "x"])?;
    for r in run.records.iter().filter(|r| r.cycle % run.config.mesh_every == 0) {
        for (k, x) in r.mesh.nodes().iter().enumerate() {
            w.write_record([r.cycle.to_string(), fmt_f64(r.time), k.to_string(), fmt_f64(*x)])?;
        }
    }
    w.flush()?;

    // wall-clock values, kept apart so the files above are reproducible
    let mut w = csv_writer(&out.join("timings.csv"), "timings")?;
    w.write_record(["cycle", "pre_forecast", "mesh", "interpolation", "forecast", "analysis"])?;
    for r in &run.records {
        let t = r.timings;
        w.write_record([
            r.cycle.to_string(),
            fmt_f64(t.pre_forecast),
            fmt_f64(t.mesh),
            fmt_f64(t.interpolation),
            fmt_f64(t.forecast),
            fmt_f64(t.analysis),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs a twin experiment and writes its records into `out`.
pub fn cmd_run_twin(cfg: &CycleConfig, out: &Path) -> Result<TwinSummary> {
    let clock = Instant::now();
    let run = run_twin(cfg)?;
    let summary = summarize(&run, clock.elapsed().as_secs_f64());
    write_run(&run, out)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareAxis {
    /// Non-flow against flow look-ahead metrics.
    Flow,
    /// Static uniform mesh against adaptive meshes with the same node count.
    Mesh,
    Coupling,
    /// Small-ensemble sizes 1, 2, 4, 8.
    Nse,
}

impl FromStr for CompareAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flow" => Ok(Self::Flow),
            "mesh" => Ok(Self::Mesh),
            "coupling" => Ok(Self::Coupling),
            "nse" => Ok(Self::Nse),
            _ => Err(Error::param("axis", format!("unknown axis `{s}` (flow, mesh, coupling, nse)"))),
        }
    }
}

/// The labelled configurations a comparison runs.
pub fn compare_configs(cfg: &CycleConfig, axis: CompareAxis) -> Vec<(String, CycleConfig)> {
    let with = |label: &str, f: &dyn Fn(&mut CycleConfig)| {
        let mut c = cfg.clone();
        f(&mut c);
        (label.to_string(), c)
    };
    match axis {
        CompareAxis::Flow => vec![
            with("nonflow", &|c| c.variant = Variant::Nonflow),
            with("flow", &|c| c.variant = Variant::Flow),
        ],
        CompareAxis::Mesh => vec![
            with("uniform", &|c| c.mesh.adaptive = false),
            with("adaptive", &|c| c.mesh.adaptive = true),
        ],
        CompareAxis::Coupling => vec![
            with("coupled", &|c| c.coupling = CouplingChoice::Coupled),
            with("uncoupled", &|c| c.coupling = CouplingChoice::Uncoupled),
        ],
        CompareAxis::Nse => [1, 2, 4, 8]
            .into_iter()
            .filter(|&k| k <= cfg.n_members)
            .map(|k| (format!("nse{k}"), CycleConfig { n_small: k, ..cfg.clone() }))
            .collect(),
    }
}

/// Runs the matched configurations of `axis` (same seed, hence the same truth
/// and observation noise) and writes compare.csv and compare_summary.csv.
pub fn cmd_compare(cfg: &CycleConfig, axis: CompareAxis, out: &Path) -> Result<Vec<(String, TwinSummary)>> {
    std::fs::create_dir_all(out)?;
    let mut runs = Vec::new();
    for (label, c) in compare_configs(cfg, axis) {
        let clock = Instant::now();
        let run = run_twin(&c)?;
        let s = summarize(&run, clock.elapsed().as_secs_f64());
        runs.push((label, run, s));
    }
    let nc = cfg.model.n_components();

    let mut w = csv_writer(&out.join("compare.csv"), "compare")?;
    let mut header = vec!["label".to_string(), "cycle".into(), "t".into()];
    header.extend(component_headers("rmse", nc));
    header.extend(component_headers("rmse_window", nc));
    w.write_record(&header)?;
    for (label, run, _) in &runs {
        let windowed = rmse_series(&run.records, cfg.rmse_window);
        for (i, r) in run.records.iter().enumerate() {
            let mut row = vec![label.clone(), r.cycle.to_string(), fmt_f64(r.time)];
            row.extend(r.rmse.iter().map(|&v| fmt_f64(v)));
            row.extend(windowed.iter().map(|s| fmt_f64(s[i])));
            w.write_record(&row)?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(&out.join("compare_summary.csv"), "compare_summary")?;
    let mut header = vec!["label".to_string()];
    header.extend(component_headers("mean_rmse", nc));
    header.extend(component_headers("delta_vs_first", nc));
    header.extend(["steps_mean", "steps_std"].map(String::from));
    w.write_record(&header)?;
    let base = runs[0].2.mean_rmse.clone();
    for (label, _, s) in &runs {
        let mut row = vec![label.clone()];
        row.extend(s.mean_rmse.iter().map(|&v| fmt_f64(v)));
        row.extend(s.mean_rmse.iter().zip(&base).map(|(v, b)| fmt_f64(v - b)));
        row.push(fmt_f64(s.steps_mean));
        row.push(fmt_f64(s.steps_std));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(runs.into_iter().map(|(l, _, s)| (l, s)).collect())
}

/// Meshes for a travelling wave at several times and the mesh from their
/// intersected metrics.
#[derive(Debug, Clone)]
pub struct MeshDemo {
    pub times: Vec<f64>,
    /// Uniform mesh the metrics are evaluated on.
    pub eval_mesh: Arc<Mesh1D>,
    pub snapshot_metrics: Vec<MetricField>,
    pub snapshot_meshes: Vec<Mesh1D>,
    pub combined_metric: MetricField,
    pub combined_mesh: Mesh1D,
}

pub fn mesh_demo(cfg: &CycleConfig, times: &[f64]) -> Result<MeshDemo> {
    let ModelConfig::Nagumo(n) = &cfg.model else {
        return Err(Error::param("model.kind", "mesh-demo needs the nagumo model"));
    };
    let p = n.params();
    let eval_mesh = Arc::new(Mesh1D::uniform(0.0, p.length, cfg.n_elements * cfg.truth_refinement)?);
    let snapshot_metrics = times
        .iter()
        .map(|&t| {
            let u: Vec<f64> = eval_mesh.nodes().iter().map(|&x| nagumo_exact(x, t, &p)).collect();
            arclength_metric(&u, &eval_mesh)
        })
        .collect::<Result<Vec<_>>>()?;
    let snapshot_meshes = snapshot_metrics
        .iter()
        .map(|m| equidistribute(m, &eval_mesh, cfg.n_elements))
        .collect::<Result<Vec<_>>>()?;
    let combined_metric = metric_intersect_field(&snapshot_metrics)?;
    let combined_mesh = equidistribute(&combined_metric, &eval_mesh, cfg.n_elements)?;
    Ok(MeshDemo {
        times: times.to_vec(),
        eval_mesh,
        snapshot_metrics,
        snapshot_meshes,
        combined_metric,
        combined_mesh,
    })
}

/// Writes profiles.csv, density.csv and meshes.csv for [`mesh_demo`].
pub fn cmd_mesh_demo(cfg: &CycleConfig, times: &[f64], out: &Path) -> Result<MeshDemo> {
    let demo = mesh_demo(cfg, times)?;
    let ModelConfig::Nagumo(n) = &cfg.model else { unreachable!() };
    let p = n.params();
    std::fs::create_dir_all(out)?;

    let mut w = csv_writer(&out.join("profiles.csv"), "profiles")?;
    w.write_record(["t", "x", "u"])?;
    for &t in times {
        for &x in demo.eval_mesh.nodes() {
            w.write_record([fmt_f64(t), fmt_f64(x), fmt_f64(nagumo_exact(x, t, &p))])?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(&out.join("density.csv"), "density")?;
    let mut header = vec!["x".to_string()];
    header.extend(times.iter().map(|t| format!("m_t{t}")));
    header.push("m_combined".into());
    w.write_record(&header)?;
    let cols: Vec<Vec<f64>> = demo
        .snapshot_metrics
        .iter()
        .chain([&demo.combined_metric])
        .map(|m| m.scalars())
        .collect();
    for (k, &x) in demo.eval_mesh.nodes().iter().enumerate() {
        let mut row = vec![fmt_f64(x)];
        row.extend(cols.iter().map(|c| fmt_f64(c[k])));
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv_writer(&out.join("meshes.csv"), "meshes")?;
    w.write_record(["label", "node", "x"])?;
    let labels = times.iter().map(|t| format!("t={t}")).chain(["combined".to_string()]);
    for (label, mesh) in labels.zip(demo.snapshot_meshes.iter().chain([&demo.combined_mesh])) {
        for (k, &x) in mesh.nodes().iter().enumerate() {
            w.write_record([label.clone(), k.to_string(), fmt_f64(x)])?;
        }
    }
    w.flush()?;
    Ok(demo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::NagumoConfig;

    #[test]
    fn mesh_demo_combined_density_dominates() {
        let cfg = CycleConfig {
            model: ModelConfig::Nagumo(NagumoConfig::default()),
            n_elements: 100,
            ..CycleConfig::default()
        };
        let demo = mesh_demo(&cfg, &[0.0, 20.0, 40.0]).unwrap();
        assert_eq!(demo.snapshot_meshes.len(), 3);
        let comb = demo.combined_metric.scalars();
        for m in &demo.snapshot_metrics {
            for (c, s) in comb.iter().zip(m.scalars()) {
                assert!(*c >= s);
            }
        }
        // each front is refined relative to a uniform mesh of the same size
        let p = NagumoConfig::default().params();
        let uniform = Mesh1D::uniform(0.0, p.length, cfg.n_elements).unwrap();
        let count = |m: &Mesh1D, c: f64| m.nodes().iter().filter(|&&x| (x - c).abs() < 0.6).count();
        for t in [0.0, 20.0, 40.0] {
            let front = p.x0 + p.c() * t;
            let near = count(&demo.combined_mesh, front);
            assert!(near > count(&uniform, front), "front at {front} has {near} nodes");
        }
        let kse = CycleConfig::default();
        assert!(mesh_demo(&kse, &[0.0]).is_err());
    }

    #[test]
    fn axis_parsing_and_configs() {
        assert_eq!("nse".parse::<CompareAxis>().unwrap(), CompareAxis::Nse);
        assert!("bogus".parse::<CompareAxis>().is_err());
        let cfg = CycleConfig::default();
        let c = compare_configs(&cfg, CompareAxis::Nse);
        assert_eq!(c.iter().map(|(_, c)| c.n_small).collect::<Vec<_>>(), vec![1, 2, 4, 8]);
        let m = compare_configs(&cfg, CompareAxis::Mesh);
        assert!(!m[0].1.mesh.adaptive && m[1].1.mesh.adaptive);
    }
}

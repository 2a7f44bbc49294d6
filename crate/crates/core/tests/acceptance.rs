//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report is printed even under
//! `cargo test`. Pass criterion numbers to run a subset:
//! `cargo test --release --test acceptance -- 1 2 3`.
//! A FAIL is reported but does not fail the target unless `LAHMESH_STRICT=1`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use lahmesh::config::{CycleConfig, Method, Variant};
use lahmesh::cycle::{rmse_series, run_twin, TwinRun};
use lahmesh::experiments::mean_std;
use lahmesh::letkf::{
    etkf_weights, etkf_weights_obs_space, local_analysis, AnalysisConfig, Coupling, EnsembleState,
};
use lahmesh::models::stepping::AdaptiveOptions;
use lahmesh::models::{fd_apply, nagumo_exact, nagumo_run_adaptive, NagumoParams};
use lahmesh::models::nagumo::RemeshOptions;
use lahmesh::observations::{GaussKernel, ObsEntry, ObsKind, ObservationSet};
use lahmesh::{spd_intersect, Mesh1D, SpdMatrix, StateField};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn config(name: &str) -> CycleConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    CycleConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> SpdMatrix {
    // random orthogonal basis and eigenvalues spread over six decades
    let g = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let lam = DVector::from_fn(d, |_, _| 10f64.powf(rng.random_range(-3.0..3.0)));
    let a = &q * DMatrix::from_diagonal(&lam) * q.transpose();
    let a = (&a + a.transpose()) * 0.5;
    SpdMatrix::from_dmatrix(&a).expect("random SPD")
}

fn min_eig(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.min()
}

fn c1_spd_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = [0.0f64; 4];
    let mut failures = 0;
    for d in 1..=3 {
        for _ in 0..1000 {
            let a = random_spd(&mut rng, d);
            let b = random_spd(&mut rng, d);
            let c = spd_intersect(&a, &b).expect("intersection");
            let (am, bm, cm) = (a.to_dmatrix(), b.to_dmatrix(), c.to_dmatrix());
            let scale = cm.norm();
            let dominance = min_eig(&(&cm - &am)).min(min_eig(&(&cm - &bm))) / scale;
            let det_gap = (a.det().max(b.det()) - c.det()) / c.det();
            let self_err = (spd_intersect(&a, &a).unwrap().to_dmatrix() - &am).norm() / am.norm();
            let comm = (spd_intersect(&b, &a).unwrap().to_dmatrix() - &cm).norm() / scale;
            worst[0] = worst[0].max(-dominance);
            worst[1] = worst[1].max(det_gap);
            worst[2] = worst[2].max(self_err);
            worst[3] = worst[3].max(comm);
            let ok = c.min_eigenvalue() > 0.0
                && dominance >= -1e-10
                && det_gap <= 1e-10
                && self_err <= 1e-10
                && comm <= 1e-8;
            failures += usize::from(!ok);
        }
    }
    Outcome::new(
        failures == 0,
        format!(
            "3000 pairs, {failures} violations; worst dominance {:.1e}, det gap {:.1e}, A∩A {:.1e}, commutativity {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn random_mesh(rng: &mut ChaCha8Rng, n: usize) -> Mesh1D {
    let mut x = vec![rng.random_range(-1.0..1.0)];
    for _ in 0..n {
        let w: f64 = rng.random_range(0.05..1.0);
        x.push(x.last().unwrap() + w);
    }
    Mesh1D::new(x).unwrap()
}

fn c2_fd_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (mut e2, mut e4) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(10..60);
        let m = random_mesh(&mut rng, n);
        let u: Vec<f64> = m.nodes().iter().map(|x| x * x).collect();
        let d2 = fd_apply(&u, &m, 2).unwrap();
        let d4 = fd_apply(&u, &m, 4).unwrap();
        // interior rows; boundary rows carry the odd-reflection closure
        for v in &d2[1..m.len() - 1] {
            e2 = e2.max((v - 2.0).abs());
        }
        let scale = 1.0 / m.min_width().powi(2);
        for v in &d4[2..m.len() - 2] {
            e4 = e4.max(v.abs() / scale);
        }
    }
    Outcome::new(
        e2 < 1e-10 && e4 < 1e-8,
        format!("max |D2 x^2 - 2| = {e2:.1e}, max |D4 x^2| / scale = {e4:.1e}"),
    )
}

fn c3_etkf_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let ne = rng.random_range(2..=10);
        let ny = rng.random_range(1..=50);
        let y = DMatrix::from_fn(ny, ne, |_, _| rng.random_range(-1.0..1.0));
        let r: Vec<f64> = (0..ny).map(|_| rng.random_range(0.01..1.0)).collect();
        let d: Vec<f64> = (0..ny).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = etkf_weights(&y, &r, &d).unwrap();
        let b = etkf_weights_obs_space(&y, &r, &d).unwrap();
        worst = worst.max((&a - &b).norm() / b.norm().max(f64::MIN_POSITIVE));
    }
    Outcome::new(worst <= 1e-10, format!("max relative difference {worst:.1e} over 100 instances"))
}

fn c4_nagumo_wave() -> Outcome {
    let p = NagumoParams::default();
    let mesh = Arc::new(Mesh1D::uniform(0.0, p.length, 400).unwrap());
    let u0 = StateField::from_fn(mesh, 1, |_, x| nagumo_exact(x, 0.0, &p));
    let tol = AdaptiveOptions {
        tol_abs: 1e-4,
        tol_rel: 1e-4,
        dt_initial: 1e-2,
        dt_min: 1e-10,
        dt_max: 0.5,
        safety: 0.9,
    };
    let run = match nagumo_run_adaptive(&u0, (0.0, 10.0), &p, tol, Some(RemeshOptions::default())) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("run failed: {e}")),
    };
    let u = &run.final_state;
    let err = u
        .mesh()
        .nodes()
        .iter()
        .zip(u.component(0))
        .fold(0.0f64, |m, (&x, &v)| m.max((v - nagumo_exact(x, run.t_end, &p)).abs()));
    Outcome::new(
        err <= 1e-2,
        format!(
            "L∞ error {err:.2e} at t = {}, {} steps, {} remeshes, min width {:.3e}",
            run.t_end,
            run.accepted_dt.len(),
            run.remeshes,
            u.mesh().min_width()
        ),
    )
}

fn step_std(cfg: &CycleConfig) -> f64 {
    let run = run_twin(cfg).expect("nagumo ensemble run");
    let steps: Vec<f64> = run.steps_per_member().iter().map(|&s| s as f64).collect();
    mean_std(&steps).1
}

fn c5_step_spread() -> Outcome {
    let base = config("nagumo.toml");
    let mut wins = 0;
    let mut rows = Vec::new();
    for seed in 1..=5 {
        let wide = CycleConfig { seed, p0: 0.1, ..base.clone() };
        let narrow = CycleConfig { seed, p0: 0.01, ..base.clone() };
        let (sw, sn) = (step_std(&wide), step_std(&narrow));
        wins += usize::from(sw > sn);
        rows.push(format!("seed {seed}: {sw:.2} vs {sn:.2}"));
    }
    Outcome::new(wins >= 4, format!("std of steps P0=0.1 vs 0.01, {wins}/5 larger; {}", rows.join(", ")))
}

/// Fraction of post-spin-up cycles whose windowed RMSE is below `bound`, per component.
fn fraction_below(run: &TwinRun, bound: f64) -> Vec<f64> {
    let cfg = &run.config;
    let series = rmse_series(&run.records, cfg.rmse_window);
    series
        .iter()
        .map(|s| {
            let tail = &s[cfg.spinup_cycles..];
            tail.iter().filter(|&&v| v < bound).count() as f64 / tail.len() as f64
        })
        .collect()
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join("/")
}

fn c6_kse_twin(run: &TwinRun) -> Outcome {
    let frac = fraction_below(run, 0.1);
    let mean = run.mean_rmse(run.config.spinup_cycles);
    Outcome::new(
        frac.iter().all(|&f| f >= 0.9),
        format!(
            "windowed RMSE < 0.1 on {} of post-spin-up cycles (u/v), mean RMSE {}",
            frac.iter().map(|f| format!("{:.0}%", 100.0 * f)).collect::<Vec<_>>().join("/"),
            fmt_vec(&mean)
        ),
    )
}

/// Protocol length for the comparison criteria.
fn shortened(mut cfg: CycleConfig, seed: u64) -> CycleConfig {
    cfg.seed = seed;
    cfg.n_cycles = 300;
    cfg.spinup_cycles = 100;
    cfg
}

fn c7_adaptive_vs_uniform() -> Outcome {
    let base = config("kse_sparse.toml");
    let mut wins = [0usize; 2];
    let mut rows = Vec::new();
    for seed in 1..=3 {
        let adaptive = shortened(base.clone(), seed);
        let mut uniform = adaptive.clone();
        uniform.mesh.adaptive = false;
        let a = run_twin(&adaptive).expect("adaptive run").mean_rmse(adaptive.spinup_cycles);
        let u = run_twin(&uniform).expect("uniform run").mean_rmse(uniform.spinup_cycles);
        for c in 0..2 {
            wins[c] += usize::from(a[c] <= u[c]);
        }
        rows.push(format!("seed {seed}: {} vs {}", fmt_vec(&a), fmt_vec(&u)));
    }
    Outcome::new(
        wins.iter().all(|&w| w >= 2),
        format!("adaptive ≤ uniform on u {}/3, v {}/3 seeds; {}", wins[0], wins[1], rows.join(", ")),
    )
}

fn c8_flow_vs_nonflow() -> Outcome {
    let variants = |cfg: &CycleConfig| {
        let nonflow = CycleConfig { variant: Variant::Nonflow, ..cfg.clone() };
        let flow = CycleConfig { variant: Variant::Flow, ..cfg.clone() };
        let a = run_twin(&flow).expect("flow run").mean_rmse(cfg.spinup_cycles);
        let b = run_twin(&nonflow).expect("non-flow run").mean_rmse(cfg.spinup_cycles);
        (a, b)
    };
    let (f, n) = variants(&shortened(config("kse_static.toml"), 1));
    let rel: Vec<f64> = f.iter().zip(&n).map(|(a, b)| (a - b).abs() / b).collect();
    let static_ok = rel.iter().all(|&r| r <= 0.05);

    let moving = config("kse_moving.toml");
    let mut wins = [0usize; 2];
    let mut rows = Vec::new();
    for seed in 1..=3 {
        let (a, b) = variants(&shortened(moving.clone(), seed));
        for c in 0..2 {
            wins[c] += usize::from(a[c] <= b[c]);
        }
        rows.push(format!("seed {seed}: {} vs {}", fmt_vec(&a), fmt_vec(&b)));
    }
    let moving_ok = wins.iter().all(|&w| w >= 2);
    Outcome::new(
        static_ok && moving_ok,
        format!(
            "static: flow {} vs non-flow {} ({} relative); moving: flow ≤ non-flow on u {}/3, v {}/3 seeds; {}",
            fmt_vec(&f),
            fmt_vec(&n),
            rel.iter().map(|r| format!("{:.1}%", 100.0 * r)).collect::<Vec<_>>().join("/"),
            wins[0],
            wins[1],
            rows.join(", ")
        ),
    )
}

fn c9_locality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let mut worst = 0.0f64;
    let mut control = f64::INFINITY;
    for case in 0..10 {
        let mesh = {
            let m = random_mesh(&mut rng, 40);
            let (lo, hi) = (m.lo(), m.hi());
            Arc::new(Mesh1D::new(m.nodes().iter().map(|x| (x - lo) / (hi - lo)).collect()).unwrap())
        };
        let nc = 2;
        let members: Vec<StateField> = (0..8)
            .map(|_| StateField::from_fn(mesh.clone(), nc, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let ens = EnsembleState::new(members).unwrap();
        let kind = if case % 2 == 0 {
            ObsKind::Pointwise
        } else {
            ObsKind::Nonlocal {
                kernel: GaussKernel::new(2e-4).unwrap(),
                r_obs: 5e-4,
            }
        };
        let support = kind.support_radius();
        // the perturbed observer sits mid-element; every radius stops short of it
        let k = rng.random_range(0..mesh.n_elements());
        let target = mesh.midpoint(k);
        let radii: Vec<f64> = mesh
            .nodes()
            .iter()
            .map(|&x| {
                let room = (x - target).abs() - support;
                rng.random_range(0.02..0.2f64).min(0.5 * room)
            })
            .collect();
        let mut entries: Vec<ObsEntry> = (0..30)
            .map(|_| ObsEntry {
                component: rng.random_range(0..nc),
                location: rng.random_range(0.0..1.0),
            })
            .collect();
        // control observer in the end element farthest from the target
        let far_end = if target < 0.5 { mesh.midpoint(mesh.n_elements() - 1) } else { mesh.midpoint(0) };
        entries.push(ObsEntry {
            component: 0,
            location: far_end,
        });
        entries.push(ObsEntry {
            component: 0,
            location: target,
        });
        let ny = entries.len();
        let values: Vec<f64> = (0..ny).map(|_| rng.random_range(-1.0..1.0)).collect();
        let obs = |values: Vec<f64>| ObservationSet {
            time: 0.0,
            kind: kind.clone(),
            entries: entries.clone(),
            r_diag: vec![0.1; ny],
            values,
            noise_seed: (0, 0),
        };
        let coupling = if case % 4 < 2 { Coupling::Coupled } else { Coupling::Uncoupled };
        let cfg = AnalysisConfig { coupling, ..Default::default() };
        let (a, _) = local_analysis(&ens, &obs(values.clone()), &radii, &cfg, None).unwrap();
        let mut far = values.clone();
        far[ny - 1] += 10.0;
        let (b, _) = local_analysis(&ens, &obs(far), &radii, &cfg, None).unwrap();
        let mut near = values;
        near[ny - 2] += 10.0;
        let (c, _) = local_analysis(&ens, &obs(near), &radii, &cfg, None).unwrap();
        let diff = |x: &EnsembleState, y: &EnsembleState| {
            x.members().iter().zip(y.members()).fold(0.0f64, |m, (p, q)| {
                p.components()
                    .iter()
                    .flatten()
                    .zip(q.components().iter().flatten())
                    .fold(m, |m, (s, t)| m.max((s - t).abs()))
            })
        };
        worst = worst.max(diff(&a, &b));
        control = control.min(diff(&a, &c));
    }
    Outcome::new(
        worst <= 1e-12 && control > 1e-6,
        format!("max change from an out-of-reach observer {worst:.1e}; an in-reach one changes ≥ {control:.1e}"),
    )
}

fn timing_row(label: &str, run: &TwinRun, wall: Duration) -> String {
    let t = run.total_timings();
    format!(
        "  {label:<9} {:>9.2} {:>9.2} {:>9.2} {:>9.2} {:>9.2} {:>9.2}",
        t.pre_forecast,
        t.mesh,
        t.interpolation,
        t.forecast,
        t.analysis,
        wall.as_secs_f64()
    )
}

fn c10_methods(b_run: &TwinRun, b_wall: Duration) -> Outcome {
    let cfg = CycleConfig {
        method: Method::A,
        ..b_run.config.clone()
    };
    let t = Instant::now();
    let a_run = run_twin(&cfg).expect("method A run");
    let a_wall = t.elapsed();
    let bound = 2.0 * cfg.observations.r_var.sqrt();
    let a = a_run.mean_rmse(cfg.spinup_cycles);
    let b = b_run.mean_rmse(cfg.spinup_cycles);
    println!("  phase timings (s):  pre-fcst      mesh    interp  forecast  analysis      wall");
    println!("{}", timing_row("method A", &a_run, a_wall));
    println!("{}", timing_row("method B", b_run, b_wall));
    let interp = |r: &TwinRun| r.records.iter().map(|c| c.interpolations).sum::<usize>();
    Outcome::new(
        a.iter().chain(&b).all(|&v| v <= bound),
        format!(
            "mean RMSE A {} B {} (bound {bound}); interpolations A {} B {}",
            fmt_vec(&a),
            fmt_vec(&b),
            interp(&a_run),
            interp(b_run)
        ),
    )
}

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: u32| selected.is_empty() || selected.contains(&n);
    // seconds
    let budgets = [5.0, 1.0, 5.0, 60.0, 600.0, 900.0, 1800.0, 1800.0, 10.0, 1800.0];
    let mut results: Vec<(u32, bool)> = Vec::new();
    let mut record = |n: u32, elapsed: Duration, o: Outcome| {
        let secs = elapsed.as_secs_f64();
        let budget = budgets[n as usize - 1];
        let pass = o.pass && secs <= budget;
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2}: {tag} ({secs:.1} s of {budget:.0} s) {}", o.detail);
        results.push((n, pass));
    };
    macro_rules! timed {
        ($n:expr, $e:expr) => {
            if wanted($n) {
                let t = Instant::now();
                let o = $e;
                record($n, t.elapsed(), o);
            }
        };
    }
    timed!(1, c1_spd_suite());
    timed!(2, c2_fd_exactness());
    timed!(3, c3_etkf_equivalence());
    timed!(4, c4_nagumo_wave());
    timed!(5, c5_step_spread());
    timed!(9, c9_locality());
    if wanted(6) || wanted(10) {
        let cfg = config("kse_static.toml");
        let t = Instant::now();
        let run = run_twin(&cfg).expect("KSE twin run");
        let wall = t.elapsed();
        // both criteria are charged for the shared method B run
        for n in [6, 10] {
            if wanted(n) {
                let t = Instant::now();
                let o = if n == 6 { c6_kse_twin(&run) } else { c10_methods(&run, wall) };
                record(n, wall + t.elapsed(), o);
            }
        }
    }
    timed!(7, c7_adaptive_vs_uniform());
    timed!(8, c8_flow_vs_nonflow());

    let failed: Vec<u32> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() { String::new() } else { format!("; failed {failed:?}") }
    );
    let strict = std::env::var("LAHMESH_STRICT").is_ok_and(|v| v == "1");
    if strict && !failed.is_empty() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

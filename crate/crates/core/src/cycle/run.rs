//! Twin-experiment drivers: truth, initial ensemble, Method A and Method B cycles.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::lah::{build_lah_metric, cap_step, pre_forecast, MeshPolicy};
use super::{CycleRecord, PhaseTimings};
use crate::config::{CycleConfig, Method, ModelConfig};
use crate::error::{Error, Result};
use crate::letkf::{local_analysis, localization_radii, AnalysisConfig, EnsembleState};
use crate::mesh::{equidistribute, interp_linear, Mesh1D, StateField};
use crate::metric::{metric_intersect_field, smooth_metric};
use crate::models::kse::kse_initial;
use crate::models::{nagumo_exact, KseModel, Model, NagumoModel, StepControl, TimeStepping};
use crate::observations::{synthesize_observations, ObservationSpec};
use crate::rng::{stream, Purpose};

/// Immutable per-run setup shared by every cycle.
pub struct CycleContext {
    pub cfg: CycleConfig,
    pub model: Arc<dyn Model>,
    pub policy: MeshPolicy,
    pub spec: ObservationSpec,
    pub analysis: AnalysisConfig,
}

impl CycleContext {
    pub fn new(cfg: &CycleConfig) -> Result<Self> {
        cfg.validate()?;
        let spec = cfg.observations.spec()?;
        Ok(Self {
            model: build_model(cfg),
            policy: MeshPolicy::new(&cfg.mesh, spec.clone())?,
            spec,
            analysis: cfg.analysis(),
            cfg: cfg.clone(),
        })
    }
}

pub fn build_model(cfg: &CycleConfig) -> Arc<dyn Model> {
    match &cfg.model {
        ModelConfig::Nagumo(n) => Arc::new(NagumoModel {
            params: n.params(),
            stepping: TimeStepping::Adaptive(n.adaptive(cfg.dt_obs)),
        }),
        ModelConfig::Kse(k) => Arc::new(KseModel {
            params: k.params(),
            dt: cfg.dt_solver(),
        }),
    }
}

/// Noise-free reference trajectory on a fixed uniform mesh.
pub struct Truth {
    model: Arc<dyn Model>,
    state: StateField,
    time: f64,
}

impl Truth {
    /// Starts at `t = 0` after any configured spin-up.
    pub fn new(cfg: &CycleConfig) -> Result<Self> {
        let model = build_model(cfg);
        let (lo, hi) = model.domain();
        let mesh = Arc::new(Mesh1D::uniform(lo, hi, cfg.n_elements * cfg.truth_refinement)?);
        let (state, time) = match &cfg.model {
            ModelConfig::Nagumo(n) => {
                let p = n.params();
                (StateField::from_fn(mesh, 1, |_, x| nagumo_exact(x, 0.0, &p)), 0.0)
            }
            ModelConfig::Kse(k) => (kse_initial(mesh, k.initial_amplitude), -k.truth_spinup),
        };
        // spin-up is deterministic, so runs in one process share it
        static SPUN_UP: OnceLock<Mutex<HashMap<String, StateField>>> = OnceLock::new();
        let key = format!("{:?}/{}", cfg.model, mesh_len(&state));
        let cache = SPUN_UP.get_or_init(Default::default);
        if let Some(s) = cache.lock().expect("truth cache").get(&key) {
            return Ok(Self {
                model,
                state: s.clone(),
                time: 0.0,
            });
        }
        let mut truth = Self { model, state, time };
        truth.advance_to(0.0)?;
        cache.lock().expect("truth cache").insert(key, truth.state.clone());
        Ok(truth)
    }

    pub fn state(&self) -> &StateField {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        if t <= self.time {
            return Ok(());
        }
        let mut control = StepControl::new(self.model.time_stepping());
        self.state = control.advance_to(self.model.as_ref(), &self.state, self.time, t)?;
        self.time = t;
        Ok(())
    }
}

fn mesh_len(u: &StateField) -> usize {
    u.mesh().len()
}

/// Truth interpolated to `mesh` plus `N(0, p0)` on interior nodes, one stream per member.
pub fn initial_ensemble(cfg: &CycleConfig, truth: &StateField, mesh: &Arc<Mesh1D>) -> Result<Vec<StateField>> {
    let base = interp_linear(truth, mesh)?;
    Ok((0..cfg.n_members)
        .map(|i| {
            let mut u = base.clone();
            let mut rng = stream(cfg.seed, Purpose::InitialEnsemble, 0, i as u64);
            add_interior_noise(&mut u, cfg.p0, &mut rng);
            u
        })
        .collect())
}

fn add_interior_noise(u: &mut StateField, variance: f64, rng: &mut impl Rng) {
    if variance == 0.0 {
        return;
    }
    let sd = variance.sqrt();
    for c in 0..u.n_components() {
        let comp = u.component_mut(c);
        let n = comp.len();
        for v in &mut comp[1..n - 1] {
            let z: f64 = rng.sample(StandardNormal);
            *v += sd * z;
        }
    }
}

fn member_err(member: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Member {
        member,
        source: Box::new(e),
    }
}

fn forecast_fixed(model: &dyn Model, u: &StateField, t0: f64, t1: f64) -> Result<(StateField, usize)> {
    let mut control = StepControl::new(cap_step(model.time_stepping(), t1 - t0));
    let s = control.advance_to(model, u, t0, t1)?;
    Ok((s, control.accepted_steps()))
}

/// Forecast on the member's own mesh, moved after every accepted step.
fn forecast_own_mesh(
    model: &dyn Model,
    policy: &MeshPolicy,
    u: &StateField,
    t0: f64,
    t1: f64,
    adaptive: bool,
) -> Result<(StateField, usize, usize)> {
    if !adaptive {
        let (s, n) = forecast_fixed(model, u, t0, t1)?;
        return Ok((s, n, 0));
    }
    let n = u.mesh().n_elements();
    let mut control = StepControl::new(cap_step(model.time_stepping(), t1 - t0));
    let mut state = u.clone();
    let mut t = t0;
    let mut moves = 0;
    while t < t1 {
        let (next, tn) = control.advance_one(model, &state, t, t1)?;
        let mesh = Arc::new(equidistribute(&policy.state_metric(&next)?, next.mesh(), n)?);
        state = interp_linear(&next, &mesh)?;
        model.apply_boundary(&mut state, tn);
        moves += 1;
        t = tn;
    }
    Ok((state, control.accepted_steps(), moves))
}

fn rmse(a: &StateField, b: &StateField) -> Vec<f64> {
    a.components()
        .iter()
        .zip(b.components())
        .map(|(x, y)| {
            let s: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
            (s / x.len() as f64).sqrt()
        })
        .collect()
}

struct Analysed {
    analysis: EnsembleState,
    forecast_rmse: Vec<f64>,
    rmse: Vec<f64>,
    spread: Vec<f64>,
    without_obs: usize,
}

/// Observations at `t1`, localization from the forecast ensemble metric, LETKF.
fn analyse(ctx: &CycleContext, forecast: EnsembleState, truth: &Truth, cycle: usize, t1: f64) -> Result<Analysed> {
    let cfg = &ctx.cfg;
    let mut obs_rng = stream(cfg.seed, Purpose::ObservationNoise, cycle as u64, 0);
    let obs = synthesize_observations(truth.state(), &ctx.spec, t1, &mut obs_rng)?;
    let metrics = forecast
        .members()
        .par_iter()
        .map(|m| ctx.policy.state_metric(m))
        .collect::<Result<Vec<_>>>()?;
    let radii = localization_radii(&metric_intersect_field(&metrics)?, cfg.r0)?;
    let mut perturb = stream(cfg.seed, Purpose::PerturbedObs, cycle as u64, 0);
    let perturb = cfg.perturbed_obs.then_some(&mut perturb);
    let (analysis, report) = local_analysis(&forecast, &obs, &radii, &ctx.analysis, perturb)?;
    let reference = interp_linear(truth.state(), forecast.mesh())?;
    Ok(Analysed {
        forecast_rmse: rmse(&forecast.mean(), &reference),
        rmse: rmse(&analysis.mean(), &reference),
        spread: analysis.spread(),
        without_obs: report.without_obs,
        analysis,
    })
}

/// One Method B cycle from the analysis ensemble at `t` on its common mesh.
pub fn run_cycle_method_b(
    ctx: &CycleContext,
    ens: EnsembleState,
    truth: &mut Truth,
    cycle: usize,
    t: f64,
) -> Result<(EnsembleState, CycleRecord)> {
    let cfg = &ctx.cfg;
    let model = ctx.model.as_ref();
    let t1 = t + cfg.dt_obs;
    let x_c = ens.mesh().clone();
    let mut timings = PhaseTimings::default();

    let clock = Instant::now();
    let (x_lah, pre_steps) = if cfg.mesh.adaptive {
        let starts: Vec<(usize, StateField)> = if cfg.n_small == 1 {
            vec![(0, ens.mean())]
        } else {
            let mut rng = stream(cfg.seed, Purpose::SubsetChoice, cycle as u64, 0);
            sample(&mut rng, ens.len(), cfg.n_small)
                .into_iter()
                .map(|i| (i, ens.members()[i].clone()))
                .collect()
        };
        let pres = starts
            .par_iter()
            .map(|(i, u)| pre_forecast(model, &ctx.policy, u, t, t1, cfg.variant).map_err(member_err(*i)))
            .collect::<Result<Vec<_>>>()?;
        timings.pre_forecast = clock.elapsed().as_secs_f64();
        let clock = Instant::now();
        let contributions: Vec<_> = pres.iter().map(|p| p.contribution.clone()).collect();
        let lah = build_lah_metric(&contributions, &x_c, ctx.policy.sweeps)?;
        let mesh = Arc::new(equidistribute(&lah, &x_c, cfg.n_elements)?);
        timings.mesh = clock.elapsed().as_secs_f64();
        (mesh, pres.iter().map(|p| p.accepted_steps).collect())
    } else {
        (x_c.clone(), Vec::new())
    };

    let clock = Instant::now();
    let (members, interpolations) = if Arc::ptr_eq(&x_lah, &x_c) {
        (ens.into_members(), 0)
    } else {
        let m = ens
            .members()
            .par_iter()
            .map(|u| interp_linear(u, &x_lah))
            .collect::<Result<Vec<_>>>()?;
        let n = m.len();
        (m, n)
    };
    timings.interpolation = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let forecasts = members
        .into_par_iter()
        .enumerate()
        .map(|(i, u)| {
            let (mut f, steps) = forecast_fixed(model, &u, t, t1).map_err(member_err(i))?;
            let mut rng = stream(cfg.seed, Purpose::ModelNoise, cycle as u64, i as u64);
            add_interior_noise(&mut f, cfg.q, &mut rng);
            Ok((f, steps))
        })
        .collect::<Result<Vec<_>>>()?;
    timings.forecast = clock.elapsed().as_secs_f64();
    let (forecasts, steps): (Vec<_>, Vec<_>) = forecasts.into_iter().unzip();
    assert!(forecasts.iter().all(|f| Arc::ptr_eq(f.mesh(), &x_lah)), "members left the look-ahead mesh");

    truth.advance_to(t1)?;
    let clock = Instant::now();
    let a = analyse(ctx, EnsembleState::new(forecasts)?, truth, cycle, t1)?;
    timings.analysis = clock.elapsed().as_secs_f64();

    let record = CycleRecord {
        cycle,
        time: t1,
        rmse: a.rmse,
        forecast_rmse: a.forecast_rmse,
        spread: a.spread,
        steps,
        pre_steps,
        mesh: x_lah,
        interpolations,
        nodes_without_obs: a.without_obs,
        timings,
    };
    Ok((a.analysis, record))
}

/// One Method A cycle. Members carry their own meshes; `common` is the previous
/// analysis mesh, used as the evaluation mesh for the new one.
pub fn run_cycle_method_a(
    ctx: &CycleContext,
    members: Vec<StateField>,
    common: &Arc<Mesh1D>,
    truth: &mut Truth,
    cycle: usize,
    t: f64,
) -> Result<(Vec<StateField>, CycleRecord)> {
    let cfg = &ctx.cfg;
    let model = ctx.model.as_ref();
    let policy = &ctx.policy;
    let t1 = t + cfg.dt_obs;
    let mut timings = PhaseTimings::default();

    let clock = Instant::now();
    let forecasts = members
        .into_par_iter()
        .enumerate()
        .map(|(i, u)| {
            let (mut f, steps, moves) =
                forecast_own_mesh(model, policy, &u, t, t1, cfg.mesh.adaptive).map_err(member_err(i))?;
            let mut rng = stream(cfg.seed, Purpose::ModelNoise, cycle as u64, i as u64);
            add_interior_noise(&mut f, cfg.q, &mut rng);
            Ok((f, steps, moves))
        })
        .collect::<Result<Vec<_>>>()?;
    timings.forecast = clock.elapsed().as_secs_f64();
    let moves: usize = forecasts.iter().map(|f| f.2).sum();
    let steps: Vec<usize> = forecasts.iter().map(|f| f.1).collect();
    let forecasts: Vec<StateField> = forecasts.into_iter().map(|f| f.0).collect();

    let clock = Instant::now();
    let x_a = if cfg.mesh.adaptive {
        let parts = forecasts
            .par_iter()
            .map(|f| {
                let m = policy.state_metric(f)?;
                let ob = policy.obs_metric(f, t1, &m)?;
                metric_intersect_field(&[m, ob])?.interpolate_to(common)
            })
            .collect::<Result<Vec<_>>>()?;
        let m = smooth_metric(&metric_intersect_field(&parts)?, policy.sweeps);
        Arc::new(equidistribute(&m, common, cfg.n_elements)?)
    } else {
        common.clone()
    };
    timings.mesh = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let on_common = forecasts
        .par_iter()
        .map(|f| interp_linear(f, &x_a))
        .collect::<Result<Vec<_>>>()?;
    timings.interpolation = clock.elapsed().as_secs_f64();

    truth.advance_to(t1)?;
    let clock = Instant::now();
    let a = analyse(ctx, EnsembleState::new(on_common)?, truth, cycle, t1)?;
    timings.analysis = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let back = a
        .analysis
        .members()
        .par_iter()
        .zip(&forecasts)
        .map(|(u, f)| {
            let mut v = interp_linear(u, f.mesh())?;
            model.apply_boundary(&mut v, t1);
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    timings.interpolation += clock.elapsed().as_secs_f64();

    let record = CycleRecord {
        cycle,
        time: t1,
        rmse: a.rmse,
        forecast_rmse: a.forecast_rmse,
        spread: a.spread,
        steps,
        pre_steps: Vec::new(),
        mesh: x_a,
        interpolations: 2 * back.len() + moves,
        nodes_without_obs: a.without_obs,
        timings,
    };
    Ok((back, record))
}

/// Records of a complete twin experiment.
#[derive(Debug, Clone)]
pub struct TwinRun {
    pub config: CycleConfig,
    pub records: Vec<CycleRecord>,
}

/// Runs `cfg.n_cycles` cycles from a uniform initial mesh.
pub fn run_twin(cfg: &CycleConfig) -> Result<TwinRun> {
    run_twin_with(cfg, |_| {})
}

/// As [`run_twin`], calling `progress` after every cycle.
pub fn run_twin_with(cfg: &CycleConfig, mut progress: impl FnMut(&CycleRecord)) -> Result<TwinRun> {
    let ctx = CycleContext::new(cfg)?;
    let mut truth = Truth::new(cfg)?;
    let (lo, hi) = ctx.model.domain();
    let mut common = Arc::new(Mesh1D::uniform(lo, hi, cfg.n_elements)?);
    let start = initial_ensemble(cfg, truth.state(), &common)?;
    let mut records = Vec::with_capacity(cfg.n_cycles);
    match cfg.method {
        Method::B => {
            let mut ens = EnsembleState::new(start)?;
            for cycle in 0..cfg.n_cycles {
                let t = cycle as f64 * cfg.dt_obs;
                let (next, rec) = run_cycle_method_b(&ctx, ens, &mut truth, cycle, t)?;
                ens = next;
                progress(&rec);
                records.push(rec);
            }
        }
        Method::A => {
            let mut members = start;
            for cycle in 0..cfg.n_cycles {
                let t = cycle as f64 * cfg.dt_obs;
                let (next, rec) = run_cycle_method_a(&ctx, members, &common, &mut truth, cycle, t)?;
                members = next;
                common = rec.mesh.clone();
                progress(&rec);
                records.push(rec);
            }
        }
    }
    Ok(TwinRun {
        config: cfg.clone(),
        records,
    })
}

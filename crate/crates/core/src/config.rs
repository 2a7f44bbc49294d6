//! Experiment configuration (TOML).
//!
//! Every field has a default, so a config file only lists what it changes.
//! [`CycleConfig::resolved`] fills derived values; the resolved form written next
//! to run outputs parses back to an identical configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::letkf::{AnalysisConfig, Coupling};
use crate::models::{AdaptiveOptions, KseParams, NagumoParams};
use crate::observations::{GaussKernel, Motion, ObsKind, ObservationSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Per-member adaptive meshes and a common mesh built before each analysis.
    A,
    /// One look-ahead mesh shared by every member for the whole cycle.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Observation metric at the analysis time only.
    Nonflow,
    /// Observation metric intersected at every internal time.
    Flow,
    /// Observation metric accumulated over the window, intersected once.
    ObsWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingChoice {
    Coupled,
    Uncoupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    Hessian,
    Arclength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsMetricChoice {
    None,
    Adhoc,
    Nonlocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsKindChoice {
    Pointwise,
    Nonlocal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NagumoConfig {
    pub eps2: f64,
    pub a: f64,
    pub length: f64,
    pub x0: f64,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub dt_initial: f64,
    pub dt_min: f64,
}

impl Default for NagumoConfig {
    fn default() -> Self {
        let p = NagumoParams::default();
        Self {
            eps2: p.eps2,
            a: p.a,
            length: p.length,
            x0: p.x0,
            tol_abs: 1e-3,
            tol_rel: 1e-3,
            dt_initial: 1e-2,
            dt_min: 1e-8,
        }
    }
}

impl NagumoConfig {
    pub fn params(&self) -> NagumoParams {
        NagumoParams {
            eps2: self.eps2,
            a: self.a,
            length: self.length,
            x0: self.x0,
            reaction: true,
        }
    }

    pub fn adaptive(&self, dt_max: f64) -> AdaptiveOptions {
        AdaptiveOptions {
            tol_abs: self.tol_abs,
            tol_rel: self.tol_rel,
            dt_initial: self.dt_initial.min(dt_max),
            dt_min: self.dt_min,
            dt_max,
            safety: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KseConfig {
    pub l1: f64,
    pub l2: f64,
    pub mu1: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub omega: f64,
    pub c1: f64,
    pub c2: f64,
    pub mu2_literal: bool,
    /// Amplitude of the smooth state the truth starts from before spin-up.
    pub initial_amplitude: f64,
    /// Truth integration time before the first cycle.
    pub truth_spinup: f64,
}

impl Default for KseConfig {
    fn default() -> Self {
        let p = KseParams::default();
        Self {
            l1: p.l1,
            l2: p.l2,
            mu1: p.mu1,
            mu_min: p.mu_min,
            mu_max: p.mu_max,
            omega: p.omega,
            c1: p.c1,
            c2: p.c2,
            mu2_literal: false,
            initial_amplitude: 1.0,
            truth_spinup: 0.1,
        }
    }
}

impl KseConfig {
    pub fn params(&self) -> KseParams {
        KseParams {
            l1: self.l1,
            l2: self.l2,
            mu1: self.mu1,
            mu_min: self.mu_min,
            mu_max: self.mu_max,
            omega: self.omega,
            c1: self.c1,
            c2: self.c2,
            mu2_literal: self.mu2_literal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Nagumo(NagumoConfig),
    Kse(KseConfig),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Kse(KseConfig::default())
    }
}

impl ModelConfig {
    pub fn domain(&self) -> (f64, f64) {
        match self {
            ModelConfig::Nagumo(n) => (0.0, n.length),
            ModelConfig::Kse(_) => (0.0, 1.0),
        }
    }

    pub fn n_components(&self) -> usize {
        match self {
            ModelConfig::Nagumo(_) => 1,
            ModelConfig::Kse(_) => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    /// A static uniform mesh when false.
    pub adaptive: bool,
    pub monitor: Monitor,
    pub alpha_h: f64,
    pub obs_metric: ObsMetricChoice,
    /// Width of the ad-hoc observation bumps.
    pub sigma: f64,
    /// Scale of the nonlocal observation metric.
    pub obs_alpha_h: f64,
    pub smoothing_sweeps: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            adaptive: true,
            monitor: Monitor::Hessian,
            alpha_h: 1e4,
            obs_metric: ObsMetricChoice::Adhoc,
            sigma: 6.25e-4,
            obs_alpha_h: 1.0,
            smoothing_sweeps: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObsConfig {
    pub kind: ObsKindChoice,
    /// Observed components; each gets the same observer layout.
    pub components: Vec<usize>,
    pub count: usize,
    pub first: f64,
    pub spacing: f64,
    /// Zero for static observers.
    pub amplitude: f64,
    pub omega: f64,
    pub r_var: f64,
    pub delta: f64,
    pub r_obs: f64,
}

impl Default for ObsConfig {
    fn default() -> Self {
        Self {
            kind: ObsKindChoice::Pointwise,
            components: vec![0, 1],
            count: 400,
            first: 1.25e-3,
            spacing: 2.5e-3,
            amplitude: 0.0,
            omega: 750.0,
            r_var: 0.01,
            delta: 1e-3,
            r_obs: 2e-2,
        }
    }
}

impl ObsConfig {
    pub fn base_locations(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.first + self.spacing * k as f64).collect()
    }

    pub fn spec(&self) -> Result<ObservationSpec> {
        let kind = match self.kind {
            ObsKindChoice::Pointwise => ObsKind::Pointwise,
            ObsKindChoice::Nonlocal => ObsKind::Nonlocal {
                kernel: GaussKernel::new(self.delta)?,
                r_obs: self.r_obs,
            },
        };
        let base = self.base_locations();
        let n_comp = self.components.iter().copied().max().map_or(0, |m| m + 1);
        let base = (0..n_comp)
            .map(|c| if self.components.contains(&c) { base.clone() } else { Vec::new() })
            .collect();
        let motion = (self.amplitude != 0.0).then_some(Motion {
            amplitude: self.amplitude,
            omega: self.omega,
        });
        Ok(ObservationSpec {
            kind,
            base,
            motion,
            r_var: self.r_var,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleConfig {
    pub seed: u64,
    pub method: Method,
    pub variant: Variant,
    pub coupling: CouplingChoice,
    pub n_cycles: usize,
    pub spinup_cycles: usize,
    pub dt_obs: f64,
    /// Internal solver step; `dt_obs / 4` when absent.
    pub dt_solver: Option<f64>,
    pub n_elements: usize,
    pub n_members: usize,
    pub n_small: usize,
    pub p0: f64,
    pub q: f64,
    pub rho: f64,
    pub r0: f64,
    pub perturbed_obs: bool,
    pub rmse_window: f64,
    /// Truth mesh has this many times the ensemble's element count.
    pub truth_refinement: usize,
    /// Write every k-th cycle's mesh to mesh.csv.
    pub mesh_every: usize,
    pub model: ModelConfig,
    pub mesh: MeshConfig,
    pub observations: ObsConfig,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            method: Method::B,
            variant: Variant::Nonflow,
            coupling: CouplingChoice::Coupled,
            n_cycles: 500,
            spinup_cycles: 100,
            dt_obs: 1e-4,
            dt_solver: None,
            n_elements: 400,
            n_members: 20,
            n_small: 8,
            p0: 0.1,
            q: 0.1,
            rho: 1.1,
            r0: 0.01,
            perturbed_obs: false,
            rmse_window: 0.05,
            truth_refinement: 4,
            mesh_every: 10,
            model: ModelConfig::default(),
            mesh: MeshConfig::default(),
            observations: ObsConfig::default(),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(field, format!("must be positive, got {v}")))
    }
}

impl CycleConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: CycleConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn dt_solver(&self) -> f64 {
        self.dt_solver.unwrap_or(self.dt_obs / 4.0)
    }

    /// Internal steps per observation interval.
    pub fn steps_per_cycle(&self) -> usize {
        (self.dt_obs / self.dt_solver()).round() as usize
    }

    /// Copy with every derived value written out.
    pub fn resolved(&self) -> Self {
        Self {
            dt_solver: Some(self.dt_solver()),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("dt_obs", self.dt_obs)?;
        let h = self.dt_solver();
        positive("dt_solver", h)?;
        let ratio = self.dt_obs / h;
        if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::param("dt_solver", format!("must divide dt_obs = {}", self.dt_obs)));
        }
        if self.n_cycles == 0 {
            return Err(Error::param("n_cycles", "must be at least 1"));
        }
        if self.n_elements < 4 {
            return Err(Error::param("n_elements", "must be at least 4"));
        }
        if self.n_members < 2 {
            return Err(Error::param("n_members", "need at least 2 members"));
        }
        if self.n_small == 0 || self.n_small > self.n_members {
            return Err(Error::param("n_small", "must lie in 1..=n_members"));
        }
        positive("p0", self.p0)?;
        if !(self.q >= 0.0) {
            return Err(Error::param("q", "must be nonnegative"));
        }
        positive("rmse_window", self.rmse_window)?;
        if self.truth_refinement == 0 {
            return Err(Error::param("truth_refinement", "must be at least 1"));
        }
        if self.mesh_every == 0 {
            return Err(Error::param("mesh_every", "must be at least 1"));
        }
        self.analysis().validate()?;
        positive("mesh.alpha_h", self.mesh.alpha_h)?;
        positive("mesh.sigma", self.mesh.sigma)?;
        positive("mesh.obs_alpha_h", self.mesh.obs_alpha_h)?;
        match &self.model {
            ModelConfig::Nagumo(n) => {
                n.params().validate()?;
                n.adaptive(self.dt_obs).validate()?;
            }
            ModelConfig::Kse(k) => {
                k.params().validate()?;
                if !(k.truth_spinup >= 0.0) {
                    return Err(Error::param("model.truth_spinup", "must be nonnegative"));
                }
            }
        }
        let nc = self.model.n_components();
        if let Some(&c) = self.observations.components.iter().find(|&&c| c >= nc) {
            return Err(Error::param(
                "observations.components",
                format!("component {c} does not exist (model has {nc})"),
            ));
        }
        if self.observations.count > 0 {
            positive("observations.r_var", self.observations.r_var)?;
        }
        if self.observations.kind == ObsKindChoice::Nonlocal {
            positive("observations.delta", self.observations.delta)?;
            positive("observations.r_obs", self.observations.r_obs)?;
        }
        let (lo, hi) = self.model.domain();
        self.observations
            .spec()?
            .validate(lo, hi)
            .map_err(|e| Error::param("observations", e.to_string()))?;
        Ok(())
    }

    pub fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            rho: self.rho,
            r0: self.r0,
            coupling: match self.coupling {
                CouplingChoice::Coupled => Coupling::Coupled,
                CouplingChoice::Uncoupled => Coupling::Uncoupled,
            },
            perturbed_obs: self.perturbed_obs,
        }
    }
}

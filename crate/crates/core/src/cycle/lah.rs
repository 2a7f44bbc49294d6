//! Accumulated metrics and look-ahead mesh construction.

use std::sync::Arc;

use crate::config::{MeshConfig, Monitor, ObsMetricChoice, Variant};
use crate::error::{Error, Result};
use crate::mesh::{equidistribute, interp_linear, Mesh1D, StateField};
use crate::metric::{
    adhoc_obs_metric, arclength_metric, hessian_metric, metric_intersect_field, nonlocal_obs_metric,
    smooth_metric, MetricField,
};
use crate::models::{Model, StepControl, TimeStepping};
use crate::observations::{ObsKind, ObservationSpec};

/// How meshes are sized from states and observation layouts.
#[derive(Debug, Clone)]
pub struct MeshPolicy {
    pub monitor: Monitor,
    pub alpha_h: f64,
    pub sweeps: usize,
    pub obs_metric: ObsMetricChoice,
    pub sigma: f64,
    pub obs_alpha_h: f64,
    pub obs: ObservationSpec,
}

impl MeshPolicy {
    pub fn new(mesh: &MeshConfig, obs: ObservationSpec) -> Result<Self> {
        if mesh.obs_metric == ObsMetricChoice::Nonlocal && !matches!(obs.kind, ObsKind::Nonlocal { .. }) {
            return Err(Error::param("mesh.obs_metric", "nonlocal metric needs nonlocal observations"));
        }
        Ok(Self {
            monitor: mesh.monitor,
            alpha_h: mesh.alpha_h,
            sweeps: mesh.smoothing_sweeps,
            obs_metric: mesh.obs_metric,
            sigma: mesh.sigma,
            obs_alpha_h: mesh.obs_alpha_h,
            obs,
        })
    }

    /// Monitor metric per component, smoothed, intersected, smoothed again.
    pub fn state_metric(&self, u: &StateField) -> Result<MetricField> {
        let mesh = u.mesh();
        let per: Vec<MetricField> = u
            .components()
            .iter()
            .map(|c| {
                let m = match self.monitor {
                    Monitor::Hessian => hessian_metric(c, mesh, self.alpha_h)?,
                    Monitor::Arclength => arclength_metric(c, mesh)?,
                };
                Ok(smooth_metric(&m, self.sweeps))
            })
            .collect::<Result<_>>()?;
        let m = metric_intersect_field(&per)?;
        Ok(if per.len() > 1 { smooth_metric(&m, self.sweeps) } else { m })
    }

    /// Observation metric at time `t` on `u`'s mesh, nodal.
    pub fn obs_metric(&self, u: &StateField, t: f64, ens_metric: &MetricField) -> Result<MetricField> {
        let mesh = u.mesh();
        let per: Vec<MetricField> = (0..self.obs.base.len())
            .filter(|&c| !self.obs.base[c].is_empty())
            .map(|c| {
                let locs = self.obs.component_locations_at(c, t);
                match (self.obs_metric, self.obs.kind) {
                    (ObsMetricChoice::None, _) => Ok(MetricField::identity(mesh.clone(), 1)),
                    (ObsMetricChoice::Adhoc, _) => adhoc_obs_metric(&locs, mesh, self.sigma, ens_metric),
                    (ObsMetricChoice::Nonlocal, ObsKind::Nonlocal { kernel, .. }) => Ok(nonlocal_obs_metric(
                        u.component(c),
                        mesh,
                        &locs,
                        &kernel,
                        self.obs_alpha_h,
                    )?
                    .to_nodes()),
                    (ObsMetricChoice::Nonlocal, _) => unreachable!("checked in MeshPolicy::new"),
                }
            })
            .collect::<Result<_>>()?;
        if per.is_empty() {
            return Ok(MetricField::identity(mesh.clone(), 1));
        }
        metric_intersect_field(&per)
    }
}

/// `M[t0, t]` on the mesh the member currently lives on.
#[derive(Debug, Clone)]
pub struct AccumulatedMetric {
    pub base_time: f64,
    pub time: f64,
    pub field: MetricField,
}

impl AccumulatedMetric {
    pub fn new(base_time: f64, field: MetricField) -> Self {
        Self {
            base_time,
            time: base_time,
            field,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh1D> {
        self.field.mesh()
    }

    /// Carries the field over to a new member mesh.
    pub fn moved_to(&self, mesh: &Arc<Mesh1D>) -> Result<Self> {
        Ok(Self {
            field: self.field.interpolate_to(mesh)?,
            ..self.clone()
        })
    }
}

/// `M[t0, t] ∩ M(t)`; `acc` is interpolated first if it lives on another mesh.
pub fn accumulate_step(acc: &AccumulatedMetric, m_now: &MetricField, t: f64) -> Result<AccumulatedMetric> {
    let old = if acc.mesh() == m_now.mesh() || acc.mesh().as_ref() == m_now.mesh().as_ref() {
        acc.field.clone()
    } else {
        acc.field.interpolate_to(m_now.mesh())?
    };
    Ok(AccumulatedMetric {
        base_time: acc.base_time,
        time: t,
        field: metric_intersect_field(&[old, m_now.clone()])?,
    })
}

/// One small-ensemble trajectory over the cycle.
#[derive(Debug, Clone)]
pub struct PreForecast {
    pub accumulated: AccumulatedMetric,
    /// This member's share of the look-ahead metric, on its final mesh.
    pub contribution: MetricField,
    pub accepted_steps: usize,
    pub remeshes: usize,
}

/// Forecast `u0` over `[t0, t1]` on its own mesh, accumulating the state metric
/// after every accepted step and re-equidistributing the member mesh with it.
pub fn pre_forecast(
    model: &dyn Model,
    policy: &MeshPolicy,
    u0: &StateField,
    t0: f64,
    t1: f64,
    variant: Variant,
) -> Result<PreForecast> {
    let n = u0.mesh().n_elements();
    let mut state = u0.clone();
    let mut acc = AccumulatedMetric::new(t0, policy.state_metric(&state)?);
    let mut flow = match variant {
        Variant::Flow => Some(metric_intersect_field(&[
            acc.field.clone(),
            policy.obs_metric(&state, t0, &acc.field)?,
        ])?),
        Variant::ObsWindow => Some(policy.obs_metric(&state, t0, &acc.field)?),
        Variant::Nonflow => None,
    };
    let mut control = StepControl::new(cap_step(model.time_stepping(), t1 - t0));
    let mut t = t0;
    let mut remeshes = 0;
    while t < t1 {
        let (next, tn) = control.advance_one(model, &state, t, t1)?;
        acc = accumulate_step(&acc, &policy.state_metric(&next)?, tn)?;
        if let Some(f) = flow.as_mut() {
            let ob = policy.obs_metric(&next, tn, &acc.field)?;
            *f = match variant {
                Variant::Flow => metric_intersect_field(&[f.clone(), acc.field.clone(), ob])?,
                _ => metric_intersect_field(&[f.clone(), ob])?,
            };
        }
        let mesh = Arc::new(equidistribute(&acc.field, next.mesh(), n)?);
        state = interp_linear(&next, &mesh)?;
        model.apply_boundary(&mut state, tn);
        acc = acc.moved_to(&mesh)?;
        if let Some(f) = flow.as_mut() {
            *f = f.interpolate_to(&mesh)?;
        }
        remeshes += 1;
        t = tn;
    }
    let contribution = match variant {
        Variant::Nonflow => {
            let ob = policy.obs_metric(&state, t1, &acc.field)?;
            metric_intersect_field(&[acc.field.clone(), ob])?
        }
        Variant::Flow => flow.expect("set for flow"),
        Variant::ObsWindow => metric_intersect_field(&[acc.field.clone(), flow.expect("set for window")])?,
    };
    Ok(PreForecast {
        accumulated: acc,
        contribution,
        accepted_steps: control.accepted_steps(),
        remeshes,
    })
}

pub(crate) fn cap_step(scheme: TimeStepping, window: f64) -> TimeStepping {
    match scheme {
        TimeStepping::Adaptive(mut o) => {
            o.dt_max = o.dt_max.min(window);
            o.dt_initial = o.dt_initial.min(o.dt_max);
            TimeStepping::Adaptive(o)
        }
        s => s,
    }
}

/// Intersection of member contributions on the evaluation mesh, then smoothed.
pub fn build_lah_metric(contributions: &[MetricField], eval_mesh: &Arc<Mesh1D>, sweeps: usize) -> Result<MetricField> {
    if contributions.is_empty() {
        return Err(Error::param("n_small", "look-ahead metric needs at least one member"));
    }
    let on_eval = contributions
        .iter()
        .map(|m| m.to_nodes().interpolate_to(eval_mesh))
        .collect::<Result<Vec<_>>>()?;
    Ok(smooth_metric(&metric_intersect_field(&on_eval)?, sweeps))
}

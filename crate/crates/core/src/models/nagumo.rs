//! Nagumo reaction-diffusion equation `u_t = eps^2 u_xx - u (u - 1) (u - a)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{equidistribute, interp_linear, Mesh1D, StateField};
use crate::metric::{arclength_metric, smooth_metric};
use crate::models::banded::BandMatrix;
use crate::models::fd::FdStencils;
use crate::models::stepping::{AdaptiveOptions, StepControl, TimeStepping};
use crate::models::Model;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NagumoParams {
    pub eps2: f64,
    pub a: f64,
    /// Domain is `[0, length]`.
    pub length: f64,
    /// Front position at `t = 0`.
    pub x0: f64,
    /// When false the reaction term is dropped (pure heat equation).
    pub reaction: bool,
}

impl Default for NagumoParams {
    fn default() -> Self {
        Self {
            eps2: 1e-2,
            a: 0.95,
            length: 20.0,
            x0: 5.0,
            reaction: true,
        }
    }
}

impl NagumoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps2 > 0.0) {
            return Err(Error::param("eps2", "must be positive"));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(Error::param("a", "must lie in (0, 1)"));
        }
        if !(self.length > 0.0) {
            return Err(Error::param("length", "must be positive"));
        }
        Ok(())
    }

    pub fn eps(&self) -> f64 {
        self.eps2.sqrt()
    }

    /// Traveling-wave speed `(a - 1/2) eps sqrt(2)`.
    pub fn c(&self) -> f64 {
        (self.a - 0.5) * self.eps() * std::f64::consts::SQRT_2
    }

    fn f(&self, u: f64) -> f64 {
        if self.reaction {
            u * (u - 1.0) * (u - self.a)
        } else {
            0.0
        }
    }

    fn df(&self, u: f64) -> f64 {
        if self.reaction {
            3.0 * u * u - 2.0 * (1.0 + self.a) * u + self.a
        } else {
            0.0
        }
    }
}

/// Traveling front `1/2 [1 + tanh((x - x0 - c t) / (2 sqrt(2) eps))]`.
pub fn nagumo_exact(x: f64, t: f64, p: &NagumoParams) -> f64 {
    let z = (x - p.x0 - p.c() * t) / (2.0 * std::f64::consts::SQRT_2 * p.eps());
    0.5 * (1.0 + z.tanh())
}

/// One linearly implicit Euler step; the reaction is linearized about `u_n`.
///
/// Boundary values are the exact wave at `t + dt`.
pub fn nagumo_step(u: &StateField, dt: f64, p: &NagumoParams, t: f64) -> Result<StateField> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    let mesh = u.mesh();
    let st = FdStencils::new(mesh)?;
    let un = u.component(0);
    let n = mesh.len();
    let mut a = BandMatrix::zeros(n, 1, 1);
    let mut rhs = vec![0.0; n];
    let x = mesh.nodes();
    a.add(0, 0, 1.0);
    rhs[0] = nagumo_exact(x[0], t + dt, p);
    a.add(n - 1, n - 1, 1.0);
    rhs[n - 1] = nagumo_exact(x[n - 1], t + dt, p);
    for j in 1..n - 1 {
        let df = p.df(un[j]);
        a.add(j, j, 1.0 + dt * df);
        for &(k, w) in &st.second[j] {
            a.add(j, k, -dt * p.eps2 * w);
        }
        rhs[j] = un[j] - dt * (p.f(un[j]) - df * un[j]);
    }
    let next = a.solve(&rhs).map_err(|e| {
        Error::SingularSystem(format!(
            "Nagumo step t={t} dt={dt} on {n} nodes (min width {:e}): {e}",
            mesh.min_width()
        ))
    })?;
    StateField::new(mesh.clone(), vec![next])
}

#[derive(Debug, Clone)]
pub struct NagumoModel {
    pub params: NagumoParams,
    pub stepping: TimeStepping,
}

impl Model for NagumoModel {
    fn name(&self) -> &'static str {
        "nagumo"
    }

    fn n_components(&self) -> usize {
        1
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, self.params.length)
    }

    fn step(&self, u: &StateField, t: f64, dt: f64) -> Result<StateField> {
        nagumo_step(u, dt, &self.params, t)
    }

    fn time_stepping(&self) -> TimeStepping {
        self.stepping
    }

    fn apply_boundary(&self, u: &mut StateField, t: f64) {
        let (lo, hi) = (u.mesh().lo(), u.mesh().hi());
        let c = u.component_mut(0);
        let n = c.len();
        c[0] = nagumo_exact(lo, t, &self.params);
        c[n - 1] = nagumo_exact(hi, t, &self.params);
    }
}

/// Mesh movement for a single adaptive trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemeshOptions {
    pub smoothing_sweeps: usize,
    /// Remesh only once the current mesh's equidistribution residual exceeds this.
    pub trigger: f64,
}

impl Default for RemeshOptions {
    fn default() -> Self {
        Self {
            smoothing_sweeps: 3,
            trigger: 0.25,
        }
    }
}

/// Trajectory and controller log of an adaptive run.
#[derive(Debug, Clone)]
pub struct NagumoRun {
    pub final_state: StateField,
    pub t_end: f64,
    pub accepted_dt: Vec<f64>,
    pub rejected: usize,
    pub remeshes: usize,
}

/// Step-doubling adaptive run over `t_span`, optionally moving the mesh by
/// arc-length equidistribution after each accepted step.
pub fn nagumo_run_adaptive(
    u0: &StateField,
    t_span: (f64, f64),
    p: &NagumoParams,
    tol: AdaptiveOptions,
    remesh: Option<RemeshOptions>,
) -> Result<NagumoRun> {
    p.validate()?;
    tol.validate()?;
    let model = NagumoModel {
        params: *p,
        stepping: TimeStepping::Adaptive(tol),
    };
    let mut ctl = StepControl::new(model.stepping);
    let mut u = u0.clone();
    let mut t = t_span.0;
    let mut remeshes = 0;
    while t < t_span.1 {
        let (next, tn) = ctl.advance_one(&model, &u, t, t_span.1)?;
        u = next;
        t = tn;
        if let Some(opts) = remesh {
            if let Some(moved) = remesh_if_needed(&u, &opts)? {
                u = moved;
                model.apply_boundary(&mut u, t);
                remeshes += 1;
            }
        }
    }
    Ok(NagumoRun {
        final_state: u,
        t_end: t,
        accepted_dt: ctl.accepted,
        rejected: ctl.rejected,
        remeshes,
    })
}

fn remesh_if_needed(u: &StateField, opts: &RemeshOptions) -> Result<Option<StateField>> {
    let mesh = u.mesh();
    let m = smooth_metric(&arclength_metric(u.component(0), mesh)?, opts.smoothing_sweeps);
    let q = crate::mesh::mesh_quality(mesh, &m)?;
    if q.equidistribution_residual <= opts.trigger {
        return Ok(None);
    }
    let new_mesh: Arc<Mesh1D> = Arc::new(equidistribute(&m, mesh, mesh.n_elements())?);
    Ok(Some(interp_linear(u, &new_mesh)?))
}

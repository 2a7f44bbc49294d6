//! Fixed-step and step-doubling adaptive time integration around a model's `step`.

use crate::error::{Error, Result};
use crate::mesh::StateField;
use crate::models::Model;

/// Local-error control by step doubling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub dt_initial: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub safety: f64,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            tol_abs: 1e-4,
            tol_rel: 1e-4,
            dt_initial: 1e-3,
            dt_min: 1e-12,
            dt_max: 1.0,
            safety: 0.9,
        }
    }
}

impl AdaptiveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_abs > 0.0) && !(self.tol_rel > 0.0) {
            return Err(Error::param("tol", "at least one tolerance must be positive"));
        }
        if self.tol_abs < 0.0 || self.tol_rel < 0.0 {
            return Err(Error::param("tol", "tolerances must be nonnegative"));
        }
        if !(self.dt_min > 0.0 && self.dt_initial >= self.dt_min && self.dt_max >= self.dt_initial) {
            return Err(Error::param(
                "dt",
                "need 0 < dt_min <= dt_initial <= dt_max",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStepping {
    Fixed { dt: f64 },
    Adaptive(AdaptiveOptions),
}

/// Per-trajectory controller state and step log.
#[derive(Debug, Clone, PartialEq)]
pub struct StepControl {
    pub scheme: TimeStepping,
    dt_next: f64,
    pub accepted: Vec<f64>,
    pub rejected: usize,
}

impl StepControl {
    pub fn new(scheme: TimeStepping) -> Self {
        let dt_next = match scheme {
            TimeStepping::Fixed { dt } => dt,
            TimeStepping::Adaptive(o) => o.dt_initial,
        };
        Self {
            scheme,
            dt_next,
            accepted: Vec::new(),
            rejected: 0,
        }
    }

    pub fn accepted_steps(&self) -> usize {
        self.accepted.len()
    }

    /// Advances by one accepted step without passing `t_end`; returns the new state and time.
    pub fn advance_one(
        &mut self,
        model: &dyn Model,
        u: &StateField,
        t: f64,
        t_end: f64,
    ) -> Result<(StateField, f64)> {
        let remaining = t_end - t;
        match self.scheme {
            TimeStepping::Fixed { dt } => {
                // snap to t_end when within roundoff of a whole step
                let h = if remaining <= dt * (1.0 + 1e-9) { remaining } else { dt };
                let next = model.step(u, t, h)?;
                self.accepted.push(h);
                Ok((next, if h == remaining { t_end } else { t + h }))
            }
            TimeStepping::Adaptive(opts) => loop {
                let mut h = self.dt_next.min(opts.dt_max);
                let last = h >= remaining * (1.0 - 1e-12);
                if last {
                    h = remaining;
                }
                if h < opts.dt_min && !last {
                    return Err(Error::StepUnderflow {
                        t,
                        dt: h,
                        dt_min: opts.dt_min,
                        accepted: self.accepted.len(),
                    });
                }
                let full = model.step(u, t, h)?;
                let half = model.step(u, t, 0.5 * h)?;
                let two = model.step(&half, t + 0.5 * h, 0.5 * h)?;
                let err = scaled_error(&full, &two, &opts);
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (opts.safety * err.powf(-0.5)).clamp(0.2, 5.0)
                };
                if err <= 1.0 {
                    self.accepted.push(h);
                    if !last || factor < 1.0 {
                        self.dt_next = (h * factor).max(opts.dt_min);
                    }
                    return Ok((two, if last { t_end } else { t + h }));
                }
                self.rejected += 1;
                let shrunk = h * factor.min(0.9);
                if shrunk < opts.dt_min {
                    return Err(Error::StepUnderflow {
                        t,
                        dt: shrunk,
                        dt_min: opts.dt_min,
                        accepted: self.accepted.len(),
                    });
                }
                self.dt_next = shrunk;
            },
        }
    }

    /// Advances to `t_end` on a fixed mesh.
    pub fn advance_to(
        &mut self,
        model: &dyn Model,
        u: &StateField,
        t: f64,
        t_end: f64,
    ) -> Result<StateField> {
        let mut state = u.clone();
        let mut time = t;
        while time < t_end {
            let (next, tn) = self.advance_one(model, &state, time, t_end)?;
            state = next;
            time = tn;
        }
        Ok(state)
    }
}

fn scaled_error(a: &StateField, b: &StateField, opts: &AdaptiveOptions) -> f64 {
    a.components()
        .iter()
        .zip(b.components())
        .flat_map(|(x, y)| x.iter().zip(y))
        .map(|(&p, &q)| (p - q).abs() / (opts.tol_abs + opts.tol_rel * p.abs().max(q.abs())))
        .fold(0.0, f64::max)
}

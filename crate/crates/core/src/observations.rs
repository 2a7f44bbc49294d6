//! Observation operators, moving observer tracks and synthetic observations.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mesh::{Mesh1D, StateField};

/// Normalized 1D Gaussian `G(x) = exp(-x^2 / (2 delta^2)) / (sqrt(2 pi) delta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussKernel {
    delta: f64,
}

impl GaussKernel {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::param("delta", "kernel width must be positive"));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = x / self.delta;
        (-0.5 * s * s).exp() / ((2.0 * PI).sqrt() * self.delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObsKind {
    Pointwise,
    /// Kernel average over elements whose midpoint lies within `r_obs` of the observer.
    Nonlocal { kernel: GaussKernel, r_obs: f64 },
}

impl ObsKind {
    /// Support radius used when selecting observations for a local analysis.
    pub fn support_radius(&self) -> f64 {
        match self {
            ObsKind::Pointwise => 0.0,
            ObsKind::Nonlocal { r_obs, .. } => *r_obs,
        }
    }
}

/// Observer tracks `x_k(t) = x_k(0) + amplitude * sin(omega * pi * t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Motion {
    pub amplitude: f64,
    pub omega: f64,
}

/// Positions of moving observers at time `t`.
pub fn moving_locations(t: f64, base: &[f64], amplitude: f64, omega: f64) -> Vec<f64> {
    let shift = amplitude * (omega * PI * t).sin();
    base.iter().map(|&x| x + shift).collect()
}

/// Checks that every observer stays inside `[lo, hi]` over its whole excursion.
pub fn validate_motion(base: &[f64], motion: Option<Motion>, lo: f64, hi: f64) -> Result<()> {
    let amp = motion.map_or(0.0, |m| m.amplitude.abs());
    for &x in base {
        if x - amp < lo || x + amp > hi {
            return Err(Error::param(
                "observations",
                format!("observer at {x} with excursion {amp} leaves [{lo}, {hi}]"),
            ));
        }
    }
    Ok(())
}

/// Pointwise observations by linear interpolation.
pub fn obs_pointwise(u: &[f64], mesh: &Mesh1D, locs: &[f64]) -> Result<Vec<f64>> {
    locs.iter()
        .map(|&x| {
            let (k, t) = mesh.locate_weight(x)?;
            Ok((1.0 - t) * u[k] + t * u[k + 1])
        })
        .collect()
}

/// Kernel-averaged observations by midpoint quadrature over the elements in `B_{r_obs}(x)`.
///
/// The kernel is not renormalized after truncation. An observer whose ball
/// contains no element midpoint yields 0.
pub fn obs_nonlocal(
    u: &[f64],
    mesh: &Mesh1D,
    locs: &[f64],
    kernel: &GaussKernel,
    r_obs: f64,
) -> Result<Vec<f64>> {
    if !(r_obs > 0.0) {
        return Err(Error::param("r_obs", "must be positive"));
    }
    Ok(locs
        .iter()
        .map(|&x| {
            nonlocal_row(mesh, x, kernel, r_obs)
                .into_iter()
                .map(|(j, w)| w * u[j])
                .sum()
        })
        .collect())
}

/// Nodal weights of one kernel observation.
fn nonlocal_row(mesh: &Mesh1D, x: f64, kernel: &GaussKernel, r_obs: f64) -> Vec<(usize, f64)> {
    let nodes = mesh.nodes();
    // midpoints are increasing, so the support is a contiguous element range
    let first = nodes.partition_point(|&n| n < x - r_obs).saturating_sub(1);
    let mut row: Vec<(usize, f64)> = Vec::new();
    for k in first..mesh.n_elements() {
        let xk = mesh.midpoint(k);
        if xk > x + r_obs {
            break;
        }
        if (xk - x).abs() > r_obs {
            continue;
        }
        let w = 0.5 * mesh.width(k) * kernel.eval(x - xk);
        match row.last_mut() {
            Some(last) if last.0 == k => last.1 += w,
            _ => row.push((k, w)),
        }
        row.push((k + 1, w));
    }
    row
}

/// One observed scalar: which component, where, and how.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsEntry {
    pub component: usize,
    pub location: f64,
}

/// A linear observation operator frozen on one mesh.
///
/// Rows are sparse over `(component, node)`.
#[derive(Debug, Clone)]
pub struct LinearObsOperator {
    rows: Vec<Vec<(usize, usize, f64)>>,
    n_nodes: usize,
}

impl LinearObsOperator {
    pub fn new(kind: &ObsKind, entries: &[ObsEntry], mesh: &Mesh1D) -> Result<Self> {
        let rows = entries
            .iter()
            .map(|e| -> Result<Vec<(usize, usize, f64)>> {
                match kind {
                    ObsKind::Pointwise => {
                        let (k, t) = mesh.locate_weight(e.location)?;
                        Ok(vec![(e.component, k, 1.0 - t), (e.component, k + 1, t)])
                    }
                    ObsKind::Nonlocal { kernel, r_obs } => {
                        mesh.locate(e.location)?;
                        Ok(nonlocal_row(mesh, e.location, kernel, *r_obs)
                            .into_iter()
                            .map(|(j, w)| (e.component, j, w))
                            .collect())
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rows,
            n_nodes: mesh.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of observations whose support contains no node.
    pub fn empty_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.is_empty()).count()
    }

    pub fn apply(&self, u: &StateField) -> Vec<f64> {
        debug_assert_eq!(u.mesh().len(), self.n_nodes);
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, j, w)| w * u.component(c)[j]).sum())
            .collect()
    }
}

/// Where and how observations are taken, independent of their values.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSpec {
    pub kind: ObsKind,
    /// Observer positions at `t = 0`, one list per observed component.
    pub base: Vec<Vec<f64>>,
    pub motion: Option<Motion>,
    /// Diagonal observation error variance, shared by all entries.
    pub r_var: f64,
}

impl ObservationSpec {
    pub fn validate(&self, lo: f64, hi: f64) -> Result<()> {
        if !(self.r_var > 0.0) {
            return Err(Error::param("r_var", "observation variance must be positive"));
        }
        if let ObsKind::Nonlocal { r_obs, .. } = self.kind {
            if !(r_obs > 0.0) {
                return Err(Error::param("r_obs", "must be positive"));
            }
        }
        for locs in &self.base {
            validate_motion(locs, self.motion, lo, hi)?;
        }
        Ok(())
    }

    /// Entries at time `t`, ordered by component then location index.
    pub fn entries_at(&self, t: f64) -> Vec<ObsEntry> {
        self.base
            .iter()
            .enumerate()
            .flat_map(|(c, locs)| {
                let at = match self.motion {
                    Some(m) => moving_locations(t, locs, m.amplitude, m.omega),
                    None => locs.clone(),
                };
                at.into_iter().map(move |location| ObsEntry { component: c, location })
            })
            .collect()
    }

    /// All observer positions at `t` regardless of component.
    pub fn locations_at(&self, t: f64) -> Vec<f64> {
        self.entries_at(t).into_iter().map(|e| e.location).collect()
    }

    /// Positions observing component `c` at `t`.
    pub fn component_locations_at(&self, c: usize, t: f64) -> Vec<f64> {
        self.entries_at(t)
            .into_iter()
            .filter(|e| e.component == c)
            .map(|e| e.location)
            .collect()
    }
}

/// Observation values at one time with their error variances.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub time: f64,
    pub kind: ObsKind,
    pub entries: Vec<ObsEntry>,
    pub values: Vec<f64>,
    pub r_diag: Vec<f64>,
    /// Generator seed and stream used for the noise.
    pub noise_seed: (u64, u64),
}

impl ObservationSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn operator_on(&self, mesh: &Mesh1D) -> Result<LinearObsOperator> {
        LinearObsOperator::new(&self.kind, &self.entries, mesh)
    }
}

/// Applies the observation operator to the truth and adds `N(0, R_jj)` noise.
pub fn synthesize_observations(
    truth: &StateField,
    spec: &ObservationSpec,
    t: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ObservationSet> {
    let entries = spec.entries_at(t);
    if let Some(e) = entries.iter().find(|e| e.component >= truth.n_components()) {
        return Err(Error::DimensionMismatch(format!(
            "observation of component {} but the state has {}",
            e.component,
            truth.n_components()
        )));
    }
    let noise_seed = (u64::from_le_bytes(rng.get_seed()[..8].try_into().unwrap()), rng.get_stream());
    let clean = LinearObsOperator::new(&spec.kind, &entries, truth.mesh())?.apply(truth);
    let sd = spec.r_var.sqrt();
    let values = clean
        .into_iter()
        .map(|v| {
            let z: f64 = rng.sample(StandardNormal);
            v + sd * z
        })
        .collect();
    Ok(ObservationSet {
        time: t,
        kind: spec.kind,
        r_diag: vec![spec.r_var; entries.len()],
        entries,
        values,
        noise_seed,
    })
}

//! One-dimensional nonuniform meshes and the fields that live on them.
//!
//! Meshes are generated by equidistributing a mesh density `rho = sqrt(det M)`
//! that is piecewise linear between the nodes of the mesh it was sampled on.
//! The cumulative integral of such a density is piecewise quadratic and can be
//! inverted exactly, so no pseudo-time mesh equation is needed in 1D.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::metric::{mesh_energy, MetricField};

/// Strictly increasing node coordinates on a fixed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    nodes: Vec<f64>,
}

impl Mesh1D {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidMesh(format!(
                "need at least 2 nodes, got {}",
                nodes.len()
            )));
        }
        for (j, w) in nodes.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[0].is_finite() || !w[1].is_finite() {
                return Err(Error::InvalidMesh(format!(
                    "nodes not strictly increasing at element {j}: {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { nodes })
    }

    /// Uniform mesh with `n` elements.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 1 || !(hi > lo) {
            return Err(Error::InvalidMesh(format!(
                "uniform mesh needs n >= 1 and hi > lo (n={n}, [{lo}, {hi}])"
            )));
        }
        let h = (hi - lo) / n as f64;
        let mut nodes: Vec<f64> = (0..=n).map(|j| lo + h * j as f64).collect();
        nodes[n] = hi;
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn lo(&self) -> f64 {
        self.nodes[0]
    }

    pub fn hi(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn length(&self) -> f64 {
        self.hi() - self.lo()
    }

    /// Width of element `k`, i.e. `[x_k, x_{k+1}]`.
    pub fn width(&self, k: usize) -> f64 {
        self.nodes[k + 1] - self.nodes[k]
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.nodes[k] + self.nodes[k + 1])
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.windows(2).map(|w| w[1] - w[0])
    }

    pub fn min_width(&self) -> f64 {
        self.widths().fold(f64::INFINITY, f64::min)
    }

    pub fn max_width(&self) -> f64 {
        self.widths().fold(0.0, f64::max)
    }

    /// Index of the element containing `x` (the last element for `x == hi`).
    pub fn locate(&self, x: f64) -> Result<usize> {
        let (lo, hi) = (self.lo(), self.hi());
        let tol = 1e-12 * (hi - lo);
        if x < lo - tol || x > hi + tol || x.is_nan() {
            return Err(Error::OutOfDomain { x, lo, hi });
        }
        let k = self.nodes.partition_point(|&n| n <= x);
        Ok(k.saturating_sub(1).min(self.n_elements() - 1))
    }

    /// Element `k` and local barycentric weight of the right node at `x`.
    pub(crate) fn locate_weight(&self, x: f64) -> Result<(usize, f64)> {
        let k = self.locate(x)?;
        let t = ((x - self.nodes[k]) / self.width(k)).clamp(0.0, 1.0);
        Ok((k, t))
    }

    /// Same domain to within roundoff.
    pub fn same_domain(&self, other: &Mesh1D) -> bool {
        let tol = 1e-12 * self.length().max(other.length());
        (self.lo() - other.lo()).abs() <= tol && (self.hi() - other.hi()).abs() <= tol
    }
}

/// A (possibly multi-component) nodal field on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    mesh: Arc<Mesh1D>,
    components: Vec<Vec<f64>>,
}

impl StateField {
    pub fn new(mesh: Arc<Mesh1D>, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::DimensionMismatch("state has no components".into()));
        }
        for (c, comp) in components.iter().enumerate() {
            if comp.len() != mesh.len() {
                return Err(Error::DimensionMismatch(format!(
                    "component {c} has {} values, mesh has {} nodes",
                    comp.len(),
                    mesh.len()
                )));
            }
        }
        Ok(Self { mesh, components })
    }

    /// Samples `f(component, x)` at every node.
    pub fn from_fn(mesh: Arc<Mesh1D>, n_components: usize, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let components = (0..n_components)
            .map(|c| mesh.nodes().iter().map(|&x| f(c, x)).collect())
            .collect();
        Self { mesh, components }
    }

    pub fn zeros(mesh: Arc<Mesh1D>, n_components: usize) -> Self {
        Self::from_fn(mesh, n_components, |_, _| 0.0)
    }

    pub fn mesh(&self) -> &Arc<Mesh1D> {
        &self.mesh
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.components[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.components[c]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.components
    }

    /// Point value of component `c` by linear interpolation.
    pub fn eval(&self, c: usize, x: f64) -> Result<f64> {
        let (k, t) = self.mesh.locate_weight(x)?;
        let u = &self.components[c];
        Ok((1.0 - t) * u[k] + t * u[k + 1])
    }
}

/// Density that is linear on each element of a mesh.
#[derive(Debug, Clone)]
pub struct PiecewiseLinearDensity {
    mesh: Arc<Mesh1D>,
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl PiecewiseLinearDensity {
    pub fn new(mesh: Arc<Mesh1D>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::DimensionMismatch(format!(
                "density has {} values, mesh has {} nodes",
                values.len(),
                mesh.len()
            )));
        }
        if let Some((node, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::NonPositiveDensity { node, value });
        }
        let mut cumulative = Vec::with_capacity(values.len());
        cumulative.push(0.0);
        for k in 0..mesh.n_elements() {
            let area = 0.5 * (values[k] + values[k + 1]) * mesh.width(k);
            cumulative.push(cumulative[k] + area);
        }
        Ok(Self {
            mesh,
            values,
            cumulative,
        })
    }

    /// `rho = sqrt(det M)` sampled at the nodes of the metric's mesh.
    pub fn from_metric(m: &MetricField) -> Result<Self> {
        let nodal = m.to_nodes();
        let values = nodal.values().iter().map(|a| a.det().sqrt()).collect();
        Self::new(nodal.mesh().clone(), values)
    }

    pub fn mesh(&self) -> &Arc<Mesh1D> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (k, t) = self.mesh.locate_weight(x)?;
        Ok((1.0 - t) * self.values[k] + t * self.values[k + 1])
    }

    /// Exact integral of the density over `[lo, x]`.
    pub fn cumulative_at(&self, x: f64) -> Result<f64> {
        let (k, _) = self.mesh.locate_weight(x)?;
        let x = x.clamp(self.mesh.lo(), self.mesh.hi());
        let s = x - self.mesh.nodes()[k];
        let h = self.mesh.width(k);
        let (r0, r1) = (self.values[k], self.values[k + 1]);
        Ok(self.cumulative[k] + r0 * s + 0.5 * (r1 - r0) * s * s / h)
    }

    /// Exact integral over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        Ok(self.cumulative_at(b)? - self.cumulative_at(a)?)
    }

    /// Point `x` with cumulative integral equal to `target`.
    fn invert(&self, target: f64, start_element: usize) -> (f64, usize) {
        let ne = self.mesh.n_elements();
        let mut k = start_element;
        while k + 1 < ne && self.cumulative[k + 1] < target {
            k += 1;
        }
        let x0 = self.mesh.nodes()[k];
        let h = self.mesh.width(k);
        let (r0, r1) = (self.values[k], self.values[k + 1]);
        let c = (target - self.cumulative[k]).max(0.0);
        // solve r0 s + (r1 - r0) s^2 / (2h) = c
        let a = 0.5 * (r1 - r0) / h;
        let s = if a.abs() * c <= 1e-14 * r0 * r0 {
            c / r0
        } else {
            // rationalized root, stable for either sign of a
            2.0 * c / (r0 + (r0 * r0 + 4.0 * a * c).max(0.0).sqrt())
        };
        (x0 + s.clamp(0.0, h), k)
    }
}

/// Mesh with `n` elements equidistributing `sqrt(det M)` of a metric field
/// that lives on `mesh_old`.
pub fn equidistribute(m: &MetricField, mesh_old: &Mesh1D, n: usize) -> Result<Mesh1D> {
    if n < 2 {
        return Err(Error::param("n", format!("need at least 2 elements, got {n}")));
    }
    if m.mesh().as_ref() != mesh_old {
        return Err(Error::MeshMismatch(
            "metric field is not supported on the old mesh".into(),
        ));
    }
    let density = PiecewiseLinearDensity::from_metric(m)?;
    equidistribute_density(&density, n)
}

/// Equidistributes a piecewise-linear density directly.
pub fn equidistribute_density(density: &PiecewiseLinearDensity, n: usize) -> Result<Mesh1D> {
    if n < 2 {
        return Err(Error::param("n", format!("need at least 2 elements, got {n}")));
    }
    let mesh = density.mesh();
    let total = density.total();
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(mesh.lo());
    let mut k = 0;
    for i in 1..n {
        let (x, kk) = density.invert(total * i as f64 / n as f64, k);
        k = kk;
        nodes.push(x);
    }
    nodes.push(mesh.hi());
    Mesh1D::new(nodes)
}

/// Piecewise-linear interpolation of every component onto `mesh_to`.
pub fn interp_linear(u: &StateField, mesh_to: &Arc<Mesh1D>) -> Result<StateField> {
    if Arc::ptr_eq(u.mesh(), mesh_to) || u.mesh().as_ref() == mesh_to.as_ref() {
        return StateField::new(mesh_to.clone(), u.components().to_vec());
    }
    let weights = interp_weights(u.mesh(), mesh_to)?;
    let components = u
        .components()
        .iter()
        .map(|comp| apply_weights(&weights, comp))
        .collect();
    StateField::new(mesh_to.clone(), components)
}

/// Interpolates raw nodal values between meshes.
pub fn interp_values(values: &[f64], from: &Mesh1D, to: &Mesh1D) -> Result<Vec<f64>> {
    if values.len() != from.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} nodes",
            values.len(),
            from.len()
        )));
    }
    let weights = interp_weights(from, to)?;
    Ok(apply_weights(&weights, values))
}

pub(crate) fn interp_weights(from: &Mesh1D, to: &Mesh1D) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(to.len());
    let src = from.nodes();
    let tol = 1e-12 * from.length();
    let mut k = 0;
    for &x in to.nodes() {
        if x < from.lo() - tol || x > from.hi() + tol || x.is_nan() {
            return Err(Error::OutOfDomain {
                x,
                lo: from.lo(),
                hi: from.hi(),
            });
        }
        // target nodes are sorted, so the search only moves forward
        while k + 2 < src.len() && src[k + 1] <= x {
            k += 1;
        }
        let t = ((x - src[k]) / (src[k + 1] - src[k])).clamp(0.0, 1.0);
        out.push((k, t));
    }
    Ok(out)
}

fn apply_weights(weights: &[(usize, f64)], values: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .map(|&(k, t)| {
            if t == 0.0 {
                values[k]
            } else if t == 1.0 {
                values[k + 1]
            } else {
                (1.0 - t) * values[k] + t * values[k + 1]
            }
        })
        .collect()
}

/// Mesh-quality diagnostics with respect to a metric field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    /// `max_K |rho_K |K| - sigma_h/N| / (sigma_h/N)`.
    pub equidistribution_residual: f64,
    /// Always zero in 1D: both sides of the alignment condition reduce to the same scalar.
    pub alignment_residual: f64,
    pub min_width: f64,
    pub max_width: f64,
    pub energy: f64,
}

/// Equidistribution residual, alignment residual, element widths and energy.
///
/// The element density `rho_K` is the exact element mean of the piecewise-linear
/// nodal density `sqrt(det M)`, the same density [`equidistribute`] inverts.
pub fn mesh_quality(mesh: &Mesh1D, m: &MetricField) -> Result<MeshQuality> {
    if m.mesh().as_ref() != mesh {
        return Err(Error::MeshMismatch(
            "metric field is not supported on the measured mesh".into(),
        ));
    }
    let density = PiecewiseLinearDensity::from_metric(m)?;
    let n = mesh.n_elements();
    let target = density.total() / n as f64;
    let rho = density.values();
    let residual = (0..n)
        .map(|k| {
            let mass = 0.5 * (rho[k] + rho[k + 1]) * mesh.width(k);
            ((mass - target) / target).abs()
        })
        .fold(0.0, f64::max);
    Ok(MeshQuality {
        equidistribution_residual: residual,
        alignment_residual: 0.0,
        min_width: mesh.min_width(),
        max_width: mesh.max_width(),
        energy: mesh_energy(mesh, m)?,
    })
}

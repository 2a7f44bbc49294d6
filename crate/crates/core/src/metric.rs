//! Metric tensors (mesh density functions) and their algebra.
//!
//! A metric field assigns a symmetric positive definite matrix to every node
//! (or element) of a mesh. Larger determinants ask for smaller elements.
//! Fields are combined with [`spd_intersect`], whose result asks for at least
//! the resolution of both operands in every direction.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3};

use crate::error::{Error, Result};
use crate::mesh::Mesh1D;
use crate::models::fd;
use crate::observations::GaussKernel;

/// Relative eigenvalue floor below which a matrix is treated as singular.
pub const SPD_TOLERANCE: f64 = 1e-12;

/// Symmetric positive definite matrix of dimension 1, 2 or 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdMatrix {
    dim: usize,
    m: Matrix3<f64>,
}

impl SpdMatrix {
    /// Validates symmetry and positive definiteness of a row-major `dim x dim` matrix.
    pub fn new(dim: usize, entries: &[f64]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::DimensionMismatch(format!("metric dimension {dim} not in 1..=3")));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {dim}x{dim} matrix",
                entries.len()
            )));
        }
        let mut m = Matrix3::zeros();
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = entries[i * dim + j];
            }
        }
        let a = Self { dim, m };
        a.check()?;
        Ok(a)
    }

    pub fn from_scalar(a: f64) -> Result<Self> {
        Self::new(1, &[a])
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix3::zeros();
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        Self { dim, m }
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        let d = values.len();
        let mut e = vec![0.0; d * d];
        for (i, v) in values.iter().enumerate() {
            e[i * d + i] = *v;
        }
        Self::new(d, &e)
    }

    pub(crate) fn from_dmatrix_unchecked(a: &DMatrix<f64>) -> Self {
        let dim = a.nrows();
        let mut m = Matrix3::zeros();
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = 0.5 * (a[(i, j)] + a[(j, i)]);
            }
        }
        Self { dim, m }
    }

    pub fn from_dmatrix(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch("metric must be square".into()));
        }
        let entries: Vec<f64> = (0..a.nrows())
            .flat_map(|i| (0..a.ncols()).map(move |j| a[(i, j)]))
            .collect();
        Self::new(a.nrows(), &entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// Scalar value of a 1x1 metric.
    pub fn scalar(&self) -> f64 {
        self.m[(0, 0)]
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.m[(i, j)])
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.m[(i, i)]).sum()
    }

    pub fn det(&self) -> f64 {
        match self.dim {
            1 => self.m[(0, 0)],
            2 => self.m[(0, 0)] * self.m[(1, 1)] - self.m[(0, 1)] * self.m[(1, 0)],
            _ => self.m.determinant(),
        }
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim == 1 {
            return vec![self.m[(0, 0)]];
        }
        let mut ev: Vec<f64> = self.to_dmatrix().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Upper-triangular entries, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim * (self.dim + 1) / 2);
        for i in 0..self.dim {
            for j in i..self.dim {
                out.push(self.m[(i, j)]);
            }
        }
        out
    }

    fn check(&self) -> Result<()> {
        let scale = (0..self.dim)
            .flat_map(|i| (0..self.dim).map(move |j| (i, j)))
            .map(|(i, j)| self.m[(i, j)].abs())
            .fold(0.0, f64::max);
        if !scale.is_finite() {
            return Err(Error::NotSpd("non-finite entry".into()));
        }
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                if (self.m[(i, j)] - self.m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotSpd(format!(
                        "asymmetric entries ({i},{j}) = {} vs {}",
                        self.m[(i, j)],
                        self.m[(j, i)]
                    )));
                }
            }
        }
        let tr = self.trace();
        let emin = self.min_eigenvalue();
        if !(tr > 0.0) || emin <= SPD_TOLERANCE * tr {
            return Err(Error::NotSpd(format!(
                "smallest eigenvalue {emin:e} with trace {tr:e}"
            )));
        }
        Ok(())
    }

    /// `sum_i w_i A_i` for nonnegative weights; stays SPD when any weight is positive.
    pub(crate) fn convex_combination(parts: &[(f64, &SpdMatrix)]) -> SpdMatrix {
        let dim = parts[0].1.dim;
        let mut m = Matrix3::zeros();
        for (w, a) in parts {
            m += a.m * *w;
        }
        SpdMatrix { dim, m }
    }
}

/// Metric intersection `A ∩ B`.
///
/// With `A = L L^T` and `L^{-1} B L^{-T} = V diag(b) V^T`, the matrix
/// `P = V^T L^{-1}` satisfies `P A P^T = I`, `P B P^T = diag(b)`, and
/// `A ∩ B = P^{-1} diag(max(1, b_i)) P^{-T} = L V diag(max(1, b_i)) V^T L^T`.
pub fn spd_intersect(a: &SpdMatrix, b: &SpdMatrix) -> Result<SpdMatrix> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch(format!(
            "cannot intersect {}x{} with {}x{}",
            a.dim, a.dim, b.dim, b.dim
        )));
    }
    a.check()?;
    b.check()?;
    Ok(intersect_unchecked(a, b))
}

fn intersect_unchecked(a: &SpdMatrix, b: &SpdMatrix) -> SpdMatrix {
    if a.dim == 1 {
        return SpdMatrix {
            dim: 1,
            m: Matrix3::new(a.m[(0, 0)].max(b.m[(0, 0)]), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        };
    }
    let am = a.to_dmatrix();
    let bm = b.to_dmatrix();
    let l = am
        .cholesky()
        .expect("checked SPD input has a Cholesky factor")
        .l();
    let l_inv = l
        .clone()
        .try_inverse()
        .expect("Cholesky factor of an SPD matrix is invertible");
    let mut c = &l_inv * bm * l_inv.transpose();
    c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let lifted = eig.eigenvalues.map(|v| v.max(1.0));
    let lv = &l * &eig.eigenvectors;
    let out = &lv * DMatrix::from_diagonal(&lifted) * lv.transpose();
    SpdMatrix::from_dmatrix_unchecked(&out)
}

/// Where the values of a metric field are located.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Node,
    Element,
}

/// An SPD matrix per node (or per element) of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    mesh: Arc<Mesh1D>,
    location: Location,
    values: Vec<SpdMatrix>,
}

impl MetricField {
    pub fn new(mesh: Arc<Mesh1D>, location: Location, values: Vec<SpdMatrix>) -> Result<Self> {
        let expected = match location {
            Location::Node => mesh.len(),
            Location::Element => mesh.n_elements(),
        };
        if values.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{} metric values for {expected} {location:?} locations",
                values.len()
            )));
        }
        if let Some(first) = values.first() {
            if values.iter().any(|v| v.dim != first.dim) {
                return Err(Error::DimensionMismatch("mixed metric dimensions".into()));
            }
        }
        Ok(Self {
            mesh,
            location,
            values,
        })
    }

    pub fn identity(mesh: Arc<Mesh1D>, dim: usize) -> Self {
        let n = mesh.len();
        Self {
            mesh,
            location: Location::Node,
            values: vec![SpdMatrix::identity(dim); n],
        }
    }

    /// Nodal 1x1 field from positive scalars.
    pub fn from_scalars(mesh: Arc<Mesh1D>, values: Vec<f64>) -> Result<Self> {
        let values = values
            .into_iter()
            .map(SpdMatrix::from_scalar)
            .collect::<Result<Vec<_>>>()?;
        Self::new(mesh, Location::Node, values)
    }

    pub fn mesh(&self) -> &Arc<Mesh1D> {
        &self.mesh
    }

    pub fn location(&self) -> Location {
        self.location
    }

    pub fn values(&self) -> &[SpdMatrix] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(1, |v| v.dim)
    }

    /// Scalar values of a 1x1 field.
    pub fn scalars(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.scalar()).collect()
    }

    pub fn dets(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.det()).collect()
    }

    /// Nodal version; element values are averaged over the adjacent elements.
    pub fn to_nodes(&self) -> MetricField {
        match self.location {
            Location::Node => self.clone(),
            Location::Element => {
                let ne = self.values.len();
                let values = (0..=ne)
                    .map(|j| {
                        if j == 0 {
                            self.values[0]
                        } else if j == ne {
                            self.values[ne - 1]
                        } else {
                            SpdMatrix::convex_combination(&[
                                (0.5, &self.values[j - 1]),
                                (0.5, &self.values[j]),
                            ])
                        }
                    })
                    .collect();
                MetricField {
                    mesh: self.mesh.clone(),
                    location: Location::Node,
                    values,
                }
            }
        }
    }

    /// Element means of a nodal field (element fields are returned unchanged).
    pub fn element_means(&self) -> Vec<SpdMatrix> {
        match self.location {
            Location::Element => self.values.clone(),
            Location::Node => self
                .values
                .windows(2)
                .map(|w| SpdMatrix::convex_combination(&[(0.5, &w[0]), (0.5, &w[1])]))
                .collect(),
        }
    }

    /// `max_K sqrt(det M_K)` over element means.
    pub fn max_sqrt_det(&self) -> f64 {
        self.element_means()
            .iter()
            .map(|m| m.det().sqrt())
            .fold(0.0, f64::max)
    }

    /// Entrywise linear interpolation of the nodal field onto another mesh.
    pub fn interpolate_to(&self, mesh_to: &Arc<Mesh1D>) -> Result<MetricField> {
        let nodal = self.to_nodes();
        if nodal.mesh.as_ref() == mesh_to.as_ref() {
            return Ok(MetricField {
                mesh: mesh_to.clone(),
                ..nodal
            });
        }
        let weights = crate::mesh::interp_weights(&nodal.mesh, mesh_to)?;
        let values = weights
            .iter()
            .map(|&(k, t)| {
                SpdMatrix::convex_combination(&[(1.0 - t, &nodal.values[k]), (t, &nodal.values[k + 1])])
            })
            .collect();
        Ok(MetricField {
            mesh: mesh_to.clone(),
            location: Location::Node,
            values,
        })
    }

    /// CSV rows: coordinate (node or element midpoint) and upper-triangular entries.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.dim();
        let mut header = vec!["x".to_string()];
        for i in 0..d {
            for j in i..d {
                header.push(format!("m{i}{j}"));
            }
        }
        w.write_record(&header)?;
        for (k, v) in self.values.iter().enumerate() {
            let x = match self.location {
                Location::Node => self.mesh.nodes()[k],
                Location::Element => self.mesh.midpoint(k),
            };
            let mut row = vec![crate::io::fmt_f64(x)];
            row.extend(v.upper_triangle().into_iter().map(crate::io::fmt_f64));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn same_support(a: &MetricField, b: &MetricField) -> bool {
    (Arc::ptr_eq(&a.mesh, &b.mesh) || a.mesh == b.mesh) && a.location == b.location
}

/// Pointwise left-to-right fold of [`spd_intersect`] over fields on one mesh.
pub fn metric_intersect_field(fields: &[MetricField]) -> Result<MetricField> {
    let first = fields
        .first()
        .ok_or_else(|| Error::param("fields", "need at least one metric field"))?;
    for (i, f) in fields.iter().enumerate().skip(1) {
        if !same_support(first, f) {
            return Err(Error::MeshMismatch(format!(
                "field {i} is not on the same mesh/location as field 0"
            )));
        }
        if f.dim() != first.dim() {
            return Err(Error::DimensionMismatch(format!(
                "field {i} has dimension {}, field 0 has {}",
                f.dim(),
                first.dim()
            )));
        }
    }
    for f in fields {
        for v in &f.values {
            v.check()?;
        }
    }
    let mut values = first.values.clone();
    for f in &fields[1..] {
        for (acc, v) in values.iter_mut().zip(&f.values) {
            *acc = intersect_unchecked(acc, v);
        }
    }
    Ok(MetricField {
        mesh: first.mesh.clone(),
        location: first.location,
        values,
    })
}

/// Hessian metric `det(I + |H|/alpha)^{-1/(d+4)} (I + |H|/alpha)` for one symmetric Hessian.
pub fn hessian_metric_tensor(h: &DMatrix<f64>, alpha_h: f64) -> Result<SpdMatrix> {
    if !(alpha_h > 0.0) {
        return Err(Error::param("alpha_h", "must be positive"));
    }
    let d = h.nrows();
    let abs_h = abs_symmetric(h);
    let a = DMatrix::<f64>::identity(d, d) + abs_h / alpha_h;
    let det = a.determinant();
    SpdMatrix::from_dmatrix(&(a * det.powf(-1.0 / (d as f64 + 4.0))))
}

/// `|H| = Q diag(|lambda|) Q^T`.
fn abs_symmetric(h: &DMatrix<f64>) -> DMatrix<f64> {
    if h.nrows() == 1 {
        return h.map(f64::abs);
    }
    let sym = (h + h.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let q = &eig.eigenvectors;
    q * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::abs)) * q.transpose()
}

/// Nodal second derivative: nonuniform second difference at interior nodes,
/// copied from the neighbouring interior node at the two boundary nodes.
pub fn recovered_hessian(u: &[f64], mesh: &Mesh1D) -> Result<Vec<f64>> {
    if mesh.len() < 3 {
        return Err(Error::InvalidMesh(format!(
            "Hessian recovery needs at least 3 nodes, got {}",
            mesh.len()
        )));
    }
    if u.len() != mesh.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values on {} nodes",
            u.len(),
            mesh.len()
        )));
    }
    let x = mesh.nodes();
    let n = x.len();
    let mut h = vec![0.0; n];
    for j in 1..n - 1 {
        h[j] = fd::second_difference(u[j - 1], u[j], u[j + 1], x[j - 1], x[j], x[j + 1]);
    }
    h[0] = h[1];
    h[n - 1] = h[n - 2];
    Ok(h)
}

/// Nodal Hessian metric of a scalar field; in 1D `M = (1 + |u_xx|/alpha)^{4/5}`.
pub fn hessian_metric(u: &[f64], mesh: &Arc<Mesh1D>, alpha_h: f64) -> Result<MetricField> {
    if !(alpha_h > 0.0) {
        return Err(Error::param("alpha_h", "must be positive"));
    }
    let h = recovered_hessian(u, mesh)?;
    let values = h
        .iter()
        .map(|&hj| {
            let a = 1.0 + hj.abs() / alpha_h;
            SpdMatrix::from_scalar(a.powf(0.8))
        })
        .collect::<Result<Vec<_>>>()?;
    MetricField::new(mesh.clone(), Location::Node, values)
}

/// Nodal slope: backward differences on elements, averaged to nodes.
pub fn nodal_slope(u: &[f64], mesh: &Mesh1D) -> Vec<f64> {
    let x = mesh.nodes();
    let n = x.len();
    let slopes: Vec<f64> = (1..n).map(|j| fd::backward_difference(u[j - 1], u[j], x[j - 1], x[j])).collect();
    (0..n)
        .map(|j| {
            if j == 0 {
                slopes[0]
            } else if j == n - 1 {
                slopes[n - 2]
            } else {
                0.5 * (slopes[j - 1] + slopes[j])
            }
        })
        .collect()
}

/// Arc-length density `sqrt(1 + u_x^2)` as a nodal 1x1 field.
pub fn arclength_metric(u: &[f64], mesh: &Arc<Mesh1D>) -> Result<MetricField> {
    if u.len() != mesh.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values on {} nodes",
            u.len(),
            mesh.len()
        )));
    }
    let values = nodal_slope(u, mesh)
        .into_iter()
        .map(|s| (1.0 + s * s).sqrt())
        .collect();
    MetricField::from_scalars(mesh.clone(), values)
}

/// Observation-location metric `I + sum_j chi(|x - x_j|) I` with
/// `chi(w) = 1 / (exp(w^2/sigma^2) - 1 + 2/D)`, `D = max_K sqrt(det M_K^ens)`.
pub fn adhoc_obs_metric(
    obs_locs: &[f64],
    mesh: &Arc<Mesh1D>,
    sigma: f64,
    ens_metric: &MetricField,
) -> Result<MetricField> {
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", "must be positive"));
    }
    if obs_locs.is_empty() {
        return Ok(MetricField::identity(mesh.clone(), 1));
    }
    let floor = 2.0 / ens_metric.max_sqrt_det();
    let inv_s2 = 1.0 / (sigma * sigma);
    let mut sorted = obs_locs.to_vec();
    sorted.sort_by(f64::total_cmp);
    // beyond w^2/sigma^2 = 40 a bump adds less than 1e-17
    let reach = sigma * 40f64.sqrt();
    let values = mesh
        .nodes()
        .iter()
        .map(|&x| {
            let lo = sorted.partition_point(|&xo| xo < x - reach);
            let hi = sorted.partition_point(|&xo| xo <= x + reach);
            let bump: f64 = sorted[lo..hi]
                .iter()
                .map(|&xo| {
                    let w = x - xo;
                    1.0 / ((w * w * inv_s2).exp() - 1.0 + floor)
                })
                .sum();
            1.0 + bump
        })
        .collect();
    MetricField::from_scalars(mesh.clone(), values)
}

/// Goal-oriented element metric for kernel observations,
/// `M_K = det(A_K)^{-1/(d+2)} A_K` with `A_K = I + |H_K|/alpha * sum_i |G(x_i - x_K)|`.
pub fn nonlocal_obs_metric(
    u: &[f64],
    mesh: &Arc<Mesh1D>,
    obs_locs: &[f64],
    kernel: &GaussKernel,
    alpha_h: f64,
) -> Result<MetricField> {
    if !(alpha_h > 0.0) {
        return Err(Error::param("alpha_h", "must be positive"));
    }
    let h = recovered_hessian(u, mesh)?;
    let values = (0..mesh.n_elements())
        .map(|k| {
            let xk = mesh.midpoint(k);
            let hk = 0.5 * (h[k] + h[k + 1]);
            let g: f64 = obs_locs.iter().map(|&xo| kernel.eval(xo - xk).abs()).sum();
            nonlocal_element_metric(hk, g, alpha_h)
        })
        .collect::<Result<Vec<_>>>()?;
    MetricField::new(mesh.clone(), Location::Element, values)
}

/// 1D element value `A^{2/3}`, `A = 1 + |h| g / alpha`.
pub fn nonlocal_element_metric(hessian: f64, kernel_sum: f64, alpha_h: f64) -> Result<SpdMatrix> {
    let a = 1.0 + hessian.abs() * kernel_sum / alpha_h;
    SpdMatrix::from_scalar(a.powf(-1.0 / 3.0) * a)
}

/// `sweeps` passes of 1/4-1/2-1/4 averaging; boundary values are copied.
pub fn smooth_metric(m: &MetricField, sweeps: usize) -> MetricField {
    let mut values = m.values.clone();
    let n = values.len();
    if n < 3 {
        return m.clone();
    }
    let mut next = values.clone();
    for _ in 0..sweeps {
        for j in 1..n - 1 {
            next[j] = SpdMatrix::convex_combination(&[
                (0.25, &values[j - 1]),
                (0.5, &values[j]),
                (0.25, &values[j + 1]),
            ]);
        }
        next[0] = values[0];
        next[n - 1] = values[n - 1];
        std::mem::swap(&mut values, &mut next);
    }
    MetricField {
        mesh: m.mesh.clone(),
        location: m.location,
        values,
    }
}

/// Discrete meshing energy in 1D with `F'_K = N |K|`:
/// `I_h = 1/3 sum |K| sqrt(m_K) (1/(F'^2 m_K))^{3/4} + 1/3 sum |K| sqrt(m_K) (F' sqrt(m_K))^{-3/2}`.
pub fn mesh_energy(mesh: &Mesh1D, m: &MetricField) -> Result<f64> {
    if m.mesh.as_ref() != mesh {
        return Err(Error::MeshMismatch("metric field is not on this mesh".into()));
    }
    let n = mesh.n_elements() as f64;
    let d = 1.0f64;
    let energy = m
        .element_means()
        .iter()
        .zip(mesh.widths())
        .map(|(mk, k)| {
            let det = mk.det();
            let fp = k * n;
            let tr = 1.0 / (fp * fp * mk.scalar());
            let alignment = k * det.sqrt() * tr.powf(0.75 * d) / 3.0;
            let equi = d.powf(0.75 * d) * k * det.sqrt() * (fp * det.sqrt()).powf(-1.5) / 3.0;
            alignment + equi
        })
        .sum();
    Ok(energy)
}

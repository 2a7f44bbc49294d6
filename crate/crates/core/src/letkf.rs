//! Ensemble statistics, ETKF weights, metric-based localization and the LETKF
//! local analysis.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Mesh1D, StateField};
use crate::metric::{Location, MetricField};
use crate::observations::ObservationSet;

/// Ensemble members sharing one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    mesh: Arc<Mesh1D>,
    members: Vec<StateField>,
}

impl EnsembleState {
    pub fn new(members: Vec<StateField>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::DimensionMismatch("empty ensemble".into()))?;
        let mesh = first.mesh().clone();
        let nc = first.n_components();
        for (i, m) in members.iter().enumerate() {
            if !Arc::ptr_eq(m.mesh(), &mesh) && m.mesh().as_ref() != mesh.as_ref() {
                return Err(Error::MeshMismatch(format!("member {i} is on a different mesh")));
            }
            if m.n_components() != nc {
                return Err(Error::DimensionMismatch(format!(
                    "member {i} has {} components, member 0 has {nc}",
                    m.n_components()
                )));
            }
        }
        Ok(Self { mesh, members })
    }

    pub fn mesh(&self) -> &Arc<Mesh1D> {
        &self.mesh
    }

    pub fn members(&self) -> &[StateField] {
        &self.members
    }

    pub fn into_members(self) -> Vec<StateField> {
        self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn n_components(&self) -> usize {
        self.members[0].n_components()
    }

    pub fn mean(&self) -> StateField {
        let ne = self.len() as f64;
        let nc = self.n_components();
        let n = self.mesh.len();
        let comps = (0..nc)
            .map(|c| {
                (0..n)
                    .map(|j| self.members.iter().map(|m| m.component(c)[j]).sum::<f64>() / ne)
                    .collect()
            })
            .collect();
        StateField::new(self.mesh.clone(), comps).expect("mean has the ensemble's shape")
    }

    /// Ensemble spread (root mean sample variance over nodes) per component.
    pub fn spread(&self) -> Vec<f64> {
        let mean = self.mean();
        let ne = self.len() as f64;
        (0..self.n_components())
            .map(|c| {
                let mc = mean.component(c);
                let var: f64 = self
                    .members
                    .iter()
                    .flat_map(|m| m.component(c).iter().zip(mc).map(|(a, b)| (a - b) * (a - b)))
                    .sum();
                (var / ((ne - 1.0).max(1.0) * mc.len() as f64)).sqrt()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// Observations of every component update every component.
    Coupled,
    /// Each component is analysed with its own observations only.
    Uncoupled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    pub rho: f64,
    pub r0: f64,
    pub coupling: Coupling,
    pub perturbed_obs: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            rho: 1.1,
            r0: 0.01,
            coupling: Coupling::Coupled,
            perturbed_obs: false,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 1.0) {
            return Err(Error::param("rho", "inflation must be at least 1"));
        }
        if !(self.r0 > 0.0) {
            return Err(Error::param("r0", "must be positive"));
        }
        Ok(())
    }
}

/// Ensemble mean and the scaled perturbation matrix `X` with `X X^T = P^f`.
///
/// Rows of `X` are ordered component-major (`c * n_nodes + node`).
pub fn forecast_stats(ens: &EnsembleState) -> Result<(StateField, DMatrix<f64>)> {
    let ne = ens.len();
    if ne < 2 {
        return Err(Error::DimensionMismatch(format!(
            "forecast statistics need at least 2 members, got {ne}"
        )));
    }
    let mean = ens.mean();
    let n = ens.mesh().len();
    let nc = ens.n_components();
    let s = 1.0 / ((ne - 1) as f64).sqrt();
    let x = DMatrix::from_fn(nc * n, ne, |r, i| {
        let (c, j) = (r / n, r % n);
        (ens.members()[i].component(c)[j] - mean.component(c)[j]) * s
    });
    Ok((mean, x))
}

/// `w = (I + Y^T R^{-1} Y)^{-1} Y^T R^{-1} d` by Cholesky of the ensemble-space matrix.
pub fn etkf_weights(y: &DMatrix<f64>, r_diag: &[f64], innovation: &[f64]) -> Result<DVector<f64>> {
    let w = etkf_weights_many(y, r_diag, &DMatrix::from_column_slice(innovation.len(), 1, innovation))?;
    Ok(w.column(0).into_owned())
}

/// Observation-space form `w = Y^T (Y Y^T + R)^{-1} d`, algebraically equal to [`etkf_weights`].
pub fn etkf_weights_obs_space(
    y: &DMatrix<f64>,
    r_diag: &[f64],
    innovation: &[f64],
) -> Result<DVector<f64>> {
    check_dims(y, r_diag, innovation.len())?;
    let mut s = y * y.transpose();
    for (i, r) in r_diag.iter().enumerate() {
        s[(i, i)] += r;
    }
    let d = DVector::from_column_slice(innovation);
    let z = s
        .cholesky()
        .ok_or_else(|| Error::SingularSystem("Y Y^T + R is not positive definite".into()))?
        .solve(&d);
    Ok(y.transpose() * z)
}

fn check_dims(y: &DMatrix<f64>, r_diag: &[f64], n_innov: usize) -> Result<()> {
    if y.nrows() != r_diag.len() || y.nrows() != n_innov {
        return Err(Error::DimensionMismatch(format!(
            "Y has {} rows, R has {} entries, innovation has {}",
            y.nrows(),
            r_diag.len(),
            n_innov
        )));
    }
    if let Some(r) = r_diag.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::param("R", format!("diagonal entry {r} is not positive")));
    }
    Ok(())
}

/// Weights for several innovations at once (one column per member).
fn etkf_weights_many(y: &DMatrix<f64>, r_diag: &[f64], d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dims(y, r_diag, d.nrows())?;
    let ne = y.ncols();
    let mut yr = y.clone();
    for (i, r) in r_diag.iter().enumerate() {
        yr.row_mut(i).scale_mut(1.0 / r);
    }
    let mut a = y.transpose() * &yr;
    for i in 0..ne {
        a[(i, i)] += 1.0;
    }
    let rhs = yr.transpose() * d;
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::SingularSystem("I + Y^T R^-1 Y is not positive definite".into()))?;
    Ok(chol.solve(&rhs))
}

/// Per-node localization radii `r_i = r0 exp(-(d_i - d_min) / (2 d_min))`,
/// `d_i = min(det M_i, c)`, `c = (d_max + d_min) / 2`.
pub fn localization_radii(m_ens: &MetricField, r0: f64) -> Result<Vec<f64>> {
    if !(r0 > 0.0) {
        return Err(Error::param("r0", "must be positive"));
    }
    let nodal = match m_ens.location() {
        Location::Node => m_ens.clone(),
        Location::Element => m_ens.to_nodes(),
    };
    let det = nodal.dets();
    let d_min = det.iter().copied().fold(f64::INFINITY, f64::min);
    let d_max = det.iter().copied().fold(0.0, f64::max);
    if !(d_min > 0.0) {
        return Err(Error::NotSpd(format!("metric determinant {d_min} is not positive")));
    }
    let c = 0.5 * (d_max + d_min);
    Ok(det
        .iter()
        .map(|&d| r0 * (-(d.min(c) - d_min) / (2.0 * d_min)).exp())
        .collect())
}

/// Bookkeeping from one local analysis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnalysisReport {
    /// Local analyses (node, or node and component when uncoupled) with no observation in reach.
    pub without_obs: usize,
    pub max_local_obs: usize,
}

/// LETKF analysis: each node (and, when uncoupled, each component) gets its own
/// weights from the observations within `radii[k]` (plus the observation support).
pub fn local_analysis(
    ens: &EnsembleState,
    obs: &ObservationSet,
    radii: &[f64],
    cfg: &AnalysisConfig,
    perturb_rng: Option<&mut ChaCha8Rng>,
) -> Result<(EnsembleState, AnalysisReport)> {
    cfg.validate()?;
    let mesh = ens.mesh().clone();
    let n = mesh.len();
    let ne = ens.len();
    let nc = ens.n_components();
    if radii.len() != n {
        return Err(Error::DimensionMismatch(format!("{} radii for {n} nodes", radii.len())));
    }
    if obs.is_empty() {
        let report = AnalysisReport {
            without_obs: match cfg.coupling {
                Coupling::Coupled => n,
                Coupling::Uncoupled => n * nc,
            },
            max_local_obs: 0,
        };
        return Ok((ens.clone(), report));
    }
    let (_, x) = forecast_stats(ens)?;
    let infl = cfg.rho.sqrt();
    let x = x * infl;

    let op = obs.operator_on(&mesh)?;
    let hx: Vec<Vec<f64>> = ens.members().iter().map(|m| op.apply(m)).collect();
    let ny = obs.len();
    let s = infl / ((ne - 1) as f64).sqrt();
    let y = DMatrix::from_fn(ny, ne, |j, i| {
        let mean = hx.iter().map(|h| h[j]).sum::<f64>() / ne as f64;
        (hx[i][j] - mean) * s
    });
    let mut d = DMatrix::from_fn(ny, ne, |j, i| obs.values[j] - hx[i][j]);
    if cfg.perturbed_obs {
        let rng = perturb_rng
            .ok_or_else(|| Error::param("perturbed_obs", "needs a random generator"))?;
        for i in 0..ne {
            for j in 0..ny {
                let z: f64 = rng.sample(StandardNormal);
                d[(j, i)] += obs.r_diag[j].sqrt() * z;
            }
        }
    }

    // observations sorted by location for window queries
    let mut order: Vec<usize> = (0..ny).collect();
    order.sort_by(|&a, &b| obs.entries[a].location.total_cmp(&obs.entries[b].location));
    let sorted_loc: Vec<f64> = order.iter().map(|&j| obs.entries[j].location).collect();
    let support = obs.kind.support_radius();

    let groups: Vec<Option<usize>> = match cfg.coupling {
        Coupling::Coupled => vec![None],
        Coupling::Uncoupled => (0..nc).map(Some).collect(),
    };

    let nodes = mesh.nodes();
    // (node, group) -> increments for the updated components, member-major
    let results: Vec<Result<(Vec<(usize, Vec<f64>)>, usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut updates = Vec::new();
            let mut empty = 0;
            let mut most = 0;
            let reach = radii[k] + support;
            let lo = sorted_loc.partition_point(|&l| l < nodes[k] - reach);
            let hi = sorted_loc.partition_point(|&l| l <= nodes[k] + reach);
            for g in &groups {
                let mut sel: Vec<usize> = order[lo..hi]
                    .iter()
                    .copied()
                    .filter(|&j| (nodes[k] - obs.entries[j].location).abs() <= reach)
                    .filter(|&j| g.is_none_or(|c| obs.entries[j].component == c))
                    .collect();
                sel.sort_unstable();
                if sel.is_empty() {
                    empty += 1;
                    continue;
                }
                most = most.max(sel.len());
                let yl = y.select_rows(sel.iter());
                let dl = d.select_rows(sel.iter());
                let rl: Vec<f64> = sel.iter().map(|&j| obs.r_diag[j]).collect();
                let w = etkf_weights_many(&yl, &rl, &dl)?;
                let comps: Vec<usize> = match g {
                    None => (0..nc).collect(),
                    Some(c) => vec![*c],
                };
                for c in comps {
                    let xr = x.row(c * n + k);
                    let inc: Vec<f64> = (0..ne).map(|i| xr.dot(&w.column(i).transpose())).collect();
                    updates.push((c, inc));
                }
            }
            Ok((updates, empty, most))
        })
        .collect();

    let mut comps: Vec<Vec<Vec<f64>>> = ens.members().iter().map(|m| m.components().to_vec()).collect();
    let mut report = AnalysisReport::default();
    for (k, r) in results.into_iter().enumerate() {
        let (updates, empty, most) = r?;
        report.without_obs += empty;
        report.max_local_obs = report.max_local_obs.max(most);
        for (c, inc) in updates {
            for (i, v) in inc.into_iter().enumerate() {
                comps[i][c][k] += v;
            }
        }
    }
    let members = comps
        .into_iter()
        .map(|c| StateField::new(mesh.clone(), c))
        .collect::<Result<Vec<_>>>()?;
    Ok((EnsembleState::new(members)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observations::{synthesize_observations, ObsEntry, ObsKind, ObservationSpec};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn random_ensemble(rng: &mut ChaCha8Rng, mesh: &Arc<Mesh1D>, ne: usize, nc: usize) -> EnsembleState {
        let members = (0..ne)
            .map(|_| StateField::from_fn(mesh.clone(), nc, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        EnsembleState::new(members).unwrap()
    }

    fn obs_set(entries: Vec<ObsEntry>, values: Vec<f64>, r: f64) -> ObservationSet {
        ObservationSet {
            time: 0.0,
            kind: ObsKind::Pointwise,
            r_diag: vec![r; entries.len()],
            entries,
            values,
            noise_seed: (0, 0),
        }
    }

    #[test]
    fn stats_hand_case() {
        let mesh = Arc::new(Mesh1D::uniform(0.0, 1.0, 1).unwrap());
        let m = |v: f64| StateField::new(mesh.clone(), vec![vec![v, v]]).unwrap();
        let ens = EnsembleState::new(vec![m(0.0), m(2.0)]).unwrap();
        let (mean, x) = forecast_stats(&ens).unwrap();
        assert_eq!(mean.component(0), &[1.0, 1.0]);
        assert_eq!(x[(0, 0)], -1.0);
        assert_eq!(x[(0, 1)], 1.0);
        assert_abs_diff_eq!((&x * x.transpose())[(0, 0)], 2.0);
        let same = EnsembleState::new(vec![m(3.0), m(3.0), m(3.0)]).unwrap();
        assert!(forecast_stats(&same).unwrap().1.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn perturbations_are_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mesh = Arc::new(Mesh1D::uniform(0.0, 1.0, 9).unwrap());
        let ens = random_ensemble(&mut rng, &mesh, 7, 2);
        let (_, x) = forecast_stats(&ens).unwrap();
        for r in 0..x.nrows() {
            assert!(x.row(r).sum().abs() < 1e-14);
        }
    }

    #[test]
    fn weight_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = DMatrix::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        let r = [0.3, 0.5, 0.1, 0.2];
        let d = [0.4, -0.2, 0.9, 0.1];
        let a = etkf_weights(&y, &r, &d).unwrap();
        let b = etkf_weights_obs_space(&y, &r, &d).unwrap();
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-10 * (1.0 + b[i].abs()));
        }
        assert!(etkf_weights(&y, &r, &[0.0; 4]).unwrap().iter().all(|&w| w == 0.0));
        assert!(etkf_weights(&DMatrix::zeros(4, 3), &r, &d).unwrap().iter().all(|&w| w == 0.0));
        assert!(etkf_weights(&y, &r[..3], &d).is_err());
    }

    #[test]
    fn radii_cases() {
        let mesh = Arc::new(Mesh1D::uniform(0.0, 1.0, 2).unwrap());
        let flat = MetricField::from_scalars(mesh.clone(), vec![4.0; 3]).unwrap();
        assert_eq!(localization_radii(&flat, 0.3).unwrap(), vec![0.3; 3]);
        // d_min = 1, d_max = 3 -> c = 2
        let m = MetricField::from_scalars(mesh, vec![1.0, 2.0, 3.0]).unwrap();
        let r = localization_radii(&m, 1.0).unwrap();
        assert_eq!(r[0], 1.0);
        assert_abs_diff_eq!(r[1], (-0.5f64).exp(), epsilon = 1e-15);
        assert_eq!(r[1], r[2]);
    }

    #[test]
    fn scalar_kalman_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mesh = Arc::new(Mesh1D::uniform(0.0, 1.0, 1).unwrap());
        let ens = random_ensemble(&mut rng, &mesh, 6, 1);
        let obs = obs_set(vec![ObsEntry { component: 0, location: 0.0 }], vec![0.7], 0.05);
        let cfg = AnalysisConfig {
            rho: 1.0,
            r0: 0.1,
            ..Default::default()
        };
        let (out, rep) = local_analysis(&ens, &obs, &[0.1, 0.1], &cfg, None).unwrap();
        assert_eq!(rep.without_obs, 1);
        let vals: Vec<f64> = ens.members().iter().map(|m| m.component(0)[0]).collect();
        let mean = vals.iter().sum::<f64>() / 6.0;
        let p = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0;
        for (i, m) in out.members().iter().enumerate() {
            let want = vals[i] + p / (p + 0.05) * (0.7 - vals[i]);
            assert_abs_diff_eq!(m.component(0)[0], want, epsilon = 1e-10);
            // node 1 has no observation in reach
            assert_eq!(m.component(0)[1], ens.members()[i].component(0)[1]);
        }
    }

    #[test]
    fn global_radius_matches_global_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mesh = Arc::new(Mesh1D::uniform(0.0, 1.0, 12).unwrap());
        let ens = random_ensemble(&mut rng, &mesh, 8, 2);
        let entries: Vec<ObsEntry> = (0..6)
            .map(|k| ObsEntry {
                component: k % 2,
                location: 0.05 + 0.15 * k as f64,
            })
            .collect();
        let values = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let obs = obs_set(entries, values, 0.2);
        let cfg = AnalysisConfig {
            rho: 1.1,
            ..Default::default()
        };
        let (out, _) = local_analysis(&ens, &obs, &vec![1e9; 13], &cfg, None).unwrap();
        // P-form oracle with explicit H
        let (_, x) = forecast_stats(&ens).unwrap();
        let p = &x * x.transpose() * 1.1;
        let op = obs.operator_on(&mesh).unwrap();
        let nrow = 26;
        let h = DMatrix::from_fn(6, nrow, |j, r| {
            let mut e = StateField::zeros(mesh.clone(), 2);
            e.component_mut(r / 13)[r % 13] = 1.0;
            op.apply(&e)[j]
        });
        let mut s = &h * &p * h.transpose();
        for j in 0..6 {
            s[(j, j)] += 0.2;
        }
        let k = &p * h.transpose() * s.try_inverse().unwrap();
        for (i, m) in ens.members().iter().enumerate() {
            let u = DVector::from_iterator(nrow, m.components().iter().flatten().copied());
            let d = DVector::from_vec(obs.values.clone()) - &h * &u;
            let ua = &u + &k * d;
            let got: Vec<f64> = out.members()[i].components().iter().flatten().copied().collect();
            for r in 0..nrow {
                assert!((got[r] - ua[r]).abs() < 1e-8, "member {i} row {r}");
            }
        }
    }

    #[test]
    fn huge_r_leaves_forecast() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mesh = Arc::new(Mesh1D::uniform(0.0, 1.0, 20).unwrap());
        let ens = random_ensemble(&mut rng, &mesh, 10, 1);
        let truth = StateField::from_fn(mesh.clone(), 1, |_, x| x);
        let spec = ObservationSpec {
            kind: ObsKind::Pointwise,
            base: vec![(0..10).map(|k| 0.05 + 0.1 * k as f64).collect()],
            motion: None,
            r_var: 0.01,
        };
        let mut obs = synthesize_observations(&truth, &spec, 0.0, &mut rng).unwrap();
        for r in obs.r_diag.iter_mut() {
            *r *= 1e12;
        }
        let (out, _) = local_analysis(&ens, &obs, &vec![0.2; 21], &AnalysisConfig::default(), None).unwrap();
        for (a, b) in out.members().iter().zip(ens.members()) {
            let norm = b.component(0).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (p, q) in a.component(0).iter().zip(b.component(0)) {
                assert!((p - q).abs() <= 1e-6 * norm);
            }
        }
    }

    #[test]
    fn zero_innovation_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mesh = Arc::new(Mesh1D::uniform(0.0, 1.0, 15).unwrap());
        let ens = random_ensemble(&mut rng, &mesh, 5, 1);
        // observations equal to member 0's own image give it a zero innovation
        let entries: Vec<ObsEntry> = (0..5).map(|k| ObsEntry { component: 0, location: 0.1 + 0.2 * k as f64 }).collect();
        let op = crate::observations::LinearObsOperator::new(&ObsKind::Pointwise, &entries, &mesh).unwrap();
        let hm = op.apply(&ens.members()[0]);
        let same = obs_set(entries.clone(), hm.clone(), 0.1);
        let cfg = AnalysisConfig::default();
        let radii = vec![0.25; 16];
        let (out, _) = local_analysis(&ens, &same, &radii, &cfg, None).unwrap();
        assert_eq!(out.members()[0].component(0), ens.members()[0].component(0));
        let shift: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y1: Vec<f64> = hm.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let y2: Vec<f64> = hm.iter().zip(&shift).map(|(a, b)| a + 2.0 * b).collect();
        let (o1, _) = local_analysis(&ens, &obs_set(entries.clone(), y1, 0.1), &radii, &cfg, None).unwrap();
        let (o2, _) = local_analysis(&ens, &obs_set(entries, y2, 0.1), &radii, &cfg, None).unwrap();
        let base = ens.members()[0].component(0);
        for j in 0..16 {
            let d1 = o1.members()[0].component(0)[j] - base[j];
            let d2 = o2.members()[0].component(0)[j] - base[j];
            assert!((d2 - 2.0 * d1).abs() < 1e-12);
        }
    }

    #[test]
    fn coupled_equals_uncoupled_without_cross_covariance() {
        let mesh = Arc::new(Mesh1D::uniform(0.0, 1.0, 10).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pu = [1.0, 1.0, -1.0, -1.0];
        let pv = [1.0, -1.0, 1.0, -1.0];
        let au: Vec<f64> = (0..11).map(|_| rng.random_range(0.1..1.0)).collect();
        let av: Vec<f64> = (0..11).map(|_| rng.random_range(0.1..1.0)).collect();
        let members = (0..4)
            .map(|i| {
                StateField::new(
                    mesh.clone(),
                    vec![
                        au.iter().map(|a| 2.0 + pu[i] * a).collect(),
                        av.iter().map(|a| -1.0 + pv[i] * a).collect(),
                    ],
                )
                .unwrap()
            })
            .collect();
        let ens = EnsembleState::new(members).unwrap();
        let entries: Vec<ObsEntry> = (0..8)
            .map(|k| ObsEntry { component: k % 2, location: 0.06 + 0.12 * k as f64 })
            .collect();
        let values = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        let obs = obs_set(entries, values, 0.3);
        let radii = vec![0.3; 11];
        let c = AnalysisConfig { coupling: Coupling::Coupled, ..Default::default() };
        let u = AnalysisConfig { coupling: Coupling::Uncoupled, ..Default::default() };
        let (a, _) = local_analysis(&ens, &obs, &radii, &c, None).unwrap();
        let (b, _) = local_analysis(&ens, &obs, &radii, &u, None).unwrap();
        for (p, q) in a.members().iter().zip(b.members()) {
            for (x, y) in p.components().iter().flatten().zip(q.components().iter().flatten()) {
                assert!((x - y).abs() < 1e-10, "{x} {y}");
            }
        }
    }

    #[test]
    fn member_permutation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mesh = Arc::new(Mesh1D::uniform(0.0, 1.0, 10).unwrap());
        let ens = random_ensemble(&mut rng, &mesh, 6, 1);
        let entries: Vec<ObsEntry> = (0..4).map(|k| ObsEntry { component: 0, location: 0.2 * k as f64 + 0.1 }).collect();
        let obs = obs_set(entries, vec![0.3, -0.2, 0.5, 0.0], 0.1);
        let radii = vec![0.25; 11];
        let cfg = AnalysisConfig::default();
        let (a, _) = local_analysis(&ens, &obs, &radii, &cfg, None).unwrap();
        let perm = [3, 0, 5, 1, 4, 2];
        let shuffled = EnsembleState::new(perm.iter().map(|&i| ens.members()[i].clone()).collect()).unwrap();
        let (b, _) = local_analysis(&shuffled, &obs, &radii, &cfg, None).unwrap();
        for (pos, &i) in perm.iter().enumerate() {
            for (x, y) in b.members()[pos].component(0).iter().zip(a.members()[i].component(0)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn far_observation_has_no_effect() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mesh = Arc::new(Mesh1D::uniform(0.0, 1.0, 40).unwrap());
        let ens = random_ensemble(&mut rng, &mesh, 5, 1);
        let entries: Vec<ObsEntry> = [0.1, 0.15, 0.9].iter().map(|&l| ObsEntry { component: 0, location: l }).collect();
        let radii = vec![0.1; 41];
        let cfg = AnalysisConfig::default();
        let (a, _) = local_analysis(&ens, &obs_set(entries.clone(), vec![0.1, 0.2, 0.3], 0.1), &radii, &cfg, None).unwrap();
        let (b, _) = local_analysis(&ens, &obs_set(entries, vec![0.1, 0.2, 9.0], 0.1), &radii, &cfg, None).unwrap();
        for j in 0..=30 {
            for i in 0..5 {
                assert_eq!(a.members()[i].component(0)[j], b.members()[i].component(0)[j]);
            }
        }
    }

    #[test]
    fn perturbed_obs_needs_rng() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mesh = Arc::new(Mesh1D::uniform(0.0, 1.0, 4).unwrap());
        let ens = random_ensemble(&mut rng, &mesh, 3, 1);
        let obs = obs_set(vec![ObsEntry { component: 0, location: 0.5 }], vec![0.0], 0.1);
        let cfg = AnalysisConfig { perturbed_obs: true, ..Default::default() };
        assert!(local_analysis(&ens, &obs, &[0.3; 5], &cfg, None).is_err());
        assert!(local_analysis(&ens, &obs, &[0.3; 5], &cfg, Some(&mut rng)).is_ok());
    }
}

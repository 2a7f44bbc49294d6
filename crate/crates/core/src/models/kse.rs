//! Two coupled Kuramoto-Sivashinsky equations on the rescaled interval `[0, 1]`:
//!
//! ```text
//! u_t + u u_x + u_xx + mu1 u_xxxx      = c1 (v - u)   on (0, L1)
//! v_t + v v_x + v_xx + mu2(x,t) v_xxxx = c2 (u - v)   on (0, L2)
//! ```
//!
//! with `u = v = u_xx = v_xx = 0` at both ends.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mesh::StateField;
use crate::models::banded::BandMatrix;
use crate::models::fd::{FdStencils, Order};
use crate::models::stepping::TimeStepping;
use crate::models::Model;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KseParams {
    pub l1: f64,
    pub l2: f64,
    pub mu1: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub omega: f64,
    pub c1: f64,
    pub c2: f64,
    /// Use the constant `mu2 = mu_min` instead of the moving viscosity band.
    pub mu2_literal: bool,
}

impl Default for KseParams {
    fn default() -> Self {
        Self {
            l1: 1.5 * PI,
            l2: 4.0 * PI,
            mu1: 2.5e-3,
            mu_min: 2.5e-3,
            mu_max: 5e-2,
            omega: 0.2,
            c1: 0.1,
            c2: 0.1,
            mu2_literal: false,
        }
    }
}

impl KseParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("l1", self.l1),
            ("l2", self.l2),
            ("mu1", self.mu1),
            ("mu_min", self.mu_min),
            ("mu_max", self.mu_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be positive"));
            }
        }
        if self.mu_min > self.mu_max {
            return Err(Error::param("mu_min", "must not exceed mu_max"));
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
            return Err(Error::param("c1/c2", "couplings must be nonnegative"));
        }
        if !self.omega.is_finite() {
            return Err(Error::param("omega", "must be finite"));
        }
        Ok(())
    }

    fn length(&self, c: usize) -> f64 {
        if c == 0 {
            self.l1
        } else {
            self.l2
        }
    }

    fn coupling(&self, c: usize) -> f64 {
        if c == 0 {
            self.c1
        } else {
            self.c2
        }
    }
}

/// Viscosity of the second component, `mu_min + (mu_max - mu_min)(1 - |sin z|)^2`
/// with `z = pi (x + omega sin(2 pi t))`.
pub fn mu2(x: f64, t: f64, p: &KseParams) -> f64 {
    if p.mu2_literal {
        return p.mu_min;
    }
    let z = PI * (x + p.omega * (2.0 * PI * t).sin());
    let s = 1.0 - z.sin().abs();
    p.mu_min + (p.mu_max - p.mu_min) * s * s
}

/// One linearly implicit backward Euler step of the coupled system.
///
/// Unknowns are interleaved `(u_0, v_0, u_1, v_1, ...)` so the coupled
/// pentadiagonal blocks form one band matrix with four sub- and super-diagonals.
pub fn kse_step(state: &StateField, dt: f64, p: &KseParams, t: f64) -> Result<StateField> {
    let mesh = state.mesh();
    let st = FdStencils::new(mesh)?;
    kse_step_with(state, dt, p, t, &st)
}

pub(crate) fn kse_step_with(
    state: &StateField,
    dt: f64,
    p: &KseParams,
    t: f64,
    st: &FdStencils,
) -> Result<StateField> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    if state.n_components() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "KSE state needs 2 components, got {}",
            state.n_components()
        )));
    }
    let mesh = state.mesh();
    let n = mesh.len();
    if n < 5 {
        return Err(Error::InvalidMesh(format!("KSE needs at least 5 nodes, got {n}")));
    }
    let x = mesh.nodes();
    let mut a = BandMatrix::zeros(2 * n, 4, 4);
    let mut rhs = vec![0.0; 2 * n];
    let dx: Vec<Vec<f64>> = (0..2).map(|c| st.apply(Order::First, state.component(c))).collect();
    for c in 0..2 {
        let un = state.component(c);
        let l = p.length(c);
        let cc = p.coupling(c);
        let other = 1 - c;
        a.add(c, c, 1.0);
        a.add(2 * (n - 1) + c, 2 * (n - 1) + c, 1.0);
        for j in 1..n - 1 {
            let row = 2 * j + c;
            let mu = if c == 0 { p.mu1 } else { mu2(x[j], t + dt, p) };
            a.add(row, row, 1.0 + dt * (dx[c][j] / l + cc));
            a.add(row, 2 * j + other, -dt * cc);
            for &(k, w) in &st.first[j] {
                a.add(row, 2 * k + c, dt / l * un[j] * w);
            }
            for &(k, w) in &st.second[j] {
                a.add(row, 2 * k + c, dt / (l * l) * w);
            }
            let s4 = dt * mu / l.powi(4);
            for &(k, w) in &st.fourth[j] {
                a.add(row, 2 * k + c, s4 * w);
            }
            rhs[row] = un[j] + dt / l * un[j] * dx[c][j];
        }
    }
    let sol = a.solve(&rhs).map_err(|e| {
        Error::SingularSystem(format!(
            "KSE step t={t} dt={dt} on {n} nodes (min width {:e}): {e}",
            mesh.min_width()
        ))
    })?;
    let u = sol.iter().step_by(2).copied().collect();
    let v = sol.iter().skip(1).step_by(2).copied().collect();
    StateField::new(mesh.clone(), vec![u, v])
}

/// Spatial right-hand side `F` of `u_t = F(u)` in rescaled coordinates, at time `t`.
pub fn kse_rhs(state: &StateField, p: &KseParams, t: f64) -> Result<[Vec<f64>; 2]> {
    let mesh = state.mesh();
    let st = FdStencils::new(mesh)?;
    let x = mesh.nodes();
    let n = mesh.len();
    let mut out = [vec![0.0; n], vec![0.0; n]];
    for c in 0..2 {
        let u = state.component(c);
        let w = state.component(1 - c);
        let l = p.length(c);
        let d1 = st.apply(Order::First, u);
        let d2 = st.apply(Order::Second, u);
        let d4 = st.apply(Order::Fourth, u);
        for j in 1..n - 1 {
            let mu = if c == 0 { p.mu1 } else { mu2(x[j], t, p) };
            out[c][j] = -(u[j] * d1[j] / l + d2[j] / (l * l) + mu * d4[j] / l.powi(4))
                + p.coupling(c) * (w[j] - u[j]);
        }
    }
    Ok(out)
}

/// Smooth initial state `sum_k a_k sin(k pi x)` per component, vanishing with its
/// second derivative at both ends.
pub fn kse_initial(mesh: std::sync::Arc<crate::mesh::Mesh1D>, amplitude: f64) -> StateField {
    StateField::from_fn(mesh, 2, |c, x| {
        let phase = 0.3 * c as f64;
        amplitude
            * ((PI * x).sin()
                + 0.5 * (3.0 * PI * x + phase).sin() * (PI * x).sin()
                + 0.25 * (7.0 * PI * x).sin())
    })
}

#[derive(Debug, Clone)]
pub struct KseModel {
    pub params: KseParams,
    pub dt: f64,
}

impl Model for KseModel {
    fn name(&self) -> &'static str {
        "kse"
    }

    fn n_components(&self) -> usize {
        2
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn step(&self, u: &StateField, t: f64, dt: f64) -> Result<StateField> {
        kse_step(u, dt, &self.params, t)
    }

    fn time_stepping(&self) -> TimeStepping {
        TimeStepping::Fixed { dt: self.dt }
    }

    fn apply_boundary(&self, u: &mut StateField, _t: f64) {
        for c in 0..2 {
            let comp = u.component_mut(c);
            let n = comp.len();
            comp[0] = 0.0;
            comp[n - 1] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh1D;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn mu2_range() {
        let p = KseParams::default();
        // sin z = 1 at x = 1/2, t = 0
        assert_abs_diff_eq!(mu2(0.5, 0.0, &p), 2.5e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(mu2(0.0, 0.0, &p), 5e-2, epsilon = 1e-15);
        for i in 0..200 {
            let m = mu2(i as f64 / 199.0, i as f64 * 0.013, &p);
            assert!((p.mu_min..=p.mu_max).contains(&m));
        }
        let lit = KseParams {
            mu2_literal: true,
            ..p
        };
        assert_eq!(mu2(0.0, 0.0, &lit), lit.mu_min);
    }

    #[test]
    fn zero_stays_zero() {
        let mesh = Arc::new(Mesh1D::uniform(0.0, 1.0, 40).unwrap());
        let s = StateField::zeros(mesh, 2);
        let out = kse_step(&s, 1e-3, &KseParams::default(), 0.0).unwrap();
        assert!(out.components().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn uncoupled_components_are_independent() {
        let mesh = Arc::new(Mesh1D::uniform(0.0, 1.0, 60).unwrap());
        let p = KseParams {
            c1: 0.0,
            c2: 0.0,
            ..Default::default()
        };
        let a = kse_initial(mesh.clone(), 1.0);
        let mut b = a.clone();
        for v in b.component_mut(1).iter_mut() {
            *v *= -3.0;
        }
        let sa = kse_step(&a, 1e-4, &p, 0.0).unwrap();
        let sb = kse_step(&b, 1e-4, &p, 0.0).unwrap();
        assert_eq!(sa.component(0), sb.component(0));
    }

    #[test]
    fn matches_dense_oracle() {
        // dense assembly of the same linear system from the textbook uniform stencils
        let n = 31;
        let mesh = Arc::new(Mesh1D::uniform(0.0, 1.0, n - 1).unwrap());
        let h = 1.0 / (n - 1) as f64;
        let p = KseParams::default();
        let s = kse_initial(mesh.clone(), 2.0);
        let dt = 1e-4;
        let t = 0.01;
        let got = kse_step(&s, dt, &p, t).unwrap();
        let mut a = DMatrix::<f64>::zeros(2 * n, 2 * n);
        let mut b = DVector::<f64>::zeros(2 * n);
        for c in 0..2 {
            let un = s.component(c);
            let l = if c == 0 { p.l1 } else { p.l2 };
            let cc = if c == 0 { p.c1 } else { p.c2 };
            let idx = |j: isize| -> Vec<(usize, f64)> {
                // odd reflection about both ends folds ghosts into -u_mirror
                let m = (n - 1) as isize;
                if j < 0 {
                    vec![((-j) as usize, -1.0)]
                } else if j > m {
                    vec![((2 * m - j) as usize, -1.0)]
                } else {
                    vec![(j as usize, 1.0)]
                }
            };
            a[(c, c)] = 1.0;
            a[(2 * (n - 1) + c, 2 * (n - 1) + c)] = 1.0;
            for j in 1..n - 1 {
                let r = 2 * j + c;
                let ji = j as isize;
                let ux = (un[j] - un[j - 1]) / h;
                let mu = if c == 0 { p.mu1 } else { mu2(j as f64 * h, t + dt, &p) };
                a[(r, r)] += 1.0 + dt * (ux / l + cc);
                a[(r, 2 * j + 1 - c)] -= dt * cc;
                a[(r, 2 * j + c)] += dt / l * un[j] / h;
                a[(r, 2 * (j - 1) + c)] -= dt / l * un[j] / h;
                for (off, w) in [(-1isize, 1.0), (0, -2.0), (1, 1.0)] {
                    for (k, sgn) in idx(ji + off) {
                        a[(r, 2 * k + c)] += dt / (l * l) * w * sgn / (h * h);
                    }
                }
                for (off, w) in [(-2isize, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)] {
                    for (k, sgn) in idx(ji + off) {
                        a[(r, 2 * k + c)] += dt * mu / l.powi(4) * w * sgn / h.powi(4);
                    }
                }
                b[r] = un[j] + dt / l * un[j] * ux;
            }
        }
        let x = a.lu().solve(&b).unwrap();
        for j in 0..n {
            for c in 0..2 {
                let want = x[2 * j + c];
                assert!(
                    (got.component(c)[j] - want).abs() <= 1e-9 * (1.0 + want.abs()),
                    "j={j} c={c} {} vs {want}",
                    got.component(c)[j]
                );
            }
        }
    }

    #[test]
    fn small_dt_recovers_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = vec![0.0];
        for _ in 0..80 {
            x.push(x.last().unwrap() + rng.random_range(0.5..1.5));
        }
        let last = *x.last().unwrap();
        let mesh = Arc::new(Mesh1D::new(x.iter().map(|v| v / last).collect()).unwrap());
        let p = KseParams::default();
        let s = kse_initial(mesh, 3.0);
        let f = kse_rhs(&s, &p, 0.0).unwrap();
        let err = |dt: f64| {
            let next = kse_step(&s, dt, &p, 0.0).unwrap();
            (0..2)
                .flat_map(|c| {
                    let (nx, s0, f) = (next.component(c), s.component(c), &f[c]);
                    (0..nx.len()).map(move |j| ((nx[j] - s0[j]) / dt - f[j]).abs())
                })
                .fold(0.0f64, f64::max)
        };
        let (e1, e2, e3) = (err(1e-7), err(5e-8), err(2.5e-8));
        let (r1, r2) = (e1 / e2, e2 / e3);
        assert!(r1 > 1.8 && r1 < 2.2, "{e1} {e2} {r1}");
        assert!(r2 > 1.8 && r2 < 2.2, "{e2} {e3} {r2}");
    }
}

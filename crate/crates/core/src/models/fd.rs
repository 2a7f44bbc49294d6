//! Nonuniform finite differences.
//!
//! All three stencils are built from the backward difference
//! `D_j = (u_j - u_{j-1}) / (x_j - x_{j-1})`: the second difference nests it once,
//! the fourth difference twice. Boundary rows use ghost nodes mirrored about each
//! end point with odd-reflected values `u(x_0 - s) = 2 u_0 - u(x_0 + s)`, which
//! makes the second difference vanish at both boundaries.

use crate::error::{Error, Result};
use crate::mesh::Mesh1D;

/// Backward first difference on `[x0, x1]`.
#[inline]
pub fn backward_difference(u0: f64, u1: f64, x0: f64, x1: f64) -> f64 {
    (u1 - u0) / (x1 - x0)
}

/// Nested second difference at the middle of three nodes.
#[inline]
pub fn second_difference(um: f64, u: f64, up: f64, xm: f64, x: f64, xp: f64) -> f64 {
    2.0 / (xp - xm) * ((up - u) / (xp - x) - (u - um) / (x - xm))
}

/// Sparse stencil row: `(node, coefficient)` pairs.
pub type Row = Vec<(usize, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
    Fourth,
}

impl Order {
    pub fn from_int(order: u32) -> Result<Self> {
        match order {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            4 => Ok(Order::Fourth),
            _ => Err(Error::param("order", format!("{order} is not one of 1, 2, 4"))),
        }
    }
}

/// Stencil coefficient tables for every node of a mesh.
#[derive(Debug, Clone)]
pub struct FdStencils {
    pub first: Vec<Row>,
    pub second: Vec<Row>,
    pub fourth: Vec<Row>,
}

/// Coordinates extended by two mirrored ghost nodes on each side.
struct Extended<'a> {
    x: &'a [f64],
}

impl Extended<'_> {
    const PAD: i64 = 2;

    fn n(&self) -> i64 {
        self.x.len() as i64
    }

    /// Coordinate of extended node `i` (`i` may be -2..n+1).
    fn coord(&self, i: i64) -> f64 {
        let n = self.n();
        if i < 0 {
            2.0 * self.x[0] - self.x[(-i) as usize]
        } else if i >= n {
            2.0 * self.x[(n - 1) as usize] - self.x[(2 * (n - 1) - i) as usize]
        } else {
            self.x[i as usize]
        }
    }

    /// Adds `c * u_i` to a row, folding ghost values `2 u_b - u_mirror` into real nodes.
    fn push(&self, row: &mut Vec<(usize, f64)>, i: i64, c: f64) {
        let n = self.n();
        if i < 0 {
            add(row, 0, 2.0 * c);
            add(row, (-i) as usize, -c);
        } else if i >= n {
            add(row, (n - 1) as usize, 2.0 * c);
            add(row, (2 * (n - 1) - i) as usize, -c);
        } else {
            add(row, i as usize, c);
        }
    }

    fn h(&self, i: i64) -> f64 {
        self.coord(i) - self.coord(i - 1)
    }

    /// `c * D_i`.
    fn push_d(&self, row: &mut Vec<(usize, f64)>, i: i64, c: f64) {
        let h = self.h(i);
        self.push(row, i, c / h);
        self.push(row, i - 1, -c / h);
    }
}

fn add(row: &mut Vec<(usize, f64)>, j: usize, c: f64) {
    if let Some(e) = row.iter_mut().find(|(k, _)| *k == j) {
        e.1 += c;
    } else {
        row.push((j, c));
    }
}

fn finish(mut row: Row) -> Row {
    row.sort_by_key(|e| e.0);
    row
}

impl FdStencils {
    pub fn new(mesh: &Mesh1D) -> Result<Self> {
        if mesh.len() < 3 {
            return Err(Error::InvalidMesh(format!(
                "finite-difference stencils need at least 3 nodes, got {}",
                mesh.len()
            )));
        }
        let ext = Extended { x: mesh.nodes() };
        debug_assert_eq!(Extended::PAD, 2);
        let n = ext.n();
        let mut first = Vec::with_capacity(n as usize);
        let mut second = Vec::with_capacity(n as usize);
        let mut fourth = Vec::with_capacity(n as usize);
        for j in 0..n {
            let mut r1 = Vec::with_capacity(2);
            ext.push_d(&mut r1, j, 1.0);
            first.push(finish(r1));

            let p = 2.0 / (ext.coord(j + 1) - ext.coord(j - 1));
            let mut r2 = Vec::with_capacity(3);
            ext.push_d(&mut r2, j + 1, p);
            ext.push_d(&mut r2, j, -p);
            second.push(finish(r2));

            let mut r4 = Vec::with_capacity(5);
            let (hj, hj1) = (ext.h(j), ext.h(j + 1));
            let span_c = ext.coord(j + 1) - ext.coord(j - 1);
            let span_r = ext.coord(j + 2) - ext.coord(j);
            let span_l = ext.coord(j) - ext.coord(j - 2);
            let t1 = p * 2.0 / (span_r * hj1);
            let t2 = -p * 2.0 / (span_c * hj1);
            let t3 = -p * 2.0 / (span_c * hj);
            let t4 = p * 2.0 / (span_l * hj);
            ext.push_d(&mut r4, j + 2, t1);
            ext.push_d(&mut r4, j + 1, -t1);
            ext.push_d(&mut r4, j + 1, t2 + t3);
            ext.push_d(&mut r4, j, -(t2 + t3));
            ext.push_d(&mut r4, j, t4);
            ext.push_d(&mut r4, j - 1, -t4);
            fourth.push(finish(r4));
        }
        Ok(Self {
            first,
            second,
            fourth,
        })
    }

    pub fn rows(&self, order: Order) -> &[Row] {
        match order {
            Order::First => &self.first,
            Order::Second => &self.second,
            Order::Fourth => &self.fourth,
        }
    }

    pub fn apply(&self, order: Order, u: &[f64]) -> Vec<f64> {
        self.rows(order)
            .iter()
            .map(|row| row.iter().map(|&(k, c)| c * u[k]).sum())
            .collect()
    }
}

/// Applies the first, second or fourth derivative stencil.
pub fn fd_apply(u: &[f64], mesh: &Mesh1D, order: u32) -> Result<Vec<f64>> {
    let order = Order::from_int(order)?;
    if u.len() != mesh.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values on {} nodes",
            u.len(),
            mesh.len()
        )));
    }
    if order == Order::Fourth && mesh.len() < 5 {
        return Err(Error::InvalidMesh(format!(
            "fourth derivative needs at least 5 nodes, got {}",
            mesh.len()
        )));
    }
    Ok(FdStencils::new(mesh)?.apply(order, u))
}

//! Banded LU with partial pivoting (the `gbtrf`/`gbtrs` storage scheme).

use crate::error::{Error, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Each row keeps `kl` extra super-diagonal slots for the fill-in created by
/// row interchanges.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        if off < 0 || off as usize >= self.width || j >= self.n {
            None
        } else {
            Some(i * self.width + off as usize)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` to entry `(i, j)`; panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let off = j as isize - i as isize;
        assert!(
            off >= -(self.kl as isize) && off <= self.ku as isize,
            "entry ({i},{j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j).expect("entry inside band");
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry inside band");
        self.data[s] = v;
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku + self.kl).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Solves `A x = b` in place of a copy of `A`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut lu = self.clone();
        let piv = lu.factorize()?;
        let mut x = b.to_vec();
        lu.substitute(&piv, &mut x);
        Ok(x)
    }

    fn factorize(&mut self) -> Result<Vec<usize>> {
        let n = self.n;
        let reach = self.ku + self.kl;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut piv = vec![0; n];
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in (k + 1)..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > f64::EPSILON * scale * n as f64) {
                return Err(Error::SingularSystem(format!(
                    "zero pivot in column {k} of {n} (|pivot| = {best:e})"
                )));
            }
            piv[k] = p;
            let jmax = (k + reach).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.get(k, j);
                    let b = self.get(p, j);
                    self.set(k, j, b);
                    self.set(p, j, a);
                }
            }
            let pivot = self.get(k, k);
            for i in (k + 1)..=last {
                let f = self.get(i, k) / pivot;
                if f == 0.0 {
                    continue;
                }
                self.set(i, k, f);
                for j in (k + 1)..=jmax {
                    let v = self.get(i, j) - f * self.get(k, j);
                    self.set(i, j, v);
                }
            }
        }
        Ok(piv)
    }

    fn substitute(&self, piv: &[usize], x: &mut [f64]) {
        let n = self.n;
        let reach = self.ku + self.kl;
        for k in 0..n {
            x.swap(k, piv[k]);
            let last = (k + self.kl).min(n - 1);
            for i in (k + 1)..=last {
                x[i] -= self.get(i, k) * x[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + reach).min(n - 1);
            let mut s = x[k];
            for j in (k + 1)..=jmax {
                s -= self.get(k, j) * x[j];
            }
            x[k] = s / self.get(k, k);
        }
    }
}

//! Small dense matrix helpers for the per-arm ridge state. Dimensions stay
//! tiny (d <= a few dozen), so plain row-major storage and Gauss-Jordan
//! inversion are plenty.

use serde::{Deserialize, Serialize};

/// Row-major square matrix of f64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    d: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            data: vec![0.0; d * d],
        }
    }

    /// scale * identity.
    pub fn scaled_identity(d: usize, scale: f64) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.data[i * d + i] = scale;
        }
        m
    }

    pub fn from_rows(d: usize, data: Vec<f64>) -> Option<Self> {
        if data.len() == d * d {
            Some(Self { d, data })
        } else {
            None
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.d + j] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.d);
        let mut out = vec![0.0; self.d];
        for i in 0..self.d {
            let row = &self.data[i * self.d..(i + 1) * self.d];
            out[i] = dot(row, x);
        }
        out
    }

    /// x' M x.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(&self.matvec(x), x)
    }

    /// M += x x'.
    pub fn add_outer(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.d);
        for i in 0..self.d {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let row = &mut self.data[i * self.d..(i + 1) * self.d];
            for (cell, &xj) in row.iter_mut().zip(x) {
                *cell += xi * xj;
            }
        }
    }

    /// Rank-one downdate of a cached inverse after `A += x x'`
    /// (Sherman-Morrison): `inv -= (inv x)(inv x)' / (1 + x' inv x)`.
    /// Assumes `self` is symmetric, which the update preserves.
    pub fn sherman_morrison_update(&mut self, x: &[f64]) {
        let u = self.matvec(x);
        let denom = 1.0 + dot(x, &u);
        for i in 0..self.d {
            let ui = u[i];
            if ui == 0.0 {
                continue;
            }
            let row = &mut self.data[i * self.d..(i + 1) * self.d];
            for (cell, &uj) in row.iter_mut().zip(&u) {
                *cell -= ui * uj / denom;
            }
        }
    }

    /// Dense inverse via Gauss-Jordan with partial pivoting. Returns `None`
    /// for (numerically) singular input.
    pub fn inverse(&self) -> Option<Mat> {
        let n = self.d;
        let mut aug = vec![0.0; n * 2 * n];
        let w = 2 * n;
        for i in 0..n {
            for j in 0..n {
                aug[i * w + j] = self.get(i, j);
            }
            aug[i * w + n + i] = 1.0;
        }
        for col in 0..n {
            let mut pivot = col;
            let mut best = aug[col * w + col].abs();
            for r in (col + 1)..n {
                let v = aug[r * w + col].abs();
                if v > best {
                    best = v;
                    pivot = r;
                }
            }
            if best < 1e-300 {
                return None;
            }
            if pivot != col {
                for c in 0..w {
                    aug.swap(col * w + c, pivot * w + c);
                }
            }
            let div = aug[col * w + col];
            for c in 0..w {
                aug[col * w + c] /= div;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = aug[r * w + col];
                if f == 0.0 {
                    continue;
                }
                for c in 0..w {
                    aug[r * w + c] -= f * aug[col * w + c];
                }
            }
        }
        let mut inv = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                inv.set(i, j, aug[i * w + n + j]);
            }
        }
        Some(inv)
    }

    /// Max absolute entry of `self * other - I`.
    pub fn identity_residual(&self, other: &Mat) -> f64 {
        let n = self.d;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.get(i, k) * other.get(k, j);
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_scaled_identity() {
        let m = Mat::scaled_identity(3, 0.01);
        let inv = m.inverse().unwrap();
        for i in 0..3 {
            assert!((inv.get(i, i) - 100.0).abs() < 1e-9);
        }
        assert!(m.identity_residual(&inv) < 1e-12);
    }

    #[test]
    fn sherman_morrison_matches_dense_inverse() {
        let d = 4;
        let mut a = Mat::scaled_identity(d, 0.5);
        let mut inv = a.inverse().unwrap();
        let xs = [
            vec![1.0, 0.2, -0.3, 0.7],
            vec![0.0, 1.0, 0.0, -1.0],
            vec![0.4, 0.4, 0.4, 0.4],
        ];
        for x in &xs {
            a.add_outer(x);
            inv.sherman_morrison_update(x);
            let dense = a.inverse().unwrap();
            for i in 0..d {
                for j in 0..d {
                    assert!((inv.get(i, j) - dense.get(i, j)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let m = Mat::zeros(2);
        assert!(m.inverse().is_none());
    }
}

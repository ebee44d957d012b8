//! Symmetric banded storage (lower band only).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric matrix with `bandwidth` sub-diagonals stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bandwidth: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        BandedSym {
            n,
            bandwidth,
            data: vec![0.0; n * (bandwidth + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.bandwidth || r >= self.n {
            None
        } else {
            Some(r * (self.bandwidth + 1) + (r - c))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` to entry `(i, j)` and, implicitly, to `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) lies outside the band"));
        self.data[s] += v;
    }

    /// `self += alpha * other`; both must share shape.
    pub fn axpy(&mut self, alpha: f64, other: &BandedSym) {
        assert_eq!(self.n, other.n);
        assert_eq!(self.bandwidth, other.bandwidth);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> BandedSym {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bandwidth);
            for j in j0..=i {
                let v = self.data[i * (self.bandwidth + 1) + (i - j)];
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mat_vec(x).iter().zip(y).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bandwidth);
            for j in j0..=i {
                let v = self.data[i * (self.bandwidth + 1) + (i - j)];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Principal submatrix on the contiguous index range `[lo, hi)`.
    pub fn principal(&self, lo: usize, hi: usize) -> BandedSym {
        assert!(lo <= hi && hi <= self.n);
        let mut out = BandedSym::zeros(hi - lo, self.bandwidth);
        for i in lo..hi {
            for j in i.saturating_sub(self.bandwidth).max(lo)..=i {
                out.add(i - lo, j - lo, self.get(i, j));
            }
        }
        out
    }

    /// Max absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Solves `A x = b` by banded Cholesky; fails if `A` is not positive definite.
    pub fn solve_spd(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let bw = self.bandwidth;
        let w = bw + 1;
        let mut l = self.data.clone();
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = l[i * w + (i - j)];
                let k0 = i.saturating_sub(bw).max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::Numerical(format!(
                            "banded Cholesky breakdown at pivot {i} (value {s:e})"
                        )));
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + (i - j)] = s / l[j * w];
                }
            }
        }
        let mut y = b.to_vec();
        for i in 0..n {
            let k0 = i.saturating_sub(bw);
            let mut s = y[i];
            for k in k0..i {
                s -= l[i * w + (i - k)] * y[k];
            }
            y[i] = s / l[i * w];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for r in (i + 1)..(i + 1 + bw).min(n) {
                s -= l[r * w + (r - i)] * y[r];
            }
            y[i] = s / l[i * w];
        }
        Ok(y)
    }
}

impl From<&BandedSym> for DVector<f64> {
    fn from(b: &BandedSym) -> Self {
        DVector::from_iterator(b.n, (0..b.n).map(|i| b.get(i, i)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_spd(n: usize, bw: usize, seed: u64) -> BandedSym {
        let mut m = BandedSym::zeros(n, bw);
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for i in 0..n {
            for j in i.saturating_sub(bw)..i {
                m.add(i, j, next());
            }
            m.add(i, i, 2.0 * bw as f64 + 1.0);
        }
        m
    }

    #[test]
    fn dense_round_trip_is_symmetric() {
        let m = random_spd(9, 3, 7);
        let d = m.to_dense();
        assert_eq!(d, d.transpose());
        assert_eq!(d[(5, 2)], m.get(2, 5));
        assert_eq!(m.get(0, 8), 0.0);
    }

    #[test]
    fn principal_submatrix_matches_dense_block() {
        let m = random_spd(10, 3, 3);
        let sub = m.principal(2, 8).to_dense();
        let full = m.to_dense();
        assert_eq!(sub, full.view((2, 2), (6, 6)).into_owned());
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let mut m = BandedSym::zeros(3, 1);
        m.add(0, 0, 1.0);
        m.add(1, 1, -1.0);
        m.add(2, 2, 1.0);
        assert!(m.solve_spd(&[1.0, 1.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn banded_solve_matches_dense(seed in 0u64..1000, n in 4usize..30, bw in 1usize..4) {
            let m = random_spd(n, bw, seed);
            let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let x = m.solve_spd(&b).unwrap();
            let r = m.mat_vec(&x);
            for (ri, bi) in r.iter().zip(&b) {
                prop_assert!((ri - bi).abs() < 1e-12);
            }
            let dense = m.to_dense() * DVector::from_column_slice(&x);
            for i in 0..n {
                prop_assert!((dense[i] - r[i]).abs() < 1e-12);
            }
        }
    }
}

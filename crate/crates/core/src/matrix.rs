use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums must match 1 within this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// A square row-stochastic matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct StochasticMatrix {
    n: usize,
    data: Vec<f64>,
}

impl StochasticMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Dimension("empty matrix".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "row {i} has length {} in a {n}x{n} matrix",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Self::from_flat(n, data)
    }

    pub fn from_flat(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} entries for n={n}, got {}",
                n * n,
                data.len()
            )));
        }
        for i in 0..n {
            let row = &data[i * n..(i + 1) * n];
            if let Some(j) = row.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::NotStochastic(format!(
                    "entry ({i},{j}) = {} is not a nonnegative finite number",
                    row[j]
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NotStochastic(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            n,
            data: vec![1.0 / n as f64; n * n],
        }
    }

    /// Matrix whose rows all equal `row`.
    pub fn constant_rows(row: &[f64]) -> Result<Self> {
        Self::from_rows(vec![row.to_vec(); row.len()])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Ordinary product `self * other`.
    pub fn mul(&self, other: &StochasticMatrix) -> Result<StochasticMatrix> {
        if self.n != other.n {
            return Err(Error::Dimension(format!(
                "cannot multiply {0}x{0} by {1}x{1}",
                self.n, other.n
            )));
        }
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn pow(&self, k: usize) -> StochasticMatrix {
        let mut acc = Self::identity(self.n);
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base).expect("same dimension");
            }
            base = base.mul(&base).expect("same dimension");
            e >>= 1;
        }
        acc
    }

    /// Row vector times matrix.
    pub fn left_apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for j in 0..n {
                out[j] += vi * self.data[i * n + j];
            }
        }
        out
    }

    /// Matrix times column vector.
    pub fn right_apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        (0..self.n).all(|j| {
            let s: f64 = (0..self.n).map(|i| self.get(i, j)).sum();
            (s - 1.0).abs() <= tol
        })
    }

    /// Dobrushin coefficient: the largest total-variation distance between two rows.
    pub fn dobrushin(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for k in (i + 1)..self.n {
                let tv: f64 = 0.5
                    * self
                        .row(i)
                        .iter()
                        .zip(self.row(k))
                        .map(|(a, b)| (a - b).abs())
                        .sum::<f64>();
                worst = worst.max(tv);
            }
        }
        worst
    }

    /// Stationary distribution from solving `pi (P - I) = 0, sum pi = 1`.
    ///
    /// Unique only for chains with a single recurrent class; for reducible
    /// chains one stationary law is returned.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        let n = self.n;
        // Transposed system: (P^T - I) pi = 0 with the last equation replaced by sum = 1.
        let mut a = vec![vec![0.0; n + 1]; n];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().take(n).enumerate() {
                *cell = self.get(j, i) - if i == j { 1.0 } else { 0.0 };
            }
        }
        for cell in a[n - 1].iter_mut() {
            *cell = 1.0;
        }
        let pi = solve_augmented(a).ok_or_else(|| Error::InvalidParameter("stationary system is singular".into()))?;
        Ok(pi.into_iter().map(|v| v.max(0.0)).collect())
    }

    /// Checks `pi P = pi` within `tol`.
    pub fn is_stationary(&self, pi: &[f64], tol: f64) -> bool {
        pi.len() == self.n && self.left_apply(pi).iter().zip(pi).all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// Gaussian elimination with partial pivoting on an `n x (n+1)` augmented system.
pub(crate) fn solve_augmented(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

impl TryFrom<Vec<Vec<f64>>> for StochasticMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<StochasticMatrix> for Vec<Vec<f64>> {
    fn from(m: StochasticMatrix) -> Self {
        m.rows()
    }
}

impl fmt::Debug for StochasticMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries((0..self.n).map(|i| self.row(i))).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_rows() {
        assert!(StochasticMatrix::from_rows(vec![vec![0.5, 0.4], vec![0.5, 0.5]]).is_err());
        assert!(StochasticMatrix::from_rows(vec![vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
        assert!(StochasticMatrix::from_rows(vec![vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn stationary_two_state() {
        let p = StochasticMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let pi = p.stationary().unwrap();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!(p.is_stationary(&pi, 1e-12));
    }

    #[test]
    fn power_matches_repeated_product() {
        let p =
            StochasticMatrix::from_rows(vec![vec![0.1, 0.6, 0.3], vec![0.4, 0.4, 0.2], vec![0.0, 0.5, 0.5]]).unwrap();
        let direct = p.mul(&p).unwrap().mul(&p).unwrap().mul(&p).unwrap();
        let fast = p.pow(4);
        for (a, b) in direct.as_flat().iter().zip(fast.as_flat()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(p.pow(0), StochasticMatrix::identity(3));
    }

    #[test]
    fn dobrushin_coefficient() {
        let p = StochasticMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        assert!((p.dobrushin() - 0.7).abs() < 1e-15);
        assert_eq!(StochasticMatrix::uniform(3).dobrushin(), 0.0);
    }
}

//! Direct solver for banded linear systems by Gaussian elimination with
//! partial pivoting. Row storage keeps kl extra superdiagonals for pivot
//! fill-in, so solves stay O(n * band^2).

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("banded matrix is numerically singular at elimination step {step}")]
pub struct SingularMatrix {
    pub step: usize,
}

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        assert!(n > 0 && kl < n && ku < n, "band widths must fit the matrix");
        // Row i holds columns [i-kl, i+ku+kl]; the trailing kl slots absorb
        // fill-in from row swaps.
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl, "({i},{j}) outside band");
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.idx(i, j);
        self.data[k] = value;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let k = self.idx(i, j);
        self.data[k] += value;
    }

    pub fn reset(&mut self) {
        self.data.fill(0.0);
    }

    /// Solves A x = rhs in place, destroying the stored matrix.
    pub fn solve_in_place(&mut self, rhs: &mut [f64]) -> Result<(), SingularMatrix> {
        assert_eq!(rhs.len(), self.n);
        let n = self.n;
        let reach = self.ku + self.kl;
        for k in 0..n {
            let row_end = (k + self.kl).min(n - 1);
            let mut piv_row = k;
            let mut piv_val = self.get(k, k).abs();
            for i in (k + 1)..=row_end {
                let v = self.get(i, k).abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = i;
                }
            }
            if piv_val == 0.0 || !piv_val.is_finite() {
                return Err(SingularMatrix { step: k });
            }
            let col_end = (k + reach).min(n - 1);
            if piv_row != k {
                for j in k..=col_end {
                    let a = self.get(k, j);
                    let b = self.get(piv_row, j);
                    self.set(k, j, b);
                    self.set(piv_row, j, a);
                }
                rhs.swap(k, piv_row);
            }
            let pivot = self.get(k, k);
            for i in (k + 1)..=row_end {
                let factor = self.get(i, k) / pivot;
                if factor == 0.0 {
                    continue;
                }
                self.set(i, k, 0.0);
                for j in (k + 1)..=col_end {
                    let upd = self.get(i, j) - factor * self.get(k, j);
                    self.set(i, j, upd);
                }
                rhs[i] -= factor * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let col_end = (k + reach).min(n - 1);
            let mut acc = rhs[k];
            for j in (k + 1)..=col_end {
                acc -= self.get(k, j) * rhs[j];
            }
            rhs[k] = acc / self.get(k, k);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // Dense elimination with partial pivoting, used as an independent oracle.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, piv);
            b.swap(k, piv);
            for i in (k + 1)..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        for k in (0..n).rev() {
            for j in (k + 1)..n {
                let xj = b[j];
                b[k] -= a[k][j] * xj;
            }
            b[k] /= a[k][k];
        }
        b
    }

    #[test]
    fn tridiagonal_known_solution() {
        // -x_{i-1} + 2 x_i - x_{i+1} = h^2, the discrete Poisson problem.
        let n = 9;
        let mut m = BandedMatrix::zeros(n, 1, 1);
        for i in 0..n {
            m.set(i, i, 2.0);
            if i > 0 {
                m.set(i, i - 1, -1.0);
            }
            if i + 1 < n {
                m.set(i, i + 1, -1.0);
            }
        }
        let h = 1.0 / (n as f64 + 1.0);
        let mut rhs = vec![h * h; n];
        m.solve_in_place(&mut rhs).unwrap();
        for i in 0..n {
            let y = (i + 1) as f64 * h;
            assert_abs_diff_eq!(rhs[i], 0.5 * y * (1.0 - y), epsilon = 1e-14);
        }
    }

    #[test]
    fn matches_dense_oracle_with_pivoting() {
        // kl = 3, ku = 2, same shape as the stepper Jacobian; a zero on the
        // diagonal forces a pivot swap.
        let n = 12;
        let (kl, ku) = (3, 2);
        let entry = |i: usize, j: usize| -> f64 {
            if i == 4 && j == 4 {
                return 0.0;
            }
            let d = j as f64 - i as f64;
            3.0 + (i as f64 * 0.37 + j as f64 * 0.61).sin() - 1.2 * d * d / 9.0
        };
        let mut banded = BandedMatrix::zeros(n, kl, ku);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if j + kl >= i && j <= i + ku {
                    banded.set(i, j, entry(i, j));
                    dense[i][j] = entry(i, j);
                }
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.83).cos()).collect();
        let expect = dense_solve(dense, rhs.clone());
        let mut got = rhs;
        banded.solve_in_place(&mut got).unwrap();
        for i in 0..n {
            assert_abs_diff_eq!(got[i], expect[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn singular_matrix_detected() {
        let mut m = BandedMatrix::zeros(3, 1, 1);
        m.set(0, 0, 1.0);
        m.set(1, 1, 1.0);
        // Row 2 left entirely zero.
        let mut rhs = vec![1.0, 1.0, 1.0];
        assert_eq!(m.solve_in_place(&mut rhs), Err(SingularMatrix { step: 2 }));
    }
}

use super::matrix::{Matrix, Scalar};
use crate::error::{Error, Result};

/// Relative threshold: `|det| < SINGULAR_RTOL * max|m_ij|^n` flags a matrix as
/// possibly singular; it is singular if its reciprocal 1-norm condition
/// number is also below `SINGULAR_RTOL`.
pub const SINGULAR_RTOL: f64 = 1e-12;

/// Partially pivoted LU factorization `P m = L U`, stored compactly.
#[derive(Debug, Clone)]
pub struct Lu<T: Scalar> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    sign: f64,
    input_max_abs: f64,
    input_norm1: f64,
}

impl<T: Scalar> Lu<T> {
    pub fn new(m: &Matrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "LU requires a square matrix, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let (pivot_row, pivot_mod) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].modulus()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pivot_row != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pivot_row, j)];
                    lu[(pivot_row, j)] = tmp;
                }
                perm.swap(k, pivot_row);
                sign = -sign;
            }
            if pivot_mod == 0.0 {
                continue;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor == T::zero() {
                    continue;
                }
                for j in k + 1..n {
                    let ukj = lu[(k, j)];
                    lu[(i, j)] -= factor * ukj;
                }
            }
        }
        Ok(Self {
            lu,
            perm,
            sign,
            input_max_abs: m.max_abs(),
            input_norm1: norm1(m),
        })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn determinant(&self) -> T {
        (0..self.dim()).fold(T::from_real(self.sign), |acc, i| acc * self.lu[(i, i)])
    }

    /// `ln |det|`, immune to overflow for large well-scaled matrices.
    pub fn log_abs_det(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.lu[(i, i)].modulus().ln())
            .sum()
    }

    pub fn is_singular(&self) -> bool {
        let n = self.dim();
        if n == 0 {
            return false;
        }
        if self.input_max_abs == 0.0 {
            return true;
        }
        if (0..n).any(|i| self.lu[(i, i)].modulus() == 0.0) {
            return true;
        }
        let threshold = SINGULAR_RTOL.ln() + n as f64 * self.input_max_abs.ln();
        // The determinant screen alone misfires on well-conditioned matrices
        // whose diagonal is small next to max|m_ij| (e.g. long cascades).
        self.log_abs_det() < threshold && self.rcond() < SINGULAR_RTOL
    }

    /// `1 / (||m||_1 ||m^-1||_1)`, with the inverse computed from the factors.
    pub fn rcond(&self) -> f64 {
        let inv = self.substitute(&Matrix::identity(self.dim()));
        let inv_norm = norm1(&inv);
        if !inv_norm.is_finite() || inv_norm == 0.0 {
            return 0.0;
        }
        1.0 / (self.input_norm1 * inv_norm)
    }

    fn check_regular(&self) -> Result<()> {
        if self.is_singular() {
            Err(Error::Singular {
                det_magnitude: self.log_abs_det().exp(),
            })
        } else {
            Ok(())
        }
    }

    /// Solves `m x = rhs` for every column of `rhs`.
    pub fn solve(&self, rhs: &Matrix<T>) -> Result<Matrix<T>> {
        let n = self.dim();
        if rhs.rows() != n {
            return Err(Error::Dimension(format!(
                "right-hand side has {} rows, expected {n}",
                rhs.rows()
            )));
        }
        self.check_regular()?;
        Ok(self.substitute(rhs))
    }

    fn substitute(&self, rhs: &Matrix<T>) -> Matrix<T> {
        let n = self.dim();
        let mut x = Matrix::from_fn(n, rhs.cols(), |i, j| rhs[(self.perm[i], j)]);
        for c in 0..rhs.cols() {
            for i in 0..n {
                let mut acc = x[(i, c)];
                for k in 0..i {
                    acc -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = acc;
            }
            for i in (0..n).rev() {
                let mut acc = x[(i, c)];
                for k in i + 1..n {
                    acc -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = acc / self.lu[(i, i)];
            }
        }
        x
    }

    pub fn inverse(&self) -> Result<Matrix<T>> {
        self.solve(&Matrix::identity(self.dim()))
    }
}

/// Maximum absolute column sum.
fn norm1<T: Scalar>(m: &Matrix<T>) -> f64 {
    (0..m.cols())
        .map(|j| (0..m.rows()).map(|i| m[(i, j)].modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn determinant<T: Scalar>(m: &Matrix<T>) -> Result<T> {
    Ok(Lu::new(m)?.determinant())
}

pub fn inverse<T: Scalar>(m: &Matrix<T>) -> Result<Matrix<T>> {
    Lu::new(m)?.inverse()
}

/// Solves `m x = rhs`.
pub fn solve<T: Scalar>(m: &Matrix<T>, rhs: &Matrix<T>) -> Result<Matrix<T>> {
    Lu::new(m)?.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RealMatrix;
    use num_complex::Complex64;

    /// Laplace expansion along the first row.
    fn cofactor_det(m: &RealMatrix) -> f64 {
        let n = m.rows();
        if n == 1 {
            return m[(0, 0)];
        }
        (0..n)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[(0, j)] * cofactor_det(&m.minor(0, j))
            })
            .sum()
    }

    fn pseudo_random(n: usize, seed: u64) -> RealMatrix {
        let mut state = seed;
        RealMatrix::from_fn(n, n, |_, _| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn identity_determinant() {
        assert_eq!(determinant(&RealMatrix::identity(4)).unwrap(), 1.0);
    }

    #[test]
    fn diagonal_determinant() {
        assert_eq!(determinant(&RealMatrix::diag(&[2.0, 3.0])).unwrap(), 6.0);
    }

    #[test]
    fn determinant_matches_cofactor_expansion() {
        for seed in 1..6 {
            let m = pseudo_random(6, seed);
            let lu = determinant(&m).unwrap();
            let oracle = cofactor_det(&m);
            assert!(
                (lu - oracle).abs() <= 1e-10 * oracle.abs().max(1e-300),
                "seed {seed}: {lu} vs {oracle}"
            );
        }
    }

    #[test]
    fn non_square_is_rejected() {
        assert!(matches!(
            determinant(&RealMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn inverse_of_simple_matrices() {
        assert_eq!(
            inverse(&RealMatrix::identity(4)).unwrap(),
            RealMatrix::identity(4)
        );
        assert_eq!(
            inverse(&RealMatrix::diag(&[2.0, 4.0])).unwrap(),
            RealMatrix::diag(&[0.5, 0.25])
        );
    }

    #[test]
    fn inverse_residual_is_small() {
        let m = &pseudo_random(8, 42) + &RealMatrix::identity(8).scale(4.0);
        let inv = inverse(&m).unwrap();
        assert!((&m * &inv).max_abs_diff(&RealMatrix::identity(8)) < 1e-9);
    }

    #[test]
    fn singular_matrix_reports_magnitude() {
        let m = RealMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        match inverse(&m) {
            Err(Error::Singular { det_magnitude }) => assert!(det_magnitude < 1e-12),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn singularity_threshold_is_scale_aware() {
        // det = 1e-30 but entries are 1e-15: perfectly regular after scaling.
        let m = RealMatrix::identity(2).scale(1e-15);
        let inv = inverse(&m).unwrap();
        assert!((inv[(0, 0)] - 1e15).abs() < 1.0);
        // Large matrices with large entries must not overflow the test.
        let big = RealMatrix::identity(44).scale(7.2e7);
        assert!(!Lu::new(&big).unwrap().is_singular());
    }

    /// `0.5 I` plus unit sub-diagonal couplings inside blocks of `block`.
    fn cascade(n: usize, block: usize) -> RealMatrix {
        RealMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.5
            } else if i == j + 1 && i % block != 0 {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn small_determinant_alone_is_not_singular() {
        // det = 2^-40 trips the determinant screen, but cond ~ 4e3.
        let lu = Lu::new(&cascade(40, 10)).unwrap();
        assert!(lu.log_abs_det() < SINGULAR_RTOL.ln());
        assert!(lu.rcond() > 1e-4);
        assert!(!lu.is_singular());
        // One 40-long cascade has cond ~ 2^41 and is rejected.
        assert!(Lu::new(&cascade(40, 40)).unwrap().is_singular());
    }

    #[test]
    fn complex_solve() {
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        let m = Matrix::from_rows(&[vec![one, i], vec![-i, 2.0 * one]]).unwrap();
        let inv = inverse(&m).unwrap();
        let prod = &m * &inv;
        assert!(prod.max_abs_diff(&Matrix::identity(2)) < 1e-14);
    }
}

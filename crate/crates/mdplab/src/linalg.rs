//! Dense Gaussian elimination with partial pivoting.
//!
//! This is the O(n³) linear solve behind policy evaluation and the Denardo
//! basis extraction. Fast-inversion alternatives are deliberately not used;
//! at tabular scale a dense solve is both simpler and faster in practice.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("singular linear system: pivot magnitude {pivot_magnitude:e} below threshold")]
pub struct SingularSystem {
    pub pivot_magnitude: f64,
}

/// Solves `A x = b` in place: `matrix` is an `n x n` row-major matrix and
/// `rhs` holds `b` on entry and `x` on success. Both are destroyed on failure.
pub fn solve_in_place<T: Scalar>(matrix: &mut [T], rhs: &mut [T], n: usize) -> Result<(), SingularSystem> {
    assert_eq!(matrix.len(), n * n, "matrix must be n x n");
    assert_eq!(rhs.len(), n, "rhs length must match n");

    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_mag = matrix[col * n + col].abs();
        for row in col + 1..n {
            let mag = matrix[row * n + col].abs();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = row;
            }
        }
        if pivot_mag < T::SOLVE_PIVOT_TOLERANCE {
            return Err(SingularSystem {
                pivot_magnitude: pivot_mag.to_f64().unwrap_or(0.0),
            });
        }
        if pivot_row != col {
            for j in 0..n {
                matrix.swap(col * n + j, pivot_row * n + j);
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = matrix[col * n + col];
        for row in col + 1..n {
            let factor = matrix[row * n + col] / pivot;
            if factor == T::zero() {
                continue;
            }
            matrix[row * n + col] = T::zero();
            for j in col + 1..n {
                let delta = factor * matrix[col * n + j];
                matrix[row * n + j] = matrix[row * n + j] - delta;
            }
            let delta = factor * rhs[col];
            rhs[row] = rhs[row] - delta;
        }
    }

    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for j in col + 1..n {
            acc = acc - matrix[col * n + j] * rhs[j];
        }
        rhs[col] = acc / matrix[col * n + col];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // [2 1; 1 3] x = [5; 10] => x = (1, 3)
        let mut a = vec![2.0f64, 1.0, 1.0, 3.0];
        let mut b = vec![5.0f64, 10.0];
        solve_in_place(&mut a, &mut b, 2).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-12);
        assert!((b[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn pivots_on_zero_diagonal() {
        // leading zero forces the row swap
        let mut a = vec![0.0, 1.0, 1.0, 0.0];
        let mut b = vec![2.0, 3.0];
        solve_in_place(&mut a, &mut b, 2).unwrap();
        assert_eq!(b, vec![3.0, 2.0]);
    }

    #[test]
    fn reports_singular_matrix() {
        let mut a = vec![1.0, 2.0, 2.0, 4.0];
        let mut b = vec![1.0, 2.0];
        let err = solve_in_place(&mut a, &mut b, 2).unwrap_err();
        assert!(err.pivot_magnitude < 1e-12);
    }

    #[test]
    fn works_in_f32() {
        let mut a = vec![4.0f32, 0.0, 0.0, 2.0];
        let mut b = vec![8.0f32, 1.0];
        solve_in_place(&mut a, &mut b, 2).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-5);
        assert!((b[1] - 0.5).abs() < 1e-5);
    }
}

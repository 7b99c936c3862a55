//! Small dense solves used to impose initial conditions.

use num_complex::Complex;

use crate::scalar::Real;

/// Solves `m x = rhs` for a real square matrix and a complex right-hand side
/// by Gaussian elimination with partial pivoting.
///
/// Returns `None` when a pivot falls below `eps * max|m_ij|`.
pub fn solve_real<T: Real, const N: usize>(
    mut m: [[T; N]; N],
    mut rhs: [Complex<T>; N],
) -> Option<[Complex<T>; N]> {
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |acc, x| acc.max(x.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return None;
    }
    let tiny = scale * T::epsilon();

    for col in 0..N {
        let pivot = (col..N)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        if m[pivot][col].abs() <= tiny {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..N {
            let f = m[row][col] / m[col][col];
            if f == T::zero() {
                continue;
            }
            for k in col..N {
                m[row][k] = m[row][k] - f * m[col][k];
            }
            rhs[row] = rhs[row] - rhs[col] * f;
        }
    }

    let mut x = [Complex::new(T::zero(), T::zero()); N];
    for row in (0..N).rev() {
        let mut acc = rhs[row];
        for k in row + 1..N {
            acc = acc - x[k] * m[row][k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

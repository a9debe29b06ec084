//! Thomas algorithm for tridiagonal systems, with a reusable factorization.

use crate::error::{Error, Result};

/// LU factorization of a tridiagonal matrix with rows
/// `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]`.
/// `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    lower: Vec<f64>,
    // modified upper coefficients c'_i and reciprocal pivots
    upper_mod: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl Tridiagonal {
    pub fn factor(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        if n == 0 || lower.len() != n || upper.len() != n {
            return Err(Error::Internal(format!(
                "tridiagonal bands have lengths {}, {}, {}",
                lower.len(),
                n,
                upper.len()
            )));
        }
        let mut upper_mod = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_c = 0.0;
        for i in 0..n {
            let a = if i == 0 { 0.0 } else { lower[i] };
            let pivot = diag[i] - a * prev_c;
            if pivot.abs() <= f64::EPSILON * diag[i].abs().max(1e-300) || !pivot.is_finite() {
                return Err(Error::Internal(format!("singular tridiagonal pivot at row {i}")));
            }
            inv_pivot[i] = 1.0 / pivot;
            prev_c = if i + 1 < n { upper[i] * inv_pivot[i] } else { 0.0 };
            upper_mod[i] = prev_c;
        }
        Ok(Self {
            lower: lower.to_vec(),
            upper_mod,
            inv_pivot,
        })
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.len();
        assert_eq!(x.len(), n, "right-hand side length");
        x[0] *= self.inv_pivot[0];
        for i in 1..n {
            x[i] = (x[i] - self.lower[i] * x[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.upper_mod[i] * x[i + 1];
        }
    }
}

/// Multiplies the tridiagonal matrix by `x`.
pub fn apply(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let mut y = diag[i] * x[i];
            if i > 0 {
                y += lower[i] * x[i - 1];
            }
            if i + 1 < n {
                y += upper[i] * x[i + 1];
            }
            y
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn solves_poisson_stencil() {
        let n = 50;
        let lower = vec![-1.0; n];
        let diag = vec![2.0; n];
        let upper = vec![-1.0; n];
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = apply(&lower, &diag, &upper, &x);
        let y = Tridiagonal::factor(&lower, &diag, &upper).unwrap().solve(&b);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn singular_system_is_reported() {
        let r = Tridiagonal::factor(&[0.0, 1.0], &[1.0, 1.0], &[1.0, 0.0]);
        assert!(matches!(r, Err(Error::Internal(_))));
    }

    proptest! {
        #[test]
        fn diagonally_dominant_round_trip(
            off in proptest::collection::vec(-1.0f64..1.0, 2..40),
            seed in -1.0f64..1.0,
        ) {
            let n = off.len();
            let lower: Vec<f64> = off.clone();
            let upper: Vec<f64> = off.iter().rev().cloned().collect();
            let diag: Vec<f64> = (0..n).map(|i| 2.5 + (i as f64 * seed).cos()).collect();
            let x: Vec<f64> = (0..n).map(|i| (i as f64 + seed).sin()).collect();
            let b = apply(&lower, &diag, &upper, &x);
            let y = Tridiagonal::factor(&lower, &diag, &upper).unwrap().solve(&b);
            for (a, b) in x.iter().zip(&y) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

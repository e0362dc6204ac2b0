//! k-th compound matrices: entry `(I, J)` is the determinant of the `k x k`
//! minor with rows `I` and columns `J`. Index sets are weight-k bitstrings
//! ordered by [`BasisIndexer`], so the result lines up with `W^k` blocks.

use nalgebra::DMatrix;

use crate::basis::BasisIndexer;
use crate::error::{dim_mismatch, Result};

pub fn compound_matrix(a: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(dim_mismatch!("compound matrix needs a square input, got {:?}", a.shape()));
    }
    let idx = BasisIndexer::new(n, k)?;
    let d = idx.dim();
    let sets: Vec<Vec<usize>> = idx
        .states()
        .map(|b| (0..n).filter(|&q| idx.occupied(b, q)).collect())
        .collect();
    let mut out = DMatrix::<f64>::zeros(d, d);
    let mut minor = DMatrix::<f64>::zeros(k, k);
    for (r, rows) in sets.iter().enumerate() {
        for (c, cols) in sets.iter().enumerate() {
            for (mi, &ri) in rows.iter().enumerate() {
                for (mj, &cj) in cols.iter().enumerate() {
                    minor[(mi, mj)] = a[(ri, cj)];
                }
            }
            out[(r, c)] = if k == 0 { 1.0 } else { minor.clone().determinant() };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_compounds_to_identity() {
        for n in 1..=6 {
            for k in 0..=n {
                let c = compound_matrix(&DMatrix::identity(n, n), k).unwrap();
                let d = c.nrows();
                assert_eq!(c, DMatrix::identity(d, d), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn first_compound_is_the_matrix() {
        let a = DMatrix::from_fn(4, 4, |i, j| (i * 4 + j) as f64 * 0.1 - 0.7);
        let c = compound_matrix(&a, 1).unwrap();
        assert!((c - &a).abs().max() < 1e-15);
    }

    #[test]
    fn top_compound_is_determinant() {
        let a = DMatrix::from_fn(3, 3, |i, j| if i == j { 2.0 } else { (i + j) as f64 * 0.3 });
        let c = compound_matrix(&a, 3).unwrap();
        assert!((c[(0, 0)] - a.clone().determinant()).abs() < 1e-12);
    }

    #[test]
    fn hand_checked_2x2_minors() {
        // rows/cols ordered {0,1}, {0,2}, {1,2}
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 10.0]);
        let c = compound_matrix(&a, 2).unwrap();
        // rows {0,1}, cols {0,1}: 1*5 - 2*4
        assert!((c[(0, 0)] + 3.0).abs() < 1e-12);
        // rows {1,2}, cols {0,2}: 4*10 - 6*7
        assert!((c[(2, 1)] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_square_rejected() {
        assert!(compound_matrix(&DMatrix::zeros(2, 3), 1).is_err());
    }
}

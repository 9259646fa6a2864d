//! Exhaustive reference solver for small NNK problems.

use nalgebra::{DMatrix, DVector};

use super::solver::{objective, DIAGONAL_REGULARIZATION};
use crate::error::{Error, Result};

/// Largest problem the oracle will enumerate (2^12 support sets).
pub const ORACLE_MAX_DIM: usize = 12;

/// Enumerates every support set A, solves the regularized equality system on
/// A, and keeps candidates that are strictly positive on A with a
/// nonnegative gradient off A. Returns the candidate with the lowest objective.
pub fn nnk_brute_force_oracle(kss: &DMatrix<f64>, ksi: &DVector<f64>) -> Result<Vec<f64>> {
    let m = ksi.len();
    if m > ORACLE_MAX_DIM {
        return Err(Error::OracleTooLarge {
            dim: m,
            limit: ORACLE_MAX_DIM,
        });
    }
    let q = kss + DMatrix::identity(m, m) * DIAGONAL_REGULARIZATION;

    let mut best_kkt: Option<(f64, Vec<f64>)> = None;
    let mut best_any: (f64, Vec<f64>) = (0.0, vec![0.0; m]);

    for mask in 1u32..(1 << m) {
        let set: Vec<usize> = (0..m).filter(|&j| mask & (1 << j) != 0).collect();
        let sub = DMatrix::from_fn(set.len(), set.len(), |r, c| q[(set[r], set[c])]);
        let rhs = DVector::from_iterator(set.len(), set.iter().map(|&j| ksi[j]));
        let Some(sol) = sub.lu().solve(&rhs) else { continue };
        if sol.iter().any(|&v| v <= 0.0) {
            continue;
        }
        let mut theta = vec![0.0; m];
        for (&j, &v) in set.iter().zip(sol.iter()) {
            theta[j] = v;
        }
        let obj = objective(kss, ksi, &theta);
        if obj < best_any.0 {
            best_any = (obj, theta.clone());
        }
        let grad = &q * DVector::from_column_slice(&theta) - ksi;
        let stationary_off_support = (0..m).all(|j| mask & (1 << j) != 0 || grad[j] >= -1e-9);
        if stationary_off_support && best_kkt.as_ref().is_none_or(|(b, _)| obj < *b) {
            best_kkt = Some((obj, theta));
        }
    }
    // Every candidate is feasible, so the lowest objective among them is the
    // optimum even if rounding hid the KKT-certified one.
    Ok(best_kkt.map(|(_, t)| t).unwrap_or(best_any.1))
}

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Added to the kernel diagonal before solving; coincident points make K_SS singular.
pub const DIAGONAL_REGULARIZATION: f64 = 1e-10;
/// Tolerance on the KKT certificate.
pub const KKT_TOLERANCE: f64 = 1e-6;
/// Most negative eigenvalue accepted in a kernel matrix.
pub const PSD_TOLERANCE: f64 = 1e-8;
/// A free variable enters the active set only if its descent rate exceeds this.
const ENTER_TOLERANCE: f64 = 1e-10;

/// Minimizer of `½ θᵀ K_SS θ − K_Siᵀ θ` over `θ ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NnkSolution {
    pub theta: Vec<f64>,
    /// `½ θᵀ K_SS θ − K_Siᵀ θ`.
    pub objective: f64,
    /// `½ ‖φ_i − Φ_S θ‖²`, i.e. the objective plus `½ k(x_i, x_i)`.
    pub residual: f64,
    pub iterations: usize,
}

pub(crate) fn objective(kss: &DMatrix<f64>, ksi: &DVector<f64>, theta: &[f64]) -> f64 {
    let t = DVector::from_column_slice(theta);
    0.5 * t.dot(&(kss * &t)) - ksi.dot(&t)
}

/// Largest violation of the KKT conditions at `theta`: stationarity on the
/// support and a nonnegative gradient on the pruned coordinates.
pub fn kkt_violation(kss: &DMatrix<f64>, ksi: &DVector<f64>, theta: &[f64]) -> f64 {
    let t = DVector::from_column_slice(theta);
    let grad = kss * t - ksi;
    theta
        .iter()
        .zip(grad.iter())
        .map(|(&th, &g)| {
            if th < 0.0 {
                -th
            } else if th > 0.0 {
                g.abs()
            } else {
                (-g).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn check_inputs(kss: &DMatrix<f64>, ksi: &DVector<f64>) -> Result<()> {
    let m = ksi.len();
    if kss.nrows() != m || kss.ncols() != m {
        return Err(Error::InvalidConfig(format!(
            "kernel matrix is {}x{} but the kernel vector has length {m}",
            kss.nrows(),
            kss.ncols()
        )));
    }
    if m == 0 {
        return Ok(());
    }
    // K + tol·I is positive definite iff the smallest eigenvalue of K exceeds -tol.
    let shifted = kss + DMatrix::identity(m, m) * PSD_TOLERANCE;
    if shifted.cholesky().is_none() {
        return Err(Error::InvalidKernel {
            tolerance: PSD_TOLERANCE,
        });
    }
    Ok(())
}

fn solve_subsystem(q: &DMatrix<f64>, b: &DVector<f64>, set: &[usize]) -> Option<Vec<f64>> {
    let sub = DMatrix::from_fn(set.len(), set.len(), |r, c| q[(set[r], set[c])]);
    let rhs = DVector::from_iterator(set.len(), set.iter().map(|&j| b[j]));
    let chol = sub.cholesky()?;
    Some(chol.solve(&rhs).iter().copied().collect())
}

/// Active-set non-negative solve of the kernelized NNK objective
/// (Lawson–Hanson on the quadratic form).
pub fn nnk_solve(kss: &DMatrix<f64>, ksi: &DVector<f64>) -> Result<NnkSolution> {
    check_inputs(kss, ksi)?;
    let m = ksi.len();
    let q = kss + DMatrix::identity(m, m) * DIAGONAL_REGULARIZATION;
    let cap = 10 * m.max(1);

    let mut theta = vec![0.0; m];
    let mut active = vec![false; m];
    // Coordinates whose entry failed numerically; cleared when the active set changes.
    let mut blocked = vec![false; m];
    let mut iterations = 0;

    let fail = |theta: &[f64], iterations| Error::SolverFailure {
        iterations,
        last_iterate: theta.to_vec(),
    };

    loop {
        let t = DVector::from_column_slice(&theta);
        let descent = ksi - &q * t;
        let entering = (0..m)
            .filter(|&j| !active[j] && !blocked[j] && descent[j] > ENTER_TOLERANCE)
            .max_by(|&a, &b| descent[a].total_cmp(&descent[b]).then(b.cmp(&a)));
        let Some(entering) = entering else { break };
        active[entering] = true;

        let mut first = true;
        loop {
            iterations += 1;
            if iterations > cap {
                return Err(fail(&theta, iterations - 1));
            }
            let set: Vec<usize> = (0..m).filter(|&j| active[j]).collect();
            let z = solve_subsystem(&q, ksi, &set).ok_or_else(|| fail(&theta, iterations))?;

            if z.iter().all(|&v| v > 0.0) {
                for (&j, &v) in set.iter().zip(&z) {
                    theta[j] = v;
                }
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }

            let entering_pos = set.iter().position(|&j| j == entering);
            if first && entering_pos.is_some_and(|p| z[p] <= 0.0) {
                // Rounding made the entering direction look useful; skip it.
                active[entering] = false;
                blocked[entering] = true;
                break;
            }
            first = false;

            // Step toward z until the first active coordinate hits zero.
            let mut alpha = f64::INFINITY;
            for (&j, &v) in set.iter().zip(&z) {
                if v <= 0.0 {
                    let denom = theta[j] - v;
                    alpha = alpha.min(if denom > 0.0 { theta[j] / denom } else { 0.0 });
                }
            }
            for (&j, &v) in set.iter().zip(&z) {
                theta[j] += alpha * (v - theta[j]);
                if theta[j] <= 0.0 || (v <= 0.0 && theta[j] <= f64::EPSILON * 16.0) {
                    theta[j] = 0.0;
                    active[j] = false;
                }
            }
            if !active.iter().any(|&a| a) {
                break;
            }
        }
    }

    let objective = objective(kss, ksi, &theta);
    Ok(NnkSolution {
        residual: (objective + 0.5).max(0.0),
        objective,
        theta,
        iterations,
    })
}

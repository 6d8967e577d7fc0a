use nalgebra::DMatrix;

use super::TransportPlan;
use crate::error::{Error, Result};

/// Output of [`solve_sinkhorn`]. `converged` is false when the iteration
/// budget ran out; the plan is then the last iterate, still rounded onto the
/// polytope.
#[derive(Debug, Clone)]
pub struct SinkhornSolution {
    pub plan: TransportPlan,
    /// Transport cost `<cost, plan>` (entropy term excluded).
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const SINKHORN_TOL: f64 = 1e-9;

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Entropy-regularized transport between uniform marginals, iterated in the
/// log domain and rounded onto the transportation polytope.
pub fn solve_sinkhorn(cost: &DMatrix<f64>, epsilon: f64, max_iter: usize) -> Result<SinkhornSolution> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sinkhorn epsilon must be positive, got {epsilon}"
        )));
    }
    let (n1, n2) = cost.shape();
    if n1 == 0 || n2 == 0 {
        return Err(Error::ShapeMismatch("empty cost matrix".into()));
    }
    for j in 0..n2 {
        for i in 0..n1 {
            if !cost[(i, j)].is_finite() {
                return Err(Error::NonFiniteCost(i, j));
            }
        }
    }
    let log_a = -(n1 as f64).ln();
    let log_b = -(n2 as f64).ln();
    let mut f = vec![0.0; n1];
    let mut g = vec![0.0; n2];

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        for i in 0..n1 {
            let lse = log_sum_exp((0..n2).map(|j| (g[j] - cost[(i, j)]) / epsilon));
            f[i] = epsilon * (log_a - lse);
        }
        for j in 0..n2 {
            let lse = log_sum_exp((0..n1).map(|i| (f[i] - cost[(i, j)]) / epsilon));
            g[j] = epsilon * (log_b - lse);
        }
        // Columns are exact after the g update; check the rows.
        let a = 1.0 / n1 as f64;
        let err = (0..n1)
            .map(|i| {
                let row: f64 = (0..n2)
                    .map(|j| ((f[i] + g[j] - cost[(i, j)]) / epsilon).exp())
                    .sum();
                (row - a).abs()
            })
            .fold(0.0, f64::max);
        if err < SINKHORN_TOL {
            converged = true;
            break;
        }
    }

    let pi = DMatrix::from_fn(n1, n2, |i, j| ((f[i] + g[j] - cost[(i, j)]) / epsilon).exp());
    let plan = round_to_polytope(pi);
    let value = plan.cost(cost);
    Ok(SinkhornSolution {
        plan,
        value,
        iterations,
        converged,
    })
}

/// Projects a positive matrix onto the uniform transportation polytope by
/// row/column down-scaling followed by a rank-one correction.
fn round_to_polytope(mut pi: DMatrix<f64>) -> TransportPlan {
    let (n1, n2) = pi.shape();
    let a = 1.0 / n1 as f64;
    let b = 1.0 / n2 as f64;
    for i in 0..n1 {
        let s: f64 = pi.row(i).sum();
        if s > a {
            pi.row_mut(i).scale_mut(a / s);
        }
    }
    for j in 0..n2 {
        let s: f64 = pi.column(j).sum();
        if s > b {
            pi.column_mut(j).scale_mut(b / s);
        }
    }
    let err_r: Vec<f64> = (0..n1).map(|i| (a - pi.row(i).sum()).max(0.0)).collect();
    let err_c: Vec<f64> = (0..n2).map(|j| (b - pi.column(j).sum()).max(0.0)).collect();
    let total: f64 = err_r.iter().sum();
    if total > 0.0 {
        for i in 0..n1 {
            for j in 0..n2 {
                pi[(i, j)] += err_r[i] * err_c[j] / total;
            }
        }
    }
    TransportPlan::from_matrix_unchecked(pi)
}

//! Linear optimal transport between uniform discrete measures.
//!
//! [`solve_exact`] returns a vertex of the transportation polytope and is the
//! direction oracle of the Frank-Wolfe solver. [`solve_sinkhorn`] is an
//! entropic approximation used to draw random interior couplings.

mod simplex;
mod sinkhorn;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use simplex::{solve_exact, TransportSimplex};
pub use sinkhorn::{solve_sinkhorn, SinkhornSolution};

/// Marginal tolerance accepted by [`TransportPlan::from_matrix`].
pub const MARGINAL_TOL: f64 = 1e-10;

/// A coupling between `n1` and `n2` uniformly weighted points.
///
/// Row sums are `1/n1` and column sums `1/n2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pi: DMatrix<f64>,
}

impl TransportPlan {
    /// Validates marginals and clamps round-off negatives (down to `-1e-15`) to zero.
    pub fn from_matrix(mut pi: DMatrix<f64>) -> Result<Self> {
        let (n1, n2) = pi.shape();
        if n1 == 0 || n2 == 0 {
            return Err(Error::ShapeMismatch("empty transport plan".into()));
        }
        for v in pi.iter_mut() {
            if !v.is_finite() || *v < -1e-15 {
                return Err(Error::InvalidParameter(format!(
                    "transport plan entry {v} is negative or non-finite"
                )));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let plan = Self { pi };
        let violation = plan.marginal_violation();
        if violation > MARGINAL_TOL {
            return Err(Error::InvalidParameter(format!(
                "transport plan marginals violated by {violation:e}"
            )));
        }
        Ok(plan)
    }

    pub(crate) fn from_matrix_unchecked(pi: DMatrix<f64>) -> Self {
        Self { pi }
    }

    /// The independent coupling `a b^T`, with every entry `1/(n1 n2)`.
    pub fn product(n1: usize, n2: usize) -> Self {
        Self {
            pi: DMatrix::from_element(n1, n2, 1.0 / (n1 * n2) as f64),
        }
    }

    /// `I / n`.
    pub fn identity(n: usize) -> Self {
        Self {
            pi: DMatrix::identity(n, n) / n as f64,
        }
    }

    /// `P / n` for a permutation sending `i` to `perm[i]`.
    pub fn from_permutation(perm: &[usize]) -> Result<Self> {
        let n = perm.len();
        let mut pi = DMatrix::zeros(n, n);
        for (i, &j) in perm.iter().enumerate() {
            if j >= n {
                return Err(Error::InvalidPermutation(format!("image {j} >= {n}")));
            }
            pi[(i, j)] = 1.0 / n as f64;
        }
        Self::from_matrix(pi)
    }

    /// The monotone (north-west corner) coupling: source node `p` is spread
    /// over a contiguous run of target nodes. For `n1 == n2` this is `I / n`.
    pub fn blow_up(n1: usize, n2: usize) -> Self {
        // Work in units of 1/(n1 n2): each source has n2 units, each target n1.
        let mut pi = DMatrix::zeros(n1, n2);
        let (mut i, mut j) = (0, 0);
        let (mut supply, mut demand) = (n2, n1);
        let unit = 1.0 / (n1 * n2) as f64;
        while i < n1 && j < n2 {
            let q = supply.min(demand);
            pi[(i, j)] = q as f64 * unit;
            supply -= q;
            demand -= q;
            if supply == 0 {
                i += 1;
                supply = n2;
            }
            if demand == 0 {
                j += 1;
                demand = n1;
            }
        }
        Self { pi }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.pi
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.pi
    }

    pub fn shape(&self) -> (usize, usize) {
        self.pi.shape()
    }

    pub fn transpose(&self) -> Self {
        Self {
            pi: self.pi.transpose(),
        }
    }

    /// Max-norm distance of the marginals to the uniform ones.
    pub fn marginal_violation(&self) -> f64 {
        let (n1, n2) = self.pi.shape();
        let a = 1.0 / n1 as f64;
        let b = 1.0 / n2 as f64;
        let rows = self.pi.column_sum().iter().map(|r| (r - a).abs()).fold(0.0, f64::max);
        let cols = self.pi.row_sum().iter().map(|c| (c - b).abs()).fold(0.0, f64::max);
        rows.max(cols)
    }

    /// Number of entries above `tol`.
    pub fn support_size(&self, tol: f64) -> usize {
        self.pi.iter().filter(|v| **v > tol).count()
    }

    /// `<cost, pi>`.
    pub fn cost(&self, cost: &DMatrix<f64>) -> f64 {
        self.pi.dot(cost)
    }
}

/// Squared Euclidean distances between feature rows: `M[i, j] = |F1_i - F2_j|^2`.
pub fn feature_cost_matrix(f1: &DMatrix<f64>, f2: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if f1.ncols() != f2.ncols() {
        return Err(Error::DimMismatch(f1.ncols(), f2.ncols()));
    }
    let (n1, n2, d) = (f1.nrows(), f2.nrows(), f1.ncols());
    Ok(DMatrix::from_fn(n1, n2, |i, j| {
        let mut s = 0.0;
        for k in 0..d {
            let diff = f1[(i, k)] - f2[(j, k)];
            s += diff * diff;
        }
        s
    }))
}

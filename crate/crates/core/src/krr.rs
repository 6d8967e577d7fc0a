//! Kernel ridge weights over training graphs.
//!
//! The nonparametric predictor uses every training graph as a template and
//! weights them with `alpha(x) = (K + lambda I)^{-1} k_x`. Predictions are
//! barycenters under the (truncated, renormalized) weights; decoding scores
//! candidate graphs by the weighted sum of squared FGW distances.

use std::cmp::Ordering;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::barycenter::{solve_barycenter, BarycenterOptions, BarycenterResult, TemplateSet};
use crate::error::{Error, Result};
use crate::fgw::{fgw_distance, FgwOptions};
use crate::graph::{MeasureGraph, RelaxedGraph};

/// Lowest eigenvalue accepted for a user supplied Gram matrix.
pub const PSD_TOL: f64 = -1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `exp(-gamma |x - x'|^2)`
    Gaussian { gamma: f64 },
    Linear,
    /// Kernel values are supplied by the caller.
    Precomputed,
}

impl Kernel {
    pub fn gaussian(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gaussian gamma must be positive, got {gamma}")));
        }
        Ok(Kernel::Gaussian { gamma })
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimMismatch(a.len(), b.len()));
        }
        match *self {
            Kernel::Gaussian { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
                Ok((-gamma * d2).exp())
            }
            Kernel::Linear => Ok(a.iter().zip(b).map(|(u, v)| u * v).sum()),
            Kernel::Precomputed => Err(Error::InvalidParameter(
                "a precomputed kernel cannot be evaluated on raw inputs".into(),
            )),
        }
    }
}

/// `K[i, j] = k(x_i, x_j)`.
pub fn gram_matrix(kernel: &Kernel, xs: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = xs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(&xs[i], &xs[j])?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// `k_x[i] = k(x_i, x)`.
pub fn kernel_vector(kernel: &Kernel, xs: &[Vec<f64>], x: &[f64]) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(xs.len());
    for (i, xi) in xs.iter().enumerate() {
        out[i] = kernel.eval(xi, x)?;
    }
    Ok(out)
}

/// Checks that a supplied Gram matrix is square, symmetric and PSD up to [`PSD_TOL`].
pub fn check_gram(k: &DMatrix<f64>) -> Result<()> {
    if !k.is_square() {
        return Err(Error::NonSquare { rows: k.nrows(), cols: k.ncols() });
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite("Gram matrix has non-finite entries".into()));
    }
    let scale = k.amax().max(1.0);
    if (k - k.transpose()).amax() > 1e-10 * scale {
        return Err(Error::NotPositiveDefinite("Gram matrix is not symmetric".into()));
    }
    if k.nrows() > 0 {
        let min = SymmetricEigen::new(k.clone()).eigenvalues.min();
        if min < PSD_TOL {
            return Err(Error::NotPositiveDefinite(format!("Gram matrix eigenvalue {min:e}")));
        }
    }
    Ok(())
}

/// Cholesky factorization of `K + lambda I`.
#[derive(Debug, Clone)]
pub struct KrrSolver {
    gram: DMatrix<f64>,
    lambda: f64,
    chol: Cholesky<f64, Dyn>,
}

/// Factorizes `K + lambda I`. Fails with `NotPositiveDefinite` when the
/// regularized matrix has no Cholesky factor (an indefinite Gram matrix).
pub fn fit_krr(gram: DMatrix<f64>, lambda: f64) -> Result<KrrSolver> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("ridge lambda must be positive, got {lambda}")));
    }
    if !gram.is_square() || gram.nrows() == 0 {
        return Err(Error::NonSquare { rows: gram.nrows(), cols: gram.ncols() });
    }
    let n = gram.nrows();
    let regularized = &gram + DMatrix::identity(n, n) * lambda;
    let chol = Cholesky::new(regularized)
        .ok_or_else(|| Error::NotPositiveDefinite(format!("K + {lambda:e} I has no Cholesky factor")))?;
    Ok(KrrSolver { gram, lambda, chol })
}

impl KrrSolver {
    pub fn len(&self) -> usize {
        self.gram.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.gram.nrows() == 0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `(K + lambda I)^{-1} k_x`. Weights may be negative.
    pub fn weights(&self, kx: &DVector<f64>) -> Result<DVector<f64>> {
        if kx.len() != self.len() {
            return Err(Error::SizeMismatch { expected: self.len(), got: kx.len() });
        }
        Ok(self.chol.solve(kx))
    }

    /// `|(K + lambda I) alpha - k_x|_inf`.
    pub fn residual(&self, alpha: &DVector<f64>, kx: &DVector<f64>) -> f64 {
        (&self.gram * alpha + alpha * self.lambda - kx).amax()
    }
}

/// Keeps the `top_k` largest weights by signed value and zeroes the rest.
/// Ties go to the lowest index; `top_k >= len` keeps everything.
pub fn truncate_weights(alpha: &[f64], top_k: usize) -> Result<Vec<f64>> {
    if top_k == 0 {
        return Err(Error::InvalidParameter("top_k must be at least 1".into()));
    }
    if top_k >= alpha.len() {
        return Ok(alpha.to_vec());
    }
    let mut order: Vec<usize> = (0..alpha.len()).collect();
    order.sort_by(|&a, &b| alpha[b].total_cmp(&alpha[a]).then(a.cmp(&b)));
    let mut out = vec![0.0; alpha.len()];
    for &i in &order[..top_k] {
        out[i] = alpha[i];
    }
    Ok(out)
}

/// Ranks candidates by `score[c] = sum_j w_j D[c, j]`, ascending, ties by index.
/// `distances` has one row per candidate and one column per template; columns
/// with zero weight are never read.
pub fn rank_candidates(weights: &[f64], distances: &DMatrix<f64>) -> Result<Vec<(usize, f64)>> {
    if distances.nrows() == 0 {
        return Err(Error::EmptyCandidateSet);
    }
    if distances.ncols() != weights.len() {
        return Err(Error::SizeMismatch { expected: weights.len(), got: distances.ncols() });
    }
    let mut scored: Vec<(usize, f64)> = (0..distances.nrows())
        .map(|c| {
            let s = weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(j, w)| w * distances[(c, j)])
                .sum();
            (c, s)
        })
        .collect();
    scored.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    Ok(scored)
}

/// A fitted nonparametric predictor: inputs, their graphs and the ridge solver.
#[derive(Debug, Clone)]
pub struct KrrModel {
    kernel: Kernel,
    inputs: Vec<Vec<f64>>,
    templates: TemplateSet,
    solver: KrrSolver,
}

impl KrrModel {
    /// Fits on raw inputs with a gaussian or linear kernel.
    pub fn fit<G: MeasureGraph>(kernel: Kernel, inputs: Vec<Vec<f64>>, graphs: &[G], lambda: f64) -> Result<Self> {
        if matches!(kernel, Kernel::Precomputed) {
            return Err(Error::InvalidParameter("use KrrModel::fit_precomputed for a precomputed kernel".into()));
        }
        if inputs.len() != graphs.len() {
            return Err(Error::SizeMismatch { expected: inputs.len(), got: graphs.len() });
        }
        let gram = gram_matrix(&kernel, &inputs)?;
        let solver = fit_krr(gram, lambda)?;
        Ok(Self { kernel, inputs, templates: to_templates(graphs)?, solver })
    }

    /// Fits on a caller-supplied Gram matrix; predictions then take kernel rows.
    pub fn fit_precomputed<G: MeasureGraph>(gram: DMatrix<f64>, graphs: &[G], lambda: f64) -> Result<Self> {
        check_gram(&gram)?;
        if gram.nrows() != graphs.len() {
            return Err(Error::SizeMismatch { expected: gram.nrows(), got: graphs.len() });
        }
        let solver = fit_krr(gram, lambda)?;
        Ok(Self { kernel: Kernel::Precomputed, inputs: Vec::new(), templates: to_templates(graphs)?, solver })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn solver(&self) -> &KrrSolver {
        &self.solver
    }

    pub fn kernel_row(&self, x: &[f64]) -> Result<DVector<f64>> {
        kernel_vector(&self.kernel, &self.inputs, x)
    }

    /// Raw ridge weights `alpha(x)`.
    pub fn weights_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solver.weights(&self.kernel_row(x)?)?.iter().copied().collect())
    }

    pub fn weights_from_kernel_row(&self, kx: &DVector<f64>) -> Result<Vec<f64>> {
        Ok(self.solver.weights(kx)?.iter().copied().collect())
    }

    /// Barycenter of the training graphs under the `top_k` largest weights.
    pub fn predict_with_weights(
        &self,
        alpha: &[f64],
        n: usize,
        beta: f64,
        top_k: usize,
        opts: &BarycenterOptions,
    ) -> Result<BarycenterResult> {
        let kept = truncate_weights(alpha, top_k)?;
        solve_barycenter(&self.templates, &kept, n, beta, opts)
    }

    pub fn predict(&self, x: &[f64], n: usize, beta: f64, top_k: usize, opts: &BarycenterOptions) -> Result<BarycenterResult> {
        self.predict_with_weights(&self.weights_at(x)?, n, beta, top_k, opts)
    }

    /// Scores each candidate by `sum_j alpha_j FGW^2(candidate, z_j)` over the
    /// kept weights (raw, possibly negative) and ranks them ascending.
    pub fn decode_with_weights<G: MeasureGraph>(
        &self,
        alpha: &[f64],
        candidates: &[G],
        top_k: usize,
        beta: f64,
        fgw: &FgwOptions,
    ) -> Result<Vec<(usize, f64)>> {
        if candidates.is_empty() {
            return Err(Error::EmptyCandidateSet);
        }
        let kept = truncate_weights(alpha, top_k)?;
        let mut d = DMatrix::zeros(candidates.len(), self.templates.len());
        for (j, t) in self.templates.iter().enumerate() {
            if kept[j] == 0.0 {
                continue;
            }
            for (c, cand) in candidates.iter().enumerate() {
                d[(c, j)] = fgw_distance(cand, t, beta, fgw)?;
            }
        }
        rank_candidates(&kept, &d)
    }

    pub fn decode_candidates<G: MeasureGraph>(
        &self,
        x: &[f64],
        candidates: &[G],
        top_k: usize,
        beta: f64,
        fgw: &FgwOptions,
    ) -> Result<Vec<(usize, f64)>> {
        self.decode_with_weights(&self.weights_at(x)?, candidates, top_k, beta, fgw)
    }
}

fn to_templates<G: MeasureGraph>(graphs: &[G]) -> Result<TemplateSet> {
    let relaxed = graphs
        .iter()
        .map(|g| RelaxedGraph::new(g.adjacency().clone(), g.features().clone()))
        .collect::<Result<Vec<_>>>()?;
    TemplateSet::new(relaxed)
}

/// Hyperparameter grid for [`select_hyperparameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct KrrGrid {
    pub lambdas: Vec<f64>,
    /// Gaussian bandwidths; ignored for the linear kernel.
    pub gammas: Vec<f64>,
}

fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

impl Default for KrrGrid {
    fn default() -> Self {
        Self {
            lambdas: log_space(1e-6, 1e2, 9),
            gammas: log_space(1e-3, 1e2, 6),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrrSelection {
    pub kernel: Kernel,
    pub lambda: f64,
    /// Top-1 accuracy on the validation split.
    pub accuracy: f64,
}

/// Grid search over `(gamma, lambda)` by Top-1 accuracy on a seeded 1/5
/// validation split. The candidates for each validation input are all the
/// validation graphs. FGW distances between validation and training graphs
/// are computed once and reused across the grid. Ties keep the first grid
/// point (gammas outer, lambdas inner).
#[allow(clippy::too_many_arguments)]
pub fn select_hyperparameters<G: MeasureGraph>(
    linear: bool,
    inputs: &[Vec<f64>],
    graphs: &[G],
    grid: &KrrGrid,
    beta: f64,
    top_k: usize,
    fgw: &FgwOptions,
    seed: u64,
) -> Result<KrrSelection> {
    let n = inputs.len();
    if graphs.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: graphs.len() });
    }
    let n_val = (n / 5).max(1);
    if n < n_val + 1 {
        return Err(Error::InsufficientTrainingData { requested: n_val + 1, available: n });
    }
    if grid.lambdas.is_empty() || (!linear && grid.gammas.is_empty()) {
        return Err(Error::InvalidParameter("empty hyperparameter grid".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (val, train) = order.split_at(n_val);

    let mut d = DMatrix::zeros(val.len(), train.len());
    for (c, &vi) in val.iter().enumerate() {
        for (j, &ti) in train.iter().enumerate() {
            d[(c, j)] = fgw_distance(&graphs[vi], &graphs[ti], beta, fgw)?;
        }
    }
    let train_x: Vec<Vec<f64>> = train.iter().map(|&i| inputs[i].clone()).collect();

    let kernels: Vec<Kernel> = if linear {
        vec![Kernel::Linear]
    } else {
        grid.gammas.iter().map(|&g| Kernel::gaussian(g)).collect::<Result<_>>()?
    };
    let mut best: Option<KrrSelection> = None;
    for kernel in kernels {
        let gram = gram_matrix(&kernel, &train_x)?;
        for &lambda in &grid.lambdas {
            let solver = fit_krr(gram.clone(), lambda)?;
            let mut hits = 0;
            for (c, &vi) in val.iter().enumerate() {
                let kx = kernel_vector(&kernel, &train_x, &inputs[vi])?;
                let alpha: Vec<f64> = solver.weights(&kx)?.iter().copied().collect();
                let kept = truncate_weights(&alpha, top_k)?;
                if rank_candidates(&kept, &d)?[0].0 == c {
                    hits += 1;
                }
            }
            let accuracy = hits as f64 / val.len() as f64;
            if best.as_ref().is_none_or(|b| accuracy > b.accuracy) {
                best = Some(KrrSelection { kernel, lambda, accuracy });
            }
        }
    }
    Ok(best.expect("grid is nonempty"))
}

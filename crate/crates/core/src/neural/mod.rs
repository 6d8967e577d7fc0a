//! Neural conditional barycenters.
//!
//! An MLP maps an input to softmax weights over `M` learnable template graphs
//! and the prediction is their weighted FGW barycenter. Training differentiates
//! the FGW loss with every transport plan held fixed: the outer loss gradient
//! comes from [`grad_fixed_plan`] and is pulled back through the closed-form
//! barycenter maps, which are linear in the weights and in the templates.

mod adam;
mod mlp;
mod train;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::barycenter::{solve_barycenter, BarycenterOptions, BarycenterResult, TemplateSet};
use crate::error::{Error, Result};
use crate::fgw::{grad_fixed_plan, solve_fgw, FgwOptions, FgwProblem};
use crate::graph::{MeasureGraph, RelaxedGraph};
use crate::ot::TransportPlan;

pub use adam::{AdamConfig, AdamState};
pub use mlp::{softmax, softmax_backward, Mlp, MlpCache, MlpGrads};
pub use train::{train, Checkpoint, TemplateInit, TrainConfig, Trainer, CHECKPOINT_VERSION};

/// Solver settings used inside the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub bary_max_outer: usize,
    pub bary_tol: f64,
    pub fgw_max_iter: usize,
    pub fgw_tol: f64,
    /// Frank-Wolfe runs for the loss between prediction and target.
    pub loss_restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { bary_max_outer: 100, bary_tol: 1e-7, fgw_max_iter: 500, fgw_tol: 1e-9, loss_restarts: 1 }
    }
}

impl SolverConfig {
    /// Looser settings for the inner loop of training, where each step only
    /// needs a descent direction and plans are recomputed every epoch.
    pub fn training() -> Self {
        Self { bary_max_outer: 10, bary_tol: 1e-5, fgw_max_iter: 50, fgw_tol: 1e-6, loss_restarts: 1 }
    }

    pub fn fgw(&self) -> FgwOptions {
        FgwOptions { max_iter: self.fgw_max_iter, tol: self.fgw_tol, ..Default::default() }
    }

    pub fn barycenter(&self) -> BarycenterOptions {
        BarycenterOptions { max_outer: self.bary_max_outer, tol: self.bary_tol, fgw: self.fgw(), ..Default::default() }
    }

    pub fn loss(&self) -> FgwOptions {
        FgwOptions { restarts: self.loss_restarts, ..self.fgw() }
    }
}

/// MLP weight head plus learnable templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralModel {
    pub mlp: Mlp,
    pub template_c: Vec<DMatrix<f64>>,
    pub template_f: Vec<DMatrix<f64>>,
    pub beta: f64,
    /// Default output resolution.
    pub n_out: usize,
    /// Inputs are standardized as `(x - input_mean) / input_scale` before the MLP.
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
}

/// Everything the backward pass needs from one prediction.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub alpha: DVector<f64>,
    pub barycenter: BarycenterResult,
    cache: MlpCache,
}

/// Gradients of the mean batch loss.
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub mlp: MlpGrads,
    pub template_c: Vec<DMatrix<f64>>,
    pub template_f: Vec<DMatrix<f64>>,
}

impl NeuralModel {
    pub fn new(mlp: Mlp, templates: TemplateSet, beta: f64, n_out: usize) -> Result<Self> {
        if mlp.output_dim() != templates.len() {
            return Err(Error::SizeMismatch { expected: templates.len(), got: mlp.output_dim() });
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!("beta must lie in [0, 1], got {beta}")));
        }
        let d = mlp.input_dim();
        let (template_c, template_f) = templates.into_inner().into_iter().map(|t| t.into_parts()).unzip();
        Ok(Self { mlp, template_c, template_f, beta, n_out, input_mean: vec![0.0; d], input_scale: vec![1.0; d] })
    }

    pub fn num_templates(&self) -> usize {
        self.template_c.len()
    }

    pub fn templates(&self) -> Result<TemplateSet> {
        TemplateSet::new(
            self.template_c
                .iter()
                .zip(&self.template_f)
                .map(|(c, f)| RelaxedGraph::new(c.clone(), f.clone()))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    fn standardize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_mean.len() {
            return Err(Error::DimMismatch(self.input_mean.len(), x.len()));
        }
        Ok(x.iter()
            .zip(&self.input_mean)
            .zip(&self.input_scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    /// Softmax template weights `alpha(x)`.
    pub fn weights_at(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.mlp.weights_at(&self.standardize(x)?)
    }

    /// Barycenter prediction at resolution `n`, keeping the plans for the backward pass.
    pub fn forward(&self, x: &[f64], n: usize, opts: &BarycenterOptions) -> Result<ForwardPass> {
        let cache = self.mlp.forward(&self.standardize(x)?)?;
        let alpha = softmax(&cache.logits);
        let templates = self.templates()?;
        let barycenter = solve_barycenter(&templates, alpha.as_slice(), n, self.beta, opts)?;
        Ok(ForwardPass { alpha, barycenter, cache })
    }

    pub fn predict(&self, x: &[f64], n: usize, opts: &BarycenterOptions) -> Result<RelaxedGraph> {
        Ok(self.forward(x, n, opts)?.barycenter.graph)
    }

    /// Per-sample losses `FGW^2(f(x_i), y_i)` and the detached-plan gradients
    /// of their mean. Template gradients are left at zero unless `learn_templates`.
    pub fn loss_and_grads<G: MeasureGraph>(
        &self,
        batch: &[(&[f64], &G)],
        solver: &SolverConfig,
        learn_templates: bool,
    ) -> Result<(Vec<f64>, ModelGrads)> {
        if batch.is_empty() {
            return Err(Error::InvalidParameter("empty batch".into()));
        }
        let bary_opts = solver.barycenter();
        let loss_opts = solver.loss();
        let templates = self.templates()?;
        let scale = 1.0 / batch.len() as f64;
        let mut grads = ModelGrads {
            mlp: MlpGrads::zeros_like(&self.mlp),
            template_c: self.template_c.iter().map(|c| DMatrix::zeros(c.nrows(), c.ncols())).collect(),
            template_f: self.template_f.iter().map(|f| DMatrix::zeros(f.nrows(), f.ncols())).collect(),
        };
        let mut losses = Vec::with_capacity(batch.len());
        for (x, y) in batch {
            let fp = self.forward(x, self.n_out, &bary_opts)?;
            let z = &fp.barycenter.graph;
            let problem = FgwProblem::new(z, *y, self.beta)?;
            let outer = solve_fgw(&problem, &loss_opts)?;
            losses.push(outer.value);
            let (gc, gf) = grad_fixed_plan(&problem, &outer.plan)?;

            let plans = &fp.barycenter.plans;
            let dalpha = alpha_gradient(&templates, plans, self.n_out, &gc, &gf)?;
            let dlogits = softmax_backward(&fp.alpha, &DVector::from_vec(dalpha));
            grads.mlp.add_scaled(&self.mlp.backward(&fp.cache, &dlogits), scale);

            if learn_templates {
                let (dc, df) = template_gradients(fp.alpha.as_slice(), plans, self.n_out, &gc, &gf);
                for j in 0..self.num_templates() {
                    grads.template_c[j] += &dc[j] * scale;
                    grads.template_f[j] += &df[j] * scale;
                }
            }
        }
        Ok((losses, grads))
    }
}

/// The closed-form barycenter maps without normalization or clamping:
/// `C = n^2 sum_j a_j pi_j^T C_j pi_j`, `F = n sum_j a_j pi_j^T F_j`.
pub fn combine_templates(
    templates: &TemplateSet,
    alpha: &[f64],
    plans: &[TransportPlan],
    n: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_lengths(templates, plans, n)?;
    if alpha.len() != templates.len() {
        return Err(Error::SizeMismatch { expected: templates.len(), got: alpha.len() });
    }
    let nf = n as f64;
    let mut c = DMatrix::zeros(n, n);
    let mut f = DMatrix::zeros(n, templates.feature_dim());
    for ((t, p), &a) in templates.iter().zip(plans).zip(alpha) {
        let pt = p.matrix().transpose();
        c += &pt * t.adjacency() * p.matrix() * (a * nf * nf);
        f += &pt * t.features() * (a * nf);
    }
    Ok((c, f))
}

fn check_lengths(templates: &TemplateSet, plans: &[TransportPlan], n: usize) -> Result<()> {
    if plans.len() != templates.len() {
        return Err(Error::SizeMismatch { expected: templates.len(), got: plans.len() });
    }
    for (t, p) in templates.iter().zip(plans) {
        if p.shape() != (t.order(), n) {
            return Err(Error::ShapeMismatch(format!("plan {:?} for a {}-node template", p.shape(), t.order())));
        }
    }
    Ok(())
}

/// `dL/da_j = n^2 <G_C, pi_j^T C_j pi_j> + n <G_F, pi_j^T F_j>` for a loss whose
/// gradient on the barycenter is `(G_C, G_F)`.
pub fn alpha_gradient(
    templates: &TemplateSet,
    plans: &[TransportPlan],
    n: usize,
    gc: &DMatrix<f64>,
    gf: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    check_lengths(templates, plans, n)?;
    let nf = n as f64;
    Ok(templates
        .iter()
        .zip(plans)
        .map(|(t, p)| {
            let pt = p.matrix().transpose();
            let a = &pt * t.adjacency() * p.matrix();
            let b = &pt * t.features();
            nf * nf * gc.dot(&a) + nf * gf.dot(&b)
        })
        .collect())
}

/// `dL/dC_j = n^2 a_j pi_j G_C pi_j^T` and `dL/dF_j = n a_j pi_j G_F`.
pub fn template_gradients(
    alpha: &[f64],
    plans: &[TransportPlan],
    n: usize,
    gc: &DMatrix<f64>,
    gf: &DMatrix<f64>,
) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let nf = n as f64;
    plans
        .iter()
        .zip(alpha)
        .map(|(p, &a)| {
            let pm = p.matrix();
            (pm * gc * pm.transpose() * (a * nf * nf), pm * gf * (a * nf))
        })
        .unzip()
}

/// Draws templates: symmetric uniform `C` (upper triangle with diagonal,
/// mirrored) and uniform `F` in `[0, 1]`, or distinct training graphs.
pub fn init_templates<G: MeasureGraph, R: Rng + ?Sized>(
    sizes: &[usize],
    feature_dim: usize,
    mode: TemplateInit,
    training: &[G],
    rng: &mut R,
) -> Result<TemplateSet> {
    if sizes.is_empty() {
        return Err(Error::InvalidParameter("at least one template is required".into()));
    }
    match mode {
        TemplateInit::RandomUniform => {
            let mut out = Vec::with_capacity(sizes.len());
            for &n in sizes {
                if n == 0 {
                    return Err(Error::EmptyGraph);
                }
                let mut c = DMatrix::zeros(n, n);
                for i in 0..n {
                    for k in i..n {
                        let v: f64 = rng.random();
                        c[(i, k)] = v;
                        c[(k, i)] = v;
                    }
                }
                let f = DMatrix::from_fn(n, feature_dim, |_, _| rng.random::<f64>());
                out.push(RelaxedGraph::new(c, f)?);
            }
            TemplateSet::new(out)
        }
        TemplateInit::FromTraining => {
            let m = sizes.len();
            if m > training.len() {
                return Err(Error::InsufficientTrainingData { requested: m, available: training.len() });
            }
            let picked = sample(rng, training.len(), m);
            TemplateSet::new(
                picked
                    .iter()
                    .map(|i| RelaxedGraph::new(training[i].adjacency().clone(), training[i].features().clone()))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
    }
}

//! Weighted FGW barycenters.
//!
//! Given templates `z_j = (C_j, F_j)` and weights `w_j`, the barycenter of
//! resolution `n` minimizes `sum_j w_j FGW^2(z, z_j)` over relaxed graphs
//! with `n` nodes. The solver alternates between refreshing the couplings
//! `pi_j` (template `j` to barycenter, shape `n_j x n`) with Frank-Wolfe and
//! the closed-form minimizers for fixed couplings:
//!
//! ```text
//! C = n^2 sum_j w_j pi_j^T C_j pi_j
//! F = n   sum_j w_j pi_j^T F_j
//! ```

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fgw::{fgw_objective, solve_fgw, FgwInit, FgwOptions, FgwProblem};
use crate::graph::{symmetrize_and_clamp, MeasureGraph, RelaxedGraph};
use crate::ot::TransportPlan;

/// A nonempty dictionary of template graphs sharing one feature dimension.
/// Template sizes may differ.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    templates: Vec<RelaxedGraph>,
}

impl TemplateSet {
    pub fn new(templates: Vec<RelaxedGraph>) -> Result<Self> {
        let first = templates
            .first()
            .ok_or_else(|| Error::InvalidParameter("template set must not be empty".into()))?;
        let d = first.feature_dim();
        for t in &templates {
            if t.feature_dim() != d {
                return Err(Error::DimMismatch(d, t.feature_dim()));
            }
        }
        Ok(Self { templates })
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.templates[0].feature_dim()
    }

    pub fn get(&self, j: usize) -> &RelaxedGraph {
        &self.templates[j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &RelaxedGraph> {
        self.templates.iter()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.templates.iter().map(|t| t.order()).collect()
    }

    pub fn into_inner(self) -> Vec<RelaxedGraph> {
        self.templates
    }
}

/// Clamps negative weights to zero and rescales to unit sum.
pub fn normalize_weights(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.iter().any(|w| w.is_nan()) {
        return Err(Error::WeightError("weights contain NaN".into()));
    }
    let clamped: Vec<f64> = weights.iter().map(|w| w.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::WeightError(format!(
            "weights must have a positive finite sum after dropping negatives (sum {total})"
        )));
    }
    Ok(clamped.into_iter().map(|w| w / total).collect())
}

fn check_convex_weights(weights: &[f64], m: usize) -> Result<Vec<f64>> {
    if weights.len() != m {
        return Err(Error::SizeMismatch {
            expected: m,
            got: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| **w < 0.0) {
        return Err(Error::WeightError(format!("negative weight {w}")));
    }
    normalize_weights(weights)
}

fn check_plans(plans: &[TransportPlan], templates: &TemplateSet, n: usize) -> Result<()> {
    if plans.len() != templates.len() {
        return Err(Error::SizeMismatch {
            expected: templates.len(),
            got: plans.len(),
        });
    }
    for (plan, t) in plans.iter().zip(templates.iter()) {
        if plan.shape() != (t.order(), n) {
            return Err(Error::ShapeMismatch(format!(
                "plan {:?} does not map a {}-node template onto {n} nodes",
                plan.shape(),
                t.order()
            )));
        }
    }
    Ok(())
}

/// `C = n^2 sum_j w_j pi_j^T C_j pi_j`, symmetrized and clamped to `[0, 1]`.
pub fn update_structure(
    plans: &[TransportPlan],
    templates: &TemplateSet,
    weights: &[f64],
    n: usize,
) -> Result<DMatrix<f64>> {
    let w = check_convex_weights(weights, templates.len())?;
    check_plans(plans, templates, n)?;
    Ok(structure_barycenter(plans, templates, &w, n))
}

/// `F = n sum_j w_j pi_j^T F_j`: row `i` is a convex combination of template rows.
pub fn update_features(
    plans: &[TransportPlan],
    templates: &TemplateSet,
    weights: &[f64],
    n: usize,
) -> Result<DMatrix<f64>> {
    let w = check_convex_weights(weights, templates.len())?;
    check_plans(plans, templates, n)?;
    Ok(feature_barycenter(plans, templates, &w, n))
}

fn structure_barycenter(plans: &[TransportPlan], templates: &TemplateSet, w: &[f64], n: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(n, n);
    let scale = (n * n) as f64;
    for ((plan, t), &wj) in plans.iter().zip(templates.iter()).zip(w) {
        if wj == 0.0 {
            continue;
        }
        let pi = plan.matrix();
        c += pi.transpose() * t.adjacency() * pi * (wj * scale);
    }
    symmetrize_and_clamp(&mut c);
    c
}

fn feature_barycenter(plans: &[TransportPlan], templates: &TemplateSet, w: &[f64], n: usize) -> DMatrix<f64> {
    let mut f = DMatrix::zeros(n, templates.feature_dim());
    for ((plan, t), &wj) in plans.iter().zip(templates.iter()).zip(w) {
        if wj == 0.0 {
            continue;
        }
        f += plan.matrix().transpose() * t.features() * (wj * n as f64);
    }
    f
}

/// Starting point of the alternation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BarycenterInit {
    /// The largest-weight template resampled to `n` nodes through the monotone coupling.
    #[default]
    LargestWeight,
    /// Uniform random symmetric structure; every feature row is the weighted mean template row.
    Random,
}

#[derive(Debug, Clone)]
pub struct BarycenterOptions {
    pub max_outer: usize,
    pub tol: f64,
    pub init: BarycenterInit,
    pub seed: u64,
    /// Options for the per-template FGW solves (the `init` field is ignored).
    pub fgw: FgwOptions,
}

impl Default for BarycenterOptions {
    fn default() -> Self {
        Self {
            max_outer: 100,
            tol: 1e-7,
            init: BarycenterInit::LargestWeight,
            seed: 0,
            fgw: FgwOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarycenterResult {
    pub graph: RelaxedGraph,
    /// Coupling from each template to the barycenter (`n_j x n`). Templates
    /// with zero weight keep the product coupling.
    pub plans: Vec<TransportPlan>,
    /// Normalized weights actually used.
    pub weights: Vec<f64>,
    /// `sum_j w_j FGW^2(graph, z_j)` evaluated at `plans`.
    pub objective: f64,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Weighted FGW objective of `(c, f)` against the templates with given couplings.
pub fn barycenter_objective(
    c: &DMatrix<f64>,
    f: &DMatrix<f64>,
    templates: &TemplateSet,
    weights: &[f64],
    plans: &[TransportPlan],
    beta: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for ((t, &w), plan) in templates.iter().zip(weights).zip(plans) {
        if w == 0.0 {
            continue;
        }
        let problem = FgwProblem::from_parts(t.adjacency(), t.features(), c, f, beta)?;
        total += w * fgw_objective(&problem, plan)?;
    }
    Ok(total)
}

fn initial_graph(
    templates: &TemplateSet,
    w: &[f64],
    n: usize,
    opts: &BarycenterOptions,
) -> (DMatrix<f64>, DMatrix<f64>, Vec<Option<TransportPlan>>) {
    let m = templates.len();
    let mut warm: Vec<Option<TransportPlan>> = vec![None; m];
    match opts.init {
        BarycenterInit::LargestWeight => {
            let mut best = 0;
            for j in 1..m {
                if w[j] > w[best] {
                    best = j;
                }
            }
            let t = templates.get(best);
            let pi = TransportPlan::blow_up(t.order(), n);
            let p = pi.matrix();
            let mut c = p.transpose() * t.adjacency() * p * (n * n) as f64;
            symmetrize_and_clamp(&mut c);
            let f = p.transpose() * t.features() * n as f64;
            warm[best] = Some(pi);
            (c, f, warm)
        }
        BarycenterInit::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut c = DMatrix::zeros(n, n);
            for i in 0..n {
                for k in i..n {
                    let v: f64 = rng.random();
                    c[(i, k)] = v;
                    c[(k, i)] = v;
                }
            }
            let d = templates.feature_dim();
            let mut mean = DMatrix::zeros(1, d);
            for (t, &wj) in templates.iter().zip(w) {
                if wj > 0.0 {
                    mean += t.features().row_mean() * wj;
                }
            }
            let f = DMatrix::from_fn(n, d, |_, k| mean[(0, k)]);
            (c, f, warm)
        }
    }
}

/// Block-coordinate descent for the weighted FGW barycenter with `n` nodes.
///
/// Weights are clamped at zero and renormalized. Couplings are warm-started
/// from the previous outer iteration, so the objective trace never increases;
/// an increase beyond round-off stops the loop and keeps the previous iterate.
pub fn solve_barycenter(
    templates: &TemplateSet,
    weights: &[f64],
    n: usize,
    beta: f64,
    opts: &BarycenterOptions,
) -> Result<BarycenterResult> {
    if n == 0 {
        return Err(Error::InvalidParameter("barycenter needs at least one node".into()));
    }
    if weights.len() != templates.len() {
        return Err(Error::SizeMismatch {
            expected: templates.len(),
            got: weights.len(),
        });
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!("beta must lie in [0, 1], got {beta}")));
    }
    let w = normalize_weights(weights)?;
    let m = templates.len();
    let (mut c, mut f, mut warm) = initial_graph(templates, &w, n, opts);

    let mut plans: Vec<TransportPlan> = templates
        .iter()
        .map(|t| TransportPlan::product(t.order(), n))
        .collect();
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_outer {
        iterations += 1;
        let mut next_plans = plans.clone();
        for j in 0..m {
            if w[j] == 0.0 {
                continue;
            }
            let t = templates.get(j);
            let problem = FgwProblem::from_parts(t.adjacency(), t.features(), &c, &f, beta)?;
            let mut fgw_opts = opts.fgw.clone();
            fgw_opts.seed = opts.fgw.seed.wrapping_add(j as u64);
            fgw_opts.init = match warm[j].take() {
                Some(p) => {
                    // Random restarts only on the first solve of each template.
                    fgw_opts.restarts = 1;
                    FgwInit::Plan(p)
                }
                None => FgwInit::Product,
            };
            next_plans[j] = solve_fgw(&problem, &fgw_opts)?.plan;
        }
        let next_c = structure_barycenter(&next_plans, templates, &w, n);
        let next_f = feature_barycenter(&next_plans, templates, &w, n);
        let objective = barycenter_objective(&next_c, &next_f, templates, &w, &next_plans, beta)?;

        if let Some(&prev) = trace.last() {
            if objective > prev + 1e-12 {
                converged = true;
                break;
            }
        }
        let prev = trace.last().copied();
        c = next_c;
        f = next_f;
        plans = next_plans;
        for j in 0..m {
            warm[j] = Some(plans[j].clone());
        }
        trace.push(objective);
        if let Some(prev) = prev {
            let decrease = (prev - objective).max(0.0);
            if decrease <= opts.tol * prev.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
    }

    let objective = *trace.last().expect("at least one outer iteration");
    Ok(BarycenterResult {
        graph: RelaxedGraph::new(c, f)?,
        plans,
        weights: w,
        objective,
        objective_trace: trace,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fgw::fgw_distance;
    use nalgebra::dmatrix;

    fn random_relaxed(n: usize, d: usize, rng: &mut ChaCha8Rng, binary: bool) -> RelaxedGraph {
        let mut c = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in (i + 1)..n {
                let v = if binary {
                    if rng.random::<bool>() { 1.0 } else { 0.0 }
                } else {
                    rng.random::<f64>()
                };
                c[(i, k)] = v;
                c[(k, i)] = v;
            }
        }
        RelaxedGraph::new(c, DMatrix::from_fn(n, d, |_, _| rng.random::<f64>())).unwrap()
    }

    #[test]
    fn weight_normalization() {
        assert_eq!(normalize_weights(&[2.0, -1.0, 2.0]).unwrap(), vec![0.5, 0.0, 0.5]);
        assert!(normalize_weights(&[-1.0, 0.0]).is_err());
        assert!(normalize_weights(&[f64::NAN]).is_err());
    }

    #[test]
    fn structure_update_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t1 = random_relaxed(4, 1, &mut rng, false);
        let t2 = random_relaxed(4, 1, &mut rng, false);
        let id = TransportPlan::identity(4);

        let single = TemplateSet::new(vec![t1.clone()]).unwrap();
        let c = update_structure(std::slice::from_ref(&id), &single, &[1.0], 4).unwrap();
        assert!((&c - t1.adjacency()).amax() < 1e-14);

        let zeros = TemplateSet::new(vec![RelaxedGraph::new(DMatrix::zeros(3, 3), DMatrix::zeros(3, 1)).unwrap()])
            .unwrap();
        let c = update_structure(&[TransportPlan::product(3, 5)], &zeros, &[1.0], 5).unwrap();
        assert_eq!(c, DMatrix::zeros(5, 5));

        let pair = TemplateSet::new(vec![t1.clone(), t2.clone()]).unwrap();
        let c = update_structure(&[id.clone(), id.clone()], &pair, &[0.5, 0.5], 4).unwrap();
        let expected = (t1.adjacency() + t2.adjacency()) * 0.5;
        assert!((c - expected).amax() < 1e-14);

        assert!(matches!(
            update_structure(&[id.clone(), id.clone()], &pair, &[-0.5, 1.5], 4),
            Err(Error::WeightError(_))
        ));
        assert!(matches!(
            update_structure(&[id.clone(), id], &pair, &[0.0, 0.0], 4),
            Err(Error::WeightError(_))
        ));
    }

    #[test]
    fn feature_update_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t1 = random_relaxed(3, 2, &mut rng, false);
        let t2 = random_relaxed(3, 2, &mut rng, false);
        let id = TransportPlan::identity(3);
        let single = TemplateSet::new(vec![t1.clone()]).unwrap();
        let f = update_features(std::slice::from_ref(&id), &single, &[1.0], 3).unwrap();
        assert!((&f - t1.features()).amax() < 1e-14);

        let pair = TemplateSet::new(vec![t1.clone(), t2.clone()]).unwrap();
        let f = update_features(&[id.clone(), id], &pair, &[0.5, 0.5], 3).unwrap();
        assert!((f - (t1.features() + t2.features()) * 0.5).amax() < 1e-14);

        // constant rows stay constant under any coupling
        let row = dmatrix![0.3, -2.0];
        let constant = |n: usize| {
            RelaxedGraph::new(DMatrix::zeros(n, n), DMatrix::from_fn(n, 2, |_, k| row[(0, k)])).unwrap()
        };
        let set = TemplateSet::new(vec![constant(3), constant(5)]).unwrap();
        let plans = vec![TransportPlan::product(3, 4), TransportPlan::blow_up(5, 4)];
        let f = update_features(&plans, &set, &[0.3, 0.7], 4).unwrap();
        for i in 0..4 {
            assert!((f[(i, 0)] - 0.3).abs() < 1e-14 && (f[(i, 1)] + 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn feature_rows_stay_in_template_bounding_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set = TemplateSet::new(vec![random_relaxed(4, 2, &mut rng, false), random_relaxed(6, 2, &mut rng, false)])
            .unwrap();
        let res = solve_barycenter(&set, &[0.3, 0.7], 7, 0.5, &BarycenterOptions::default()).unwrap();
        for k in 0..2 {
            let lo = set.iter().flat_map(|t| t.features().column(k).iter().copied().collect::<Vec<_>>()).fold(f64::INFINITY, f64::min);
            let hi = set.iter().flat_map(|t| t.features().column(k).iter().copied().collect::<Vec<_>>()).fold(f64::NEG_INFINITY, f64::max);
            for v in res.graph.features().column(k).iter() {
                assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn single_template_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = random_relaxed(6, 1, &mut rng, true);
        let set = TemplateSet::new(vec![t.clone()]).unwrap();
        let res = solve_barycenter(&set, &[1.0], 6, 0.5, &BarycenterOptions::default()).unwrap();
        assert!(res.objective <= 1e-12);
        let d = fgw_distance(&res.graph, &t, 0.5, &FgwOptions::default()).unwrap();
        assert!(d <= 1e-6);
    }

    #[test]
    fn identical_templates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_relaxed(5, 1, &mut rng, true);
        let set = TemplateSet::new(vec![t.clone(), t.clone(), t]).unwrap();
        let res = solve_barycenter(&set, &[0.2, 0.5, 0.3], 5, 0.5, &BarycenterOptions::default()).unwrap();
        assert!(res.objective <= 1e-6);
    }

    #[test]
    fn beats_either_template_as_candidate() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let opts = BarycenterOptions::default();
        for _ in 0..5 {
            let t1 = random_relaxed(4, 1, &mut rng, true);
            let t2 = random_relaxed(4, 1, &mut rng, true);
            let set = TemplateSet::new(vec![t1.clone(), t2.clone()]).unwrap();
            let res = solve_barycenter(&set, &[0.5, 0.5], 4, 0.5, &opts).unwrap();
            // Template k as candidate scores 0.5 * FGW(t_k, t_other), measured
            // with the solver settings the barycenter uses for its plans.
            let d21 = fgw_distance(&t2, &t1, 0.5, &opts.fgw).unwrap();
            let d12 = fgw_distance(&t1, &t2, 0.5, &opts.fgw).unwrap();
            assert!(res.objective <= 0.5 * d12.min(d21) + 1e-9, "{} vs {d12} {d21}", res.objective);
            assert!(res.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn free_resolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let set = TemplateSet::new(vec![
            random_relaxed(5, 1, &mut rng, false),
            random_relaxed(8, 1, &mut rng, false),
            random_relaxed(3, 1, &mut rng, false),
        ])
        .unwrap();
        for n in [5, 20, 40] {
            let res = solve_barycenter(&set, &[0.2, 0.3, 0.5], n, 0.5, &BarycenterOptions::default()).unwrap();
            assert_eq!(res.graph.order(), n);
            assert!(res.plans.iter().all(|p| p.marginal_violation() < 1e-10));
            assert!(res.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn weight_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let set = TemplateSet::new(vec![random_relaxed(4, 1, &mut rng, true), random_relaxed(6, 1, &mut rng, true)])
            .unwrap();
        let a = solve_barycenter(&set, &[0.25, 0.75], 5, 0.5, &BarycenterOptions::default()).unwrap();
        let b = solve_barycenter(&set, &[1.0, 3.0], 5, 0.5, &BarycenterOptions::default()).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn random_init_is_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let set = TemplateSet::new(vec![random_relaxed(4, 1, &mut rng, true), random_relaxed(6, 1, &mut rng, true)])
            .unwrap();
        let opts = BarycenterOptions { init: BarycenterInit::Random, seed: 3, ..Default::default() };
        let a = solve_barycenter(&set, &[0.5, 0.5], 5, 0.5, &opts).unwrap();
        let b = solve_barycenter(&set, &[0.5, 0.5], 5, 0.5, &opts).unwrap();
        assert_eq!(a.graph, b.graph);
    }

    #[test]
    fn errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let set = TemplateSet::new(vec![random_relaxed(4, 1, &mut rng, true)]).unwrap();
        assert!(matches!(
            solve_barycenter(&set, &[-1.0], 4, 0.5, &BarycenterOptions::default()),
            Err(Error::WeightError(_))
        ));
        assert!(solve_barycenter(&set, &[1.0, 1.0], 4, 0.5, &BarycenterOptions::default()).is_err());
        assert!(TemplateSet::new(vec![]).is_err());
        let t2 = RelaxedGraph::new(DMatrix::zeros(2, 2), DMatrix::zeros(2, 3)).unwrap();
        assert!(TemplateSet::new(vec![set.get(0).clone(), t2]).is_err());
    }
}

//! Evaluation drivers: Top-k over candidate lists, the weight-truncation
//! sweep and the interpolation (d0) curves.

use std::time::Instant;

use fgw_core::barycenter::{solve_barycenter, BarycenterOptions};
use fgw_core::fgw::{fgw_distance, FgwOptions};
use fgw_core::graph::{LabeledGraph, MeasureGraph};
use fgw_core::krr::{rank_candidates, truncate_weights, KrrModel};
use nalgebra::DMatrix;

use crate::error::{usage, CliResult};
use crate::model::Predictor;

/// One test input with its true graph and the candidates to rank.
#[derive(Debug, Clone)]
pub struct TestCase {
    pub x: Vec<f64>,
    pub truth: LabeledGraph,
    pub candidates: Vec<LabeledGraph>,
}

impl TestCase {
    /// Position of the true graph in the candidate list.
    pub fn truth_index(&self) -> Option<usize> {
        self.candidates.iter().position(|c| *c == self.truth)
    }
}

/// Top-k accuracies, in increasing `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub topk: Vec<(usize, f64)>,
    pub hits: Vec<usize>,
    pub evaluated: usize,
    /// Test points whose candidate list lacks the truth (always misses).
    pub truth_missing: usize,
    pub seconds: f64,
}

/// Shared solver settings for evaluation.
#[derive(Debug, Clone)]
pub struct EvalParams {
    pub beta: f64,
    pub fgw: FgwOptions,
    pub bary: BarycenterOptions,
    /// Number of kept weights; `None` keeps all.
    pub top_k: Option<usize>,
    /// Output size for barycenter predictions; `None` uses the model default.
    pub n_out: Option<usize>,
}

fn keep(limit: Option<usize>, len: usize) -> usize {
    limit.unwrap_or(len).max(1)
}

/// `FGW^2(candidate c, template j)` for the templates where `needed[j]`;
/// other columns stay zero.
pub fn krr_distances(
    model: &KrrModel,
    candidates: &[LabeledGraph],
    needed: &[bool],
    beta: f64,
    fgw: &FgwOptions,
) -> CliResult<DMatrix<f64>> {
    let mut d = DMatrix::zeros(candidates.len(), model.templates().len());
    for (j, t) in model.templates().iter().enumerate() {
        if !needed[j] {
            continue;
        }
        for (c, cand) in candidates.iter().enumerate() {
            d[(c, j)] = fgw_distance(cand, t, beta, fgw)?;
        }
    }
    Ok(d)
}

/// Rank position of `truth` in an ordering, if present.
fn rank_of(order: &[usize], truth: Option<usize>) -> Option<usize> {
    truth.and_then(|t| order.iter().position(|&c| c == t))
}

/// Tallies rank positions into accuracies at each `k`.
pub fn accuracies(ranks: &[Option<usize>], ks: &[usize]) -> (Vec<(usize, f64)>, Vec<usize>) {
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let total = ranks.len().max(1) as f64;
    let hits: Vec<usize> = ks.iter().map(|&k| ranks.iter().filter(|r| r.is_some_and(|r| r < k)).count()).collect();
    (ks.iter().zip(&hits).map(|(&k, &h)| (k, h as f64 / total)).collect(), hits)
}

/// Candidate ordering for one test point.
pub fn rank_case(predictor: &Predictor, case: &TestCase, params: &EvalParams) -> CliResult<Vec<usize>> {
    if case.candidates.is_empty() {
        return Err(fgw_core::Error::EmptyCandidateSet.into());
    }
    match predictor {
        Predictor::Krr { model, .. } => {
            let alpha = model.weights_at(&case.x)?;
            let kept = truncate_weights(&alpha, keep(params.top_k, alpha.len()))?;
            let needed: Vec<bool> = kept.iter().map(|w| *w != 0.0).collect();
            let d = krr_distances(model, &case.candidates, &needed, params.beta, &params.fgw)?;
            Ok(rank_candidates(&kept, &d)?.into_iter().map(|(c, _)| c).collect())
        }
        Predictor::Neural { model, .. } => {
            let alpha: Vec<f64> = model.weights_at(&case.x)?.iter().copied().collect();
            let kept = truncate_weights(&alpha, keep(params.top_k, alpha.len()))?;
            let n = params.n_out.unwrap_or(model.n_out);
            let pred = solve_barycenter(&model.templates()?, &kept, n, model.beta, &params.bary)?.graph;
            let mut d = DMatrix::zeros(case.candidates.len(), 1);
            for (c, cand) in case.candidates.iter().enumerate() {
                d[(c, 0)] = fgw_distance(&pred, cand, params.beta, &params.fgw)?;
            }
            Ok(rank_candidates(&[1.0], &d)?.into_iter().map(|(c, _)| c).collect())
        }
    }
}

pub fn eval_topk(predictor: &Predictor, cases: &[TestCase], ks: &[usize], params: &EvalParams) -> CliResult<EvalReport> {
    if ks.contains(&0) {
        return usage("k values must be positive");
    }
    let start = Instant::now();
    let mut ranks = Vec::with_capacity(cases.len());
    let mut missing = 0;
    for case in cases {
        let truth = case.truth_index();
        if truth.is_none() {
            missing += 1;
        }
        ranks.push(rank_of(&rank_case(predictor, case, params)?, truth));
    }
    let (topk, hits) = accuracies(&ranks, ks);
    Ok(EvalReport { topk, hits, evaluated: cases.len(), truth_missing: missing, seconds: start.elapsed().as_secs_f64() })
}

/// Top-k accuracy for each truncation level. Distances are computed once per
/// test point and reused across levels.
pub fn weights_sweep(
    model: &KrrModel,
    cases: &[TestCase],
    keeps: &[Option<usize>],
    ks: &[usize],
    params: &EvalParams,
) -> CliResult<Vec<(Option<usize>, EvalReport)>> {
    if ks.contains(&0) {
        return usage("k values must be positive");
    }
    let start = Instant::now();
    let mut ranks = vec![Vec::with_capacity(cases.len()); keeps.len()];
    let mut missing = 0;
    for case in cases {
        let truth = case.truth_index();
        if truth.is_none() {
            missing += 1;
        }
        let alpha = model.weights_at(&case.x)?;
        let widest = keeps.iter().map(|k| keep(*k, alpha.len())).max().unwrap_or(1);
        let needed: Vec<bool> = truncate_weights(&alpha, widest)?.iter().map(|w| *w != 0.0).collect();
        let d = krr_distances(model, &case.candidates, &needed, params.beta, &params.fgw)?;
        for (slot, limit) in ranks.iter_mut().zip(keeps) {
            let kept = truncate_weights(&alpha, keep(*limit, alpha.len()))?;
            let order: Vec<usize> = rank_candidates(&kept, &d)?.into_iter().map(|(c, _)| c).collect();
            slot.push(rank_of(&order, truth));
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    Ok(keeps
        .iter()
        .zip(ranks)
        .map(|(limit, r)| {
            let (topk, hits) = accuracies(&r, ks);
            (*limit, EvalReport { topk, hits, evaluated: cases.len(), truth_missing: missing, seconds })
        })
        .collect())
}

/// Per-point interpolation statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpPoint {
    /// Training graph with the largest weight.
    pub closest: usize,
    /// `FGW^2(closest training graph, truth)`.
    pub d0: f64,
    /// `FGW^2(barycenter prediction, truth)`.
    pub fgw_pred: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpRow {
    pub d_min: f64,
    pub count: usize,
    pub mean_d0: f64,
    pub mean_fgw_pred: f64,
}

pub fn interp_points(model: &KrrModel, cases: &[TestCase], params: &EvalParams) -> CliResult<Vec<InterpPoint>> {
    let mut out = Vec::with_capacity(cases.len());
    for case in cases {
        let alpha = model.weights_at(&case.x)?;
        let closest = (0..alpha.len()).fold(0, |b, j| if alpha[j] > alpha[b] { j } else { b });
        let d0 = fgw_distance(model.templates().get(closest), &case.truth, params.beta, &params.fgw)?;
        let n = params.n_out.unwrap_or(case.truth.order());
        let kept = truncate_weights(&alpha, keep(params.top_k, alpha.len()))?;
        let pred = solve_barycenter(model.templates(), &kept, n, params.beta, &params.bary)?.graph;
        let fgw_pred = fgw_distance(&pred, &case.truth, params.beta, &params.fgw)?;
        out.push(InterpPoint { closest, d0, fgw_pred });
    }
    Ok(out)
}

/// Means over the points with `d0 > d_min`; empty buckets produce no row.
pub fn interp_curve(points: &[InterpPoint], d_mins: &[f64]) -> Vec<InterpRow> {
    d_mins
        .iter()
        .filter_map(|&d_min| {
            let kept: Vec<&InterpPoint> = points.iter().filter(|p| p.d0 > d_min).collect();
            if kept.is_empty() {
                return None;
            }
            let count = kept.len();
            Some(InterpRow {
                d_min,
                count,
                mean_d0: kept.iter().map(|p| p.d0).sum::<f64>() / count as f64,
                mean_fgw_pred: kept.iter().map(|p| p.fgw_pred).sum::<f64>() / count as f64,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_tally() {
        let ranks = [Some(0), Some(3), None, Some(12)];
        let (topk, hits) = accuracies(&ranks, &[20, 1, 10, 10]);
        assert_eq!(topk, vec![(1, 0.25), (10, 0.5), (20, 0.75)]);
        assert_eq!(hits, vec![1, 2, 3]);
    }

    proptest::proptest! {
        #[test]
        fn accuracies_are_fractions_nondecreasing_in_k(
            ranks in proptest::collection::vec(proptest::option::of(0usize..30), 0..40),
            ks in proptest::collection::vec(1usize..40, 1..6),
        ) {
            let (topk, hits) = accuracies(&ranks, &ks);
            proptest::prop_assert_eq!(topk.len(), hits.len());
            for w in topk.windows(2) {
                proptest::prop_assert!(w[0].0 < w[1].0 && w[0].1 <= w[1].1);
            }
            for (k, acc) in topk {
                proptest::prop_assert!((0.0..=1.0).contains(&acc));
                let oracle = ranks.iter().filter(|r| matches!(r, Some(r) if *r < k)).count();
                proptest::prop_assert_eq!(acc, oracle as f64 / ranks.len().max(1) as f64);
            }
        }
    }

    #[test]
    fn curve_filters_strictly_and_skips_empty_buckets() {
        let p = |d0, f| InterpPoint { closest: 0, d0, fgw_pred: f };
        let pts = [p(0.1, 0.05), p(0.3, 0.1), p(0.5, 0.2)];
        let rows = interp_curve(&pts, &[-1.0, 0.3, 0.6]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].count, 3);
        assert!((rows[0].mean_d0 - 0.3).abs() < 1e-15);
        assert_eq!(rows[1], InterpRow { d_min: 0.3, count: 1, mean_d0: 0.5, mean_fgw_pred: 0.2 });
    }
}

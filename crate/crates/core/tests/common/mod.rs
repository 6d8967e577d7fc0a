//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use fgw_core::graph::LabeledGraph;
use nalgebra::DMatrix;
use rand::Rng;

/// Minimum of `<cost, pi>` over the vertices of the uniform transportation
/// polytope, by brute force over all spanning-tree bases.
pub fn vertex_enumeration_min(cost: &DMatrix<f64>) -> f64 {
    let (n1, n2) = cost.shape();
    let cells: Vec<(usize, usize)> = (0..n1).flat_map(|i| (0..n2).map(move |j| (i, j))).collect();
    let k = n1 + n2 - 1;
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(k);
    subsets(&cells, k, 0, &mut chosen, &mut |basis| {
        if let Some(flow) = basis_flows(basis, n1, n2) {
            let v: f64 = basis.iter().zip(&flow).map(|(&(i, j), f)| cost[(i, j)] * f).sum();
            best = best.min(v);
        }
    });
    best
}

fn subsets<F: FnMut(&[(usize, usize)])>(
    cells: &[(usize, usize)],
    k: usize,
    start: usize,
    chosen: &mut Vec<(usize, usize)>,
    visit: &mut F,
) {
    if chosen.len() == k {
        visit(chosen);
        return;
    }
    let need = k - chosen.len();
    for idx in start..=cells.len() - need {
        chosen.push(cells[idx]);
        subsets(cells, k, idx + 1, chosen, visit);
        chosen.pop();
    }
}

/// Flows on a basis by peeling leaves; `None` if the cells do not form a
/// spanning tree or a flow is negative.
fn basis_flows(basis: &[(usize, usize)], n1: usize, n2: usize) -> Option<Vec<f64>> {
    let mut supply: Vec<f64> = vec![1.0 / n1 as f64; n1];
    let mut demand: Vec<f64> = vec![1.0 / n2 as f64; n2];
    let mut flow = vec![f64::NAN; basis.len()];
    let mut open: Vec<bool> = vec![true; basis.len()];
    for _ in 0..basis.len() {
        // find a node (row or column) with exactly one open incident cell
        let mut picked = None;
        'search: for r in 0..n1 {
            let inc: Vec<usize> = (0..basis.len()).filter(|&e| open[e] && basis[e].0 == r).collect();
            if inc.len() == 1 {
                picked = Some((inc[0], true));
                break 'search;
            }
        }
        if picked.is_none() {
            for c in 0..n2 {
                let inc: Vec<usize> = (0..basis.len()).filter(|&e| open[e] && basis[e].1 == c).collect();
                if inc.len() == 1 {
                    picked = Some((inc[0], false));
                    break;
                }
            }
        }
        let (e, row_leaf) = picked?;
        let (i, j) = basis[e];
        let f = if row_leaf { supply[i] } else { demand[j] };
        flow[e] = f;
        supply[i] -= f;
        demand[j] -= f;
        open[e] = false;
    }
    let residual = supply.iter().chain(&demand).map(|v| v.abs()).fold(0.0, f64::max);
    if residual > 1e-12 || flow.iter().any(|f| *f < -1e-12) {
        return None;
    }
    Some(flow)
}

/// `T[i, j] = sum_{k, l} (C1[i, k] - C2[j, l])^2 pi[k, l]`, straight from the definition.
pub fn naive_gw_tensor(c1: &DMatrix<f64>, c2: &DMatrix<f64>, pi: &DMatrix<f64>) -> DMatrix<f64> {
    let (n1, n2) = pi.shape();
    DMatrix::from_fn(n1, n2, |i, j| {
        let mut s = 0.0;
        for k in 0..n1 {
            for l in 0..n2 {
                let d = c1[(i, k)] - c2[(j, l)];
                s += d * d * pi[(k, l)];
            }
        }
        s
    })
}

/// Erdos-Renyi graph with integer labels in `0..labels` as a 1-column feature.
pub fn random_graph<R: Rng>(n: usize, p: f64, labels: usize, rng: &mut R) -> LabeledGraph {
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                c[(i, j)] = 1.0;
                c[(j, i)] = 1.0;
            }
        }
    }
    let f = DMatrix::from_fn(n, 1, |_, _| rng.random_range(0..labels) as f64);
    LabeledGraph::new(c, f).unwrap()
}

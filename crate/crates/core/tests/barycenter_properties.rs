mod common;

use common::random_graph;
use fgw_core::barycenter::{solve_barycenter, BarycenterOptions, TemplateSet};
use fgw_core::fgw::{fgw_distance, FgwOptions};
use fgw_core::graph::{permute, LabeledGraph, Permutation};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn set(graphs: &[LabeledGraph]) -> TemplateSet {
    TemplateSet::new(graphs.iter().map(|g| g.to_relaxed()).collect()).unwrap()
}

#[test]
fn single_template_fixed_point_across_seeds() {
    let check = FgwOptions { restarts: 8, ..Default::default() };
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..=8);
        let t = random_graph(n, 0.5, 3, &mut rng);
        let opts = BarycenterOptions { seed, ..Default::default() };
        let res = solve_barycenter(&set(std::slice::from_ref(&t)), &[1.0], n, 0.5, &opts).unwrap();
        assert!(res.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(fgw_distance(&res.graph, &t, 0.5, &check).unwrap() <= 1e-6, "seed {seed}");
    }
}

#[test]
fn reordering_templates_keeps_the_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let graphs: Vec<LabeledGraph> = (0..3).map(|_| random_graph(rng.random_range(3..=6), 0.5, 2, &mut rng)).collect();
        let w = [0.5, 0.3, 0.2];
        let order = [2, 0, 1];
        let shuffled: Vec<LabeledGraph> = order.iter().map(|&k| graphs[k].clone()).collect();
        let shuffled_w: Vec<f64> = order.iter().map(|&k| w[k]).collect();
        let a = solve_barycenter(&set(&graphs), &w, 5, 0.5, &BarycenterOptions::default()).unwrap();
        let b = solve_barycenter(&set(&shuffled), &shuffled_w, 5, 0.5, &BarycenterOptions::default()).unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-9, "{} vs {}", a.objective, b.objective);
    }
}

#[test]
fn relabelling_template_nodes_keeps_the_single_template_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let check = FgwOptions { restarts: 8, ..Default::default() };
    for _ in 0..10 {
        let n = rng.random_range(3..=6);
        let g = random_graph(n, 0.5, 2, &mut rng);
        let h = permute(&g, &Permutation::random(n, &mut rng)).unwrap();
        let a = solve_barycenter(&set(std::slice::from_ref(&g)), &[1.0], n, 0.5, &BarycenterOptions::default()).unwrap();
        let b = solve_barycenter(&set(std::slice::from_ref(&h)), &[1.0], n, 0.5, &BarycenterOptions::default()).unwrap();
        assert!(fgw_distance(&a.graph, &b.graph, 0.5, &check).unwrap() <= 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn barycenter_invariants(seed in any::<u64>(), m in 1usize..4, n in 1usize..10, beta in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let graphs: Vec<LabeledGraph> = (0..m).map(|_| random_graph(rng.random_range(1..=6), 0.5, 3, &mut rng)).collect();
        let w: Vec<f64> = (0..m).map(|_| rng.random_range(-0.2..1.0)).collect();
        prop_assume!(w.iter().any(|v| *v > 0.0));
        let res = solve_barycenter(&set(&graphs), &w, n, beta, &BarycenterOptions::default()).unwrap();
        prop_assert!(res.objective_trace.windows(2).all(|p| p[1] <= p[0]));
        prop_assert!(res.plans.iter().all(|p| p.marginal_violation() <= 1e-10));
        let c = res.graph.into_parts().0;
        prop_assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(&c, &c.transpose());
        prop_assert!((res.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

//! Integration tests over the public API: end-to-end pipeline behavior on
//! planted graphs, error surfaces, and property checks on the exported
//! primitives.

use nalgebra::DMatrix;
use proptest::prelude::*;

use sparse_lingam::admm::soft_threshold;
use sparse_lingam::postprocess::{final_truncate, prune_to_dag};
use sparse_lingam::{
    assign_weights_and_noises, evaluate, gen_er_graph, gen_sf_graph, is_acyclic, run_pipeline,
    sample_data, AlphaGrid, Dataset, Error, GraphKind, GraphTruth, NoiseKind, NoiseMenu,
    PipelineConfig, PipelineResult,
};

fn planted(seed: u64) -> GraphTruth {
    let skeleton = gen_er_graph(5, 5.0, seed).unwrap();
    assign_weights_and_noises(&skeleton, GraphKind::Er, NoiseMenu::Only(NoiseKind::Laplace), seed)
}

fn quick_config(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.grid = AlphaGrid::log_spaced(10, 1e-3, 0.31622776601683794).unwrap();
    cfg.folds = 5;
    cfg.seed = seed;
    cfg
}

fn run_planted(seed: u64) -> (PipelineResult, GraphTruth) {
    let truth = planted(seed);
    let data = sample_data(&truth, 800, seed).unwrap();
    let result = run_pipeline(&data, &quick_config(seed)).unwrap();
    (result, truth)
}

#[test]
fn pipeline_recovers_a_planted_graph() {
    let (result, truth) = run_planted(41);
    let report = evaluate(&result.estimate.b, &truth.b_true).unwrap();
    assert_eq!(report.shd, 0, "estimated structure should match the planted graph");
    assert_eq!(report.fdr, 0.0);
    assert_eq!(report.tpr, 1.0);
    assert!(report.distance < 0.2, "weights off by {}", report.distance);
    assert!(result.estimate.acyclic);
    assert!(result.final_state.converged);
}

#[test]
fn pipeline_is_bitwise_deterministic() {
    let (a, _) = run_planted(42);
    let (b, _) = run_planted(42);
    assert_eq!(a.estimate.b, b.estimate.b);
    assert_eq!(a.estimate.causal_order, b.estimate.causal_order);
    assert_eq!(a.selected_alpha.to_bits(), b.selected_alpha.to_bits());
    assert_eq!(a.cutoff_at_selected.to_bits(), b.cutoff_at_selected.to_bits());
}

#[test]
fn fixed_alpha_bypasses_cross_validation() {
    let truth = planted(43);
    let data = sample_data(&truth, 800, 43).unwrap();
    let mut cfg = quick_config(43);
    cfg.fixed_alpha = Some(0.05);
    let result = run_pipeline(&data, &cfg).unwrap();
    assert!(result.cv.is_none(), "no cross-validation report for a fixed α");
    assert_eq!(result.selected_alpha, 0.05);
}

#[test]
fn constant_columns_are_rejected() {
    let mut values = DMatrix::from_fn(50, 3, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
    for i in 0..50 {
        values[(i, 1)] = 2.5;
    }
    let data = Dataset::from_matrix(values).unwrap();
    match run_pipeline(&data, &quick_config(0)) {
        Err(Error::DegenerateColumn { col }) => assert_eq!(col, 2, "columns are 1-based"),
        other => panic!("expected a degenerate-column error, got {other:?}"),
    }
}

#[test]
fn rank_deficient_data_is_rejected() {
    // third column is an exact linear combination of the first two
    let values = DMatrix::from_fn(60, 3, |i, j| {
        let a = ((i * 13 + 5) % 17) as f64 - 8.0;
        let b = ((i * 29 + 3) % 23) as f64 - 11.0;
        match j {
            0 => a,
            1 => b,
            _ => 0.5 * a - 1.5 * b,
        }
    });
    let data = Dataset::from_matrix(values).unwrap();
    match run_pipeline(&data, &quick_config(0)) {
        Err(Error::RankDeficient { .. }) => {}
        other => panic!("expected a rank-deficiency error, got {other:?}"),
    }
}

proptest! {
    /// Soft-thresholding: exact zero inside the threshold, exact shift
    /// outside, never grows magnitude, never flips sign.
    #[test]
    fn soft_threshold_contract(x in -1e3..1e3f64, t in 0.0..1e3f64) {
        let y = soft_threshold(x, t);
        if x.abs() <= t {
            prop_assert_eq!(y, 0.0);
        } else {
            prop_assert_eq!(y, x - t * x.signum());
        }
        prop_assert!(y.abs() <= x.abs());
        prop_assert!(y * x >= 0.0);
    }

    /// Random-graph generators only ever emit DAGs.
    #[test]
    fn er_graphs_are_acyclic(d in 2usize..12, frac in 0.0..1.0f64, seed in any::<u64>()) {
        let slots = (d * (d - 1) / 2) as f64;
        let g = gen_er_graph(d, frac * slots, seed).unwrap();
        prop_assert!(is_acyclic(&g).0);
    }

    /// Scale-free graphs attach min(m, i) earlier nodes to node i.
    #[test]
    fn sf_graphs_have_the_deterministic_edge_count(
        d in 2usize..12,
        m in 1usize..4,
        seed in any::<u64>(),
    ) {
        prop_assume!(m < d);
        let g = gen_sf_graph(d, m, seed).unwrap();
        prop_assert!(is_acyclic(&g).0);
        let expected: usize = (1..d).map(|i| m.min(i)).sum();
        let count = g.iter().filter(|v| **v != 0.0).count();
        prop_assert_eq!(count, expected);
    }

    /// Log-spaced grids are ascending, bounded, and indexable.
    #[test]
    fn alpha_grids_are_ascending_and_bounded(
        count in 2usize..60,
        lo in 1e-4..1e-2f64,
        span in 1.5..90.0f64, // keeps hi = lo·span below the α < 1 bound
    ) {
        let hi = lo * span;
        let grid = AlphaGrid::log_spaced(count, lo, hi).unwrap();
        let values = grid.values();
        prop_assert_eq!(values.len(), count);
        prop_assert!(values.windows(2).all(|w| w[0] < w[1]));
        prop_assert!((values[0] - lo).abs() <= 1e-12 * lo);
        prop_assert!((values[count - 1] - hi).abs() <= 1e-9 * hi);
        for (i, &v) in values.iter().enumerate() {
            prop_assert_eq!(grid.nearest_index(v), i);
        }
    }

    /// Truncation zeroes exactly the strictly-sub-ω₂ entries and leaves
    /// every other bit untouched.
    #[test]
    fn truncation_touches_only_small_entries(
        entries in proptest::collection::vec(-2.0..2.0f64, 16),
        omega2 in 0.0..1.0f64,
    ) {
        let b = DMatrix::from_row_slice(4, 4, &entries);
        let out = final_truncate(&b, omega2);
        for (x, y) in b.iter().zip(out.iter()) {
            if x.abs() < omega2 {
                prop_assert_eq!(*y, 0.0);
            } else {
                prop_assert_eq!(y.to_bits(), x.to_bits());
            }
        }
    }

    /// Pruning always lands on a DAG and is the identity on DAGs.
    #[test]
    fn pruning_lands_on_dags(
        entries in proptest::collection::vec(-1.0..1.0f64, 25),
        keep in proptest::collection::vec(proptest::bool::weighted(0.4), 25),
    ) {
        let mut b = DMatrix::from_row_slice(5, 5, &entries);
        for (i, k) in keep.iter().enumerate() {
            if !k {
                b[(i / 5, i % 5)] = 0.0;
            }
        }
        for i in 0..5 {
            b[(i, i)] = 0.0;
        }
        let was_acyclic = is_acyclic(&b).0;
        let (pruned, cutoff, _) = prune_to_dag(&b);
        prop_assert!(is_acyclic(&pruned).0);
        if was_acyclic {
            prop_assert_eq!(pruned, b);
            prop_assert_eq!(cutoff, 0.0);
        } else {
            prop_assert!(cutoff > 0.0);
        }
    }

    /// Synthetic sampling is a pure function of (truth, n, seed).
    #[test]
    fn sampling_is_reproducible(seed in any::<u64>()) {
        let truth = planted(seed);
        let a = sample_data(&truth, 40, seed).unwrap();
        let b = sample_data(&truth, 40, seed).unwrap();
        prop_assert_eq!(a.values, b.values);
    }
}

//! Scratch diagnostics: per-replicate metrics for the statistical criteria.

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use sparse_lingam::{
    assign_weights_and_noises, evaluate, gen_er_graph, run_pipeline, sample_data, slice_windows,
    GraphKind, GraphTruth, NoiseMenu, PipelineConfig,
};

fn mixed_truth(d: usize, expected_edges: f64, seed: u64) -> GraphTruth {
    let slots = (d * (d - 1) / 2) as f64;
    let skeleton = gen_er_graph(d, expected_edges.min(slots), seed).unwrap();
    assign_weights_and_noises(&skeleton, GraphKind::Er, NoiseMenu::Mixed, seed)
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "c8".into());
    match which.as_str() {
        "c8" => probe_c8(),
        "c9" => probe_c9(),
        "c11" => probe_c11(),
        "c11prof" => probe_c11prof(),
        "paths" => probe_paths(),
        "hot" => probe_hot(),
        other => eprintln!("unknown probe {other}"),
    }
}

/// Micro-profile of the per-outer-iteration work at AR(1) scale.
fn probe_hot() {
    use sparse_lingam::admm::{random_orthogonal, SolverConfig};
    use sparse_lingam::ica::{
        log_likelihood, natural_gradient, select_density, GradWorkspace,
    };
    let d = 24;
    let n = 900;
    let truth = mixed_truth(d, d as f64, 77);
    let data = sample_data(&truth, n, 77).unwrap();
    let std = sparse_lingam::standardize(&data).unwrap();
    let wh = sparse_lingam::whiten(&std).unwrap();
    let w = random_orthogonal(d, 3);
    let p = random_orthogonal(d, 4);
    let m = wh.demix_to_original(&w);
    let u = nalgebra::DMatrix::zeros(d, d);
    let kinds = vec![sparse_lingam::DensityKind::SuperGaussian; d];
    let cfg = SolverConfig::default();
    let mut work = GradWorkspace::default();
    let reps = 200;

    let t = Instant::now();
    for _ in 0..reps {
        let g = natural_gradient(&w, &p, &m, &u, &kinds, &wh, &cfg, &mut work);
        std::hint::black_box(&g);
    }
    println!("natural_gradient      {:>8.1?}/call", t.elapsed() / reps);

    let t = Instant::now();
    let mut y = nalgebra::DMatrix::zeros(n, d);
    for _ in 0..reps {
        wh.z.mul_to(&w.transpose(), &mut y);
        std::hint::black_box(&y);
    }
    println!("matmul Z*Wt           {:>8.1?}/call", t.elapsed() / reps);

    let t = Instant::now();
    for _ in 0..reps {
        let ll = log_likelihood(&w, &wh.z, &kinds).unwrap();
        std::hint::black_box(ll);
    }
    println!("log_likelihood        {:>8.1?}/call", t.elapsed() / reps);

    let col: Vec<f64> = (0..n).map(|i| y[(i, 0)]).collect();
    let t = Instant::now();
    for _ in 0..reps {
        for _ in 0..d {
            let s = select_density(&col);
            std::hint::black_box(s);
        }
    }
    println!("select_density (x{d})  {:>8.1?}/call-set", t.elapsed() / reps);
}

/// Dump the per-fold CV paths for one replicate to judge how flat the
/// held-out likelihood is near each fold's argmax.
fn probe_paths() {
    let seed: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(4);
    let null_model = std::env::args().nth(3).as_deref() == Some("null");
    let edges = if null_model { 0.0 } else { 10.0 };
    let truth = mixed_truth(10, edges, seed);
    let data = sample_data(&truth, 1000, seed).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.seed = seed;
    let result = run_pipeline(&data, &cfg).unwrap();
    let diag = result.diagnostics();
    let grid = cfg.grid.values().to_vec();
    let argmax = diag.fold_alpha.unwrap();
    let paths = diag.cv_paths.unwrap();
    println!("seed {seed} null={null_model} selected={:.5}", diag.selected_alpha);
    for (k, path) in paths.iter().enumerate() {
        let best = path.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // drop from the fold max at a few reference grid points
        let probe_alphas = [0.001, 0.011790375839260394, 0.021205750411109544, 0.0381639249399848, 0.04827042366377372];
        let mut drops = String::new();
        for pa in probe_alphas {
            let i = grid
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - pa).abs().partial_cmp(&(b.1 - pa).abs()).unwrap())
                .unwrap()
                .0;
            drops.push_str(&format!(" d({:.4})={:+.4}", grid[i], path[i] - best));
        }
        println!("fold {k}: argmax={:.5} max={:.4}{drops}", argmax[k], best);
    }
}

fn probe_c8() {
    for seed in 0..6u64 {
        let started = Instant::now();
        let truth = mixed_truth(10, 10.0, seed);
        let data = sample_data(&truth, 1000, seed).unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.seed = seed;
        umax_override(&mut cfg);
        match run_pipeline(&data, &cfg) {
            Ok(result) => {
                let m = evaluate(&result.estimate.b, &truth.b_true).unwrap();
                let diag = result.diagnostics();
                println!(
                    "c8 seed {seed}: tpr={:.3} fdr={:.3} shd={} sel_a={:.5} used_a={:.5} \
                     cut_sel={:.4} cut_app={:.4} conv={} acyc={} iters={} {:.1?}",
                    m.tpr,
                    m.fdr,
                    m.shd,
                    diag.selected_alpha,
                    diag.alpha_used,
                    diag.cutoff_at_selected,
                    diag.cutoff_applied,
                    diag.final_converged,
                    diag.acyclic,
                    diag.outer_iterations,
                    started.elapsed()
                );
            }
            Err(e) => println!("c8 seed {seed}: ERROR {e} after {:.1?}", started.elapsed()),
        }
    }
}

fn probe_c9() {
    for seed in 900..906u64 {
        let started = Instant::now();
        let truth = mixed_truth(10, 0.0, seed);
        let data = sample_data(&truth, 1000, seed).unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.seed = seed;
        umax_override(&mut cfg);
        match run_pipeline(&data, &cfg) {
            Ok(result) => {
                let edges = result.estimate.b.iter().filter(|v| **v != 0.0).count();
                let max_abs = result.estimate.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let diag = result.diagnostics();
                println!(
                    "c9 seed {seed}: edges={edges} max|b|={max_abs:.4} sel_a={:.5} \
                     used_a={:.5} cut_sel={:.4} conv={} {:.1?}",
                    diag.selected_alpha,
                    diag.alpha_used,
                    diag.cutoff_at_selected,
                    diag.final_converged,
                    started.elapsed()
                );
            }
            Err(e) => println!("c9 seed {seed}: ERROR {e} after {:.1?}", started.elapsed()),
        }
    }
}

fn probe_c11() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let laplace_scale = 0.5f64.sqrt();
    let total = 24 * 1000 + 240;
    let mut series = Vec::with_capacity(total);
    let mut x = 0.0f64;
    for _ in 0..total {
        let u: f64 = rng.gen_range(-0.5..0.5);
        let eps = -laplace_scale * u.signum() * (1.0 - 2.0 * u.abs()).ln();
        x = 0.7 * x + eps;
        series.push(x);
    }
    let data = slice_windows(&series[240..], 24, false).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.seed = 11;
    match run_pipeline(&data, &cfg) {
        Ok(result) => {
            let b = &result.estimate.b;
            let sub = (0..23).filter(|&j| b[(j + 1, j)] != 0.0).count();
            let spurious = (0..24)
                .flat_map(|j| (0..24).map(move |k| (j, k)))
                .filter(|&(j, k)| j != k + 1 && b[(j, k)] != 0.0)
                .count();
            let sub_min = (0..23)
                .map(|j| b[(j + 1, j)].abs())
                .fold(f64::INFINITY, f64::min);
            let diag = result.diagnostics();
            println!(
                "c11: sub={sub}/23 spurious={spurious}/553 min|subdiag|={sub_min:.4} \
                 sel_a={:.5} used_a={:.5} cut_sel={:.4} conv={} {:.1?}",
                diag.selected_alpha,
                diag.alpha_used,
                diag.cutoff_at_selected,
                diag.final_converged,
                started.elapsed()
            );
        }
        Err(e) => println!("c11: ERROR {e} after {:.1?}", started.elapsed()),
    }
}

/// Apply a `PROBE_UMAX` env override so solver cost can be A/B'd.
fn umax_override(cfg: &mut PipelineConfig) {
    if let Ok(v) = std::env::var("PROBE_UMAX") {
        if let Ok(u) = v.parse() {
            cfg.solver.u_max = u;
        }
    }
}

/// Phase-timed c11: where do the seconds go (pilot / CV / escalation)?
fn probe_c11prof() {
    use sparse_lingam::select::{adaptive_weights, cv_select_alpha, escalate_alpha, initial_estimate, CvConfig};
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let laplace_scale = 0.5f64.sqrt();
    let total = 24 * 1000 + 240;
    let mut series = Vec::with_capacity(total);
    let mut x = 0.0f64;
    for _ in 0..total {
        let u: f64 = rng.gen_range(-0.5..0.5);
        let eps = -laplace_scale * u.signum() * (1.0 - 2.0 * u.abs()).ln();
        x = 0.7 * x + eps;
        series.push(x);
    }
    let data = slice_windows(&series[240..], 24, false).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.seed = 11;
    umax_override(&mut cfg);
    println!("u_max={}", cfg.solver.u_max);

    let t = Instant::now();
    let std = sparse_lingam::standardize(&data).unwrap();
    let wh = sparse_lingam::whiten(&std).unwrap();
    println!("standardize+whiten   {:>8.1?}", t.elapsed());

    let t = Instant::now();
    let (m0, pilot_state) = initial_estimate(&wh, &cfg.solver, cfg.seed).unwrap();
    println!(
        "pilot                {:>8.1?}  iters={} conv={}",
        t.elapsed(),
        pilot_state.outer_iterations,
        pilot_state.converged
    );

    let weights = adaptive_weights(&m0, cfg.solver.gamma, cfg.weight_cap).unwrap();
    let cv_cfg = CvConfig { folds: cfg.folds, seed: cfg.seed, warm_from_pilot: true };

    let t = Instant::now();
    let report = cv_select_alpha(&std, &cfg.grid, &cv_cfg, &cfg.solver, &weights, Some(&m0)).unwrap();
    println!(
        "cv (10x50)           {:>8.1?}  selected={:.5} fold_alpha={:?}",
        t.elapsed(),
        report.selected_alpha,
        report.fold_alpha.iter().map(|a| (a * 1e5).round() / 1e5).collect::<Vec<_>>()
    );

    let scales: Vec<f64> = std.column_scales.iter().copied().collect();
    let t = Instant::now();
    let outcome = escalate_alpha(
        &wh,
        &cfg.grid,
        report.selected_alpha,
        &cfg.solver,
        &weights,
        &scales,
        cfg.omega1,
        cfg.omega2,
        Some(&m0),
        cfg.seed,
    )
    .unwrap();
    println!(
        "escalation           {:>8.1?}  used={:.5} cut_sel={:.4} iters(final)={}",
        t.elapsed(),
        outcome.alpha_used,
        outcome.cutoff_at_selected,
        outcome.state.outer_iterations
    );

    let b = &outcome.estimate.b;
    let sub = (0..23).filter(|&j| b[(j + 1, j)] != 0.0).count();
    let spurious = (0..24)
        .flat_map(|j| (0..24).map(move |k| (j, k)))
        .filter(|&(j, k)| j != k + 1 && b[(j, k)] != 0.0)
        .count();
    println!("total                {:>8.1?}  sub={sub}/23 spurious={spurious}/553", started.elapsed());
}

//! The four subcommands: simulate, fit, benchmark, heatmap.

use std::fs;
use std::path::{Path, PathBuf};


use serde_json::json;

use sparse_lingam::{
    evaluate, gen_er_graph, gen_sf_graph, load_csv, load_series, run_pipeline, sample_data,
    slice_windows, AlphaGrid, CsvOptions, Dataset, Error, GraphKind, GraphTruth, NoiseKind,
    NoiseMenu, PipelineConfig, PipelineResult, Result, SolverConfig,
};

use crate::args::{
    parse_alpha_grid, resolve_seed, BenchmarkArgs, FitArgs, GraphArg, HeatmapArgs, NoiseArg,
    SimulateArgs, SolverArgs,
};
use crate::io;

fn ensure_dir(dir: &str) -> Result<PathBuf> {
    let path = PathBuf::from(dir);
    fs::create_dir_all(&path)?;
    Ok(path)
}

fn noise_menu(arg: NoiseArg) -> NoiseMenu {
    match arg {
        NoiseArg::Mixed => NoiseMenu::Mixed,
        NoiseArg::Laplace => NoiseMenu::Only(NoiseKind::Laplace),
        NoiseArg::Uniform => NoiseMenu::Only(NoiseKind::Uniform),
        NoiseArg::Exponential => NoiseMenu::Only(NoiseKind::Exponential),
    }
}

fn graph_name(arg: GraphArg) -> &'static str {
    match arg {
        GraphArg::Er => "er",
        GraphArg::Sf => "sf",
    }
}

fn noise_name(arg: NoiseArg) -> &'static str {
    match arg {
        NoiseArg::Mixed => "mixed",
        NoiseArg::Laplace => "laplace",
        NoiseArg::Uniform => "uniform",
        NoiseArg::Exponential => "exponential",
    }
}

/// Draws a ground truth for the configured graph family. ER defaults to an
/// expected edge count equal to d when --edges is not given.
fn make_truth(
    d: usize,
    graph: GraphArg,
    edges: Option<f64>,
    sf_m: usize,
    noise: NoiseArg,
    seed: u64,
) -> Result<GraphTruth> {
    let (skeleton, kind) = match graph {
        GraphArg::Er => (gen_er_graph(d, edges.unwrap_or(d as f64), seed)?, GraphKind::Er),
        GraphArg::Sf => {
            if edges.is_some() {
                return Err(Error::Parameter(
                    "--edges applies to the er family; use --sf-m for sf".into(),
                ));
            }
            (gen_sf_graph(d, sf_m, seed)?, GraphKind::Sf)
        }
    };
    Ok(sparse_lingam::assign_weights_and_noises(&skeleton, kind, noise_menu(noise), seed))
}

fn truth_json(truth: &GraphTruth, n: usize, graph: GraphArg, noise: NoiseArg) -> serde_json::Value {
    let d = truth.b_true.nrows();
    let mut edges = Vec::new();
    for j in 0..d {
        for k in 0..d {
            let w = truth.b_true[(j, k)];
            if w != 0.0 {
                edges.push(json!({ "from": k + 1, "to": j + 1, "weight": w }));
            }
        }
    }
    edges.sort_by_key(|e| {
        (e["from"].as_u64().unwrap_or(0), e["to"].as_u64().unwrap_or(0))
    });
    json!({
        "d": d,
        "n": n,
        "graph": graph_name(graph),
        "noise_menu": noise_name(noise),
        "seed": truth.seed,
        "edges": edges,
        "noise": truth.noise_specs.iter().map(|(kind, variance)| json!({
            "kind": match kind {
                NoiseKind::Laplace => "laplace",
                NoiseKind::Uniform => "uniform",
                NoiseKind::Exponential => "exponential",
            },
            "variance": variance,
        })).collect::<Vec<_>>(),
        "b_true": io::matrix_to_json(&truth.b_true),
    })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let out = ensure_dir(&args.output_dir)?;
    let seed = resolve_seed(args.seed);
    let truth = make_truth(args.d, args.graph, args.edges, args.sf_m, args.noise, seed)?;
    let data = sample_data(&truth, args.n, seed)?;
    io::write_data_csv(&out.join("data.csv"), &data.values)?;
    io::write_json(&out.join("truth.json"), &truth_json(&truth, args.n, args.graph, args.noise))?;
    let edge_count = truth.b_true.iter().filter(|v| **v != 0.0).count();
    println!(
        "simulated d={} n={} graph={} edges={} seed={} -> {}",
        args.d,
        args.n,
        graph_name(args.graph),
        edge_count,
        seed,
        out.display()
    );
    Ok(0)
}

/// Builds the pipeline configuration shared by fit and benchmark.
fn pipeline_config(solver: &SolverArgs, seed: u64) -> Result<PipelineConfig> {
    let (lo, hi, count) = parse_alpha_grid(&solver.alpha_grid).ok_or_else(|| {
        Error::Parameter(format!("--alpha-grid wants lo:hi:count, got {:?}", solver.alpha_grid))
    })?;
    let grid = AlphaGrid::log_spaced(count, lo, hi)?;
    let mut cfg = PipelineConfig::default();
    cfg.solver = SolverConfig {
        lambda: solver.lambda,
        alpha: 0.0, // per-stage values are set inside the pipeline
        gamma: solver.gamma,
        rho: solver.rho,
        eta: solver.eta,
        u_max: solver.u_max,
        max_outer: solver.max_outer,
        ..SolverConfig::default()
    };
    cfg.solver.validate()?;
    cfg.grid = grid;
    cfg.folds = solver.k_folds;
    cfg.fixed_alpha = solver.alpha;
    cfg.omega1 = solver.omega1;
    cfg.omega2 = solver.omega2;
    cfg.seed = seed;
    if let Some(a) = solver.alpha {
        if !(0.0..1.0).contains(&a) {
            return Err(Error::Parameter(format!("--alpha must lie in [0, 1), got {a}")));
        }
    }
    Ok(cfg)
}

fn solver_config_json(solver: &SolverArgs, seed: u64) -> serde_json::Value {
    json!({
        "lambda": solver.lambda,
        "alpha": solver.alpha,
        "alpha_grid": solver.alpha_grid,
        "k_folds": solver.k_folds,
        "omega1": solver.omega1,
        "omega2": solver.omega2,
        "gamma": solver.gamma,
        "rho": solver.rho,
        "eta": solver.eta,
        "u_max": solver.u_max,
        "max_outer": solver.max_outer,
        "jobs": solver.jobs,
        "seed": seed,
    })
}

pub fn init_thread_pool(jobs: usize) -> Result<()> {
    if jobs == 0 {
        return Err(Error::Parameter("--jobs must be at least 1".into()));
    }
    // a second init in the same process (tests) is harmless: the pool is
    // already running with the first configuration
    let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    Ok(())
}

fn load_input(args: &FitArgs) -> Result<Dataset> {
    let path = Path::new(&args.input);
    let options = CsvOptions { delimiter: args.delimiter as u8, has_header: !args.no_header };
    match args.window {
        Some(len) => {
            let series = load_series(path, options)?;
            slice_windows(&series, len, args.log1p)
        }
        None => {
            if args.log1p {
                return Err(Error::Parameter("--log1p requires --window".into()));
            }
            load_csv(path, options)
        }
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<i32> {
    init_thread_pool(args.solver.jobs)?;
    let out = ensure_dir(&args.output_dir)?;
    let seed = resolve_seed(args.seed);
    let data = load_input(args)?;
    let cfg = pipeline_config(&args.solver, seed)?;
    let result = run_pipeline(&data, &cfg)?;

    write_fit_outputs(&out, &result, &json!({
        "command": "fit",
        "input": args.input,
        "window": args.window,
        "log1p": args.log1p,
        "solver": solver_config_json(&args.solver, seed),
    }))?;

    println!(
        "fit d={} n={} selected_alpha={} alpha_used={} cutoff={} acyclic={} -> {}",
        data.n_vars(),
        data.n_samples(),
        io::format_float(result.selected_alpha),
        io::format_float(result.alpha_used),
        io::format_float(result.estimate.cutoff_applied),
        result.estimate.acyclic,
        out.display()
    );
    Ok(if result.final_state.converged { 0 } else { 4 })
}

fn write_fit_outputs(out: &Path, result: &PipelineResult, config: &serde_json::Value) -> Result<()> {
    io::write_matrix_csv(&out.join("b_hat.csv"), &result.estimate.b)?;
    io::write_order(&out.join("causal_order.txt"), &result.estimate.causal_order)?;
    let diag = result.diagnostics();
    let diag_value = serde_json::to_value(&diag).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    io::write_json(&out.join("diagnostics.json"), &json!({
        "config": config,
        "diagnostics": diag_value,
    }))?;
    Ok(())
}

/// Median and Tukey-style quartiles of a sorted copy: the median averages
/// the two middle values for even counts; q1/q3 are medians of the lower
/// and upper halves (halves exclude the middle element for odd counts).
fn five_numbers(values: &[f64]) -> serde_json::Value {
    if values.is_empty() {
        return json!(null);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("metrics are finite"));
    let med = |v: &[f64]| -> f64 {
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    };
    let n = sorted.len();
    let half = n / 2;
    json!({
        "min": sorted[0],
        "q1": med(&sorted[..half]),
        "median": med(&sorted),
        "q3": med(&sorted[n - half..]),
        "max": sorted[n - 1],
    })
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> Result<i32> {
    init_thread_pool(args.solver.jobs)?;
    if args.replicates == 0 {
        return Err(Error::Parameter("--replicates must be at least 1".into()));
    }
    let out = ensure_dir(&args.output_dir)?;
    let master = resolve_seed(args.seed);

    let mut csv = String::from(
        "replicate,seed,status,distance,shd,fdr,tpr,selected_alpha,alpha_used,\
         cutoff_at_selected,cutoff_applied,initial_converged,final_converged\n",
    );
    let mut ok_rows: Vec<(f64, f64, f64, f64)> = Vec::new(); // distance, shd, fdr, tpr
    let mut cutoffs_at_selected: Vec<f64> = Vec::new();
    let mut failures = 0usize;

    for r in 0..args.replicates {
        let seed = master.wrapping_add(r as u64);
        let row = (|| -> Result<(PipelineResult, sparse_lingam::MetricsReport)> {
            let truth = make_truth(args.d, args.graph, args.edges, args.sf_m, args.noise, seed)?;
            let data = sample_data(&truth, args.n, seed)?;
            let mut cfg = pipeline_config(&args.solver, seed)?;
            cfg.seed = seed;
            let result = run_pipeline(&data, &cfg)?;
            let report = evaluate(&result.estimate.b, &truth.b_true)?;
            Ok((result, report))
        })();
        match row {
            Ok((result, report)) => {
                csv.push_str(&format!(
                    "{r},{seed},ok,{},{},{},{},{},{},{},{},{},{}\n",
                    io::format_float(report.distance),
                    report.shd,
                    io::format_float(report.fdr),
                    io::format_float(report.tpr),
                    io::format_float(result.selected_alpha),
                    io::format_float(result.alpha_used),
                    io::format_float(result.cutoff_at_selected),
                    io::format_float(result.estimate.cutoff_applied),
                    result.initial_converged,
                    result.final_state.converged,
                ));
                ok_rows.push((report.distance, report.shd as f64, report.fdr, report.tpr));
                cutoffs_at_selected.push(result.cutoff_at_selected);
            }
            Err(e) => {
                failures += 1;
                csv.push_str(&format!("{r},{seed},failed: {e},,,,,,,,,,\n"));
            }
        }
    }
    fs::write(out.join("metrics.csv"), &csv)?;

    let col = |i: usize| -> Vec<f64> {
        ok_rows
            .iter()
            .map(|row| match i {
                0 => row.0,
                1 => row.1,
                2 => row.2,
                _ => row.3,
            })
            .collect()
    };
    let cutoff_ok = cutoffs_at_selected.iter().filter(|c| **c <= args.solver.omega1).count();
    let summary = json!({
        "config": {
            "command": "benchmark",
            "d": args.d,
            "n": args.n,
            "graph": graph_name(args.graph),
            "edges": args.edges,
            "sf_m": args.sf_m,
            "noise": noise_name(args.noise),
            "replicates": args.replicates,
            "solver": solver_config_json(&args.solver, master),
        },
        "replicates": args.replicates,
        "succeeded": ok_rows.len(),
        "failed": failures,
        "distance": five_numbers(&col(0)),
        "shd": five_numbers(&col(1)),
        "fdr": five_numbers(&col(2)),
        "tpr": five_numbers(&col(3)),
        "cutoff_at_selected_within_omega1": cutoff_ok,
    });
    io::write_json(&out.join("summary.json"), &summary)?;

    println!(
        "benchmark d={} n={} replicates={} ok={} failed={} -> {}",
        args.d,
        args.n,
        args.replicates,
        ok_rows.len(),
        failures,
        out.display()
    );
    Ok(0)
}

pub fn cmd_heatmap(args: &HeatmapArgs) -> Result<i32> {
    let out = ensure_dir(&args.output_dir)?;
    let m = io::read_matrix_csv(Path::new(&args.input), args.delimiter)?;
    if m.nrows() != m.ncols() {
        return Err(Error::Parameter(format!(
            "heatmap wants a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if args.cell_size == 0 {
        return Err(Error::Parameter("--cell-size must be at least 1".into()));
    }
    io::write_heatmap_ppm(&out.join("heatmap.ppm"), &m, args.cell_size)?;
    println!("heatmap {}x{} -> {}", m.nrows(), m.ncols(), out.join("heatmap.ppm").display());
    Ok(0)
}

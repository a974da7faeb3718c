//! End-to-end estimation: standardize → whiten → pilot fit → adaptive
//! weights → α selection (cross-validated or fixed) → escalation →
//! post-processing back on the original scale.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::admm::{SolverConfig, SolverState};
use crate::data::{standardize, whiten, Dataset};
use crate::error::Result;
use crate::ica::DensityKind;
use crate::postprocess::AdjacencyEstimate;
use crate::select::{
    adaptive_weights, cv_select_alpha, escalate_alpha, initial_estimate, AlphaGrid, CvConfig,
    CvReport,
};

/// Full configuration for one estimation run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub solver: SolverConfig,
    pub grid: AlphaGrid,
    /// Number of cross-validation folds.
    pub folds: usize,
    /// Skip cross-validation and start escalation from this α.
    pub fixed_alpha: Option<f64>,
    /// Escalation stops once the pruning cutoff is ≤ ω₁.
    pub omega1: f64,
    /// Final truncation threshold ω₂.
    pub omega2: f64,
    /// Cap for adaptive weights at zero pilot entries.
    pub weight_cap: f64,
    /// Master seed: drives fold assignment and solver initialization.
    pub seed: u64,
    /// Start each fold sweep and the escalation sweep from the pilot
    /// estimate instead of a random orthogonal matrix.
    pub warm_from_pilot: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            grid: AlphaGrid::default_grid(),
            folds: 10,
            fixed_alpha: None,
            omega1: 0.05,
            omega2: 0.05,
            weight_cap: 1e6,
            seed: 0,
            warm_from_pilot: true,
        }
    }
}

/// Everything an estimation run produces, including the diagnostics a
/// caller needs to judge the fit.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    /// Final adjacency estimate, expressed in the input's original units.
    pub estimate: AdjacencyEstimate,
    /// α the sweep started from (CV-selected or fixed).
    pub selected_alpha: f64,
    /// α of the returned fit (> selected when escalation stepped).
    pub alpha_used: f64,
    /// Pruning cutoff observed at the selected α before any escalation.
    pub cutoff_at_selected: f64,
    /// Escalation exhausted the grid with the cutoff still above ω₁.
    pub cutoff_violating: bool,
    /// Cross-validation report (absent under a fixed α).
    pub cv: Option<CvReport>,
    /// Whether the pilot (initial-estimate) fit converged.
    pub initial_converged: bool,
    /// Solver state of the returned fit.
    pub final_state: SolverState,
    /// Per-variable density families of the returned fit.
    pub densities: Vec<DensityKind>,
    /// Column means of the input data (original units).
    pub column_means: Vec<f64>,
    /// Column standard deviations of the input data (original units).
    pub column_scales: Vec<f64>,
}

/// Diagnostics in a serialization-friendly shape.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub selected_alpha: f64,
    pub alpha_used: f64,
    pub cutoff_at_selected: f64,
    pub cutoff_applied: f64,
    pub cutoff_violating: bool,
    pub acyclic: bool,
    pub truncated: bool,
    pub degenerate_permutation: bool,
    pub initial_converged: bool,
    pub final_converged: bool,
    pub outer_iterations: usize,
    pub densities: Vec<DensityKind>,
    pub density_identifiable: Vec<bool>,
    pub fold_alpha: Option<Vec<f64>>,
    pub cv_paths: Option<Vec<Vec<f64>>>,
    pub residual_history: Vec<(f64, f64)>,
    pub column_means: Vec<f64>,
    pub column_scales: Vec<f64>,
}

impl PipelineResult {
    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics {
            selected_alpha: self.selected_alpha,
            alpha_used: self.alpha_used,
            cutoff_at_selected: self.cutoff_at_selected,
            cutoff_applied: self.estimate.cutoff_applied,
            cutoff_violating: self.cutoff_violating,
            acyclic: self.estimate.acyclic,
            truncated: self.estimate.truncated,
            degenerate_permutation: self.estimate.degenerate_permutation,
            initial_converged: self.initial_converged,
            final_converged: self.final_state.converged,
            outer_iterations: self.final_state.outer_iterations,
            densities: self.densities.clone(),
            density_identifiable: self.final_state.identifiable.clone(),
            fold_alpha: self.cv.as_ref().map(|c| c.fold_alpha.clone()),
            cv_paths: self.cv.as_ref().map(|c| c.paths.clone()),
            residual_history: self.final_state.residual_history.clone(),
            column_means: self.column_means.clone(),
            column_scales: self.column_scales.clone(),
        }
    }
}

/// Runs the whole estimation pipeline on raw (unstandardized) data.
pub fn run_pipeline(data: &Dataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    let std = standardize(data)?;
    let wh = whiten(&std)?;
    let (m0, pilot_state) = initial_estimate(&wh, &cfg.solver, cfg.seed)?;
    let weights = adaptive_weights(&m0, cfg.solver.gamma, cfg.weight_cap)?;

    let (selected_alpha, cv) = match cfg.fixed_alpha {
        Some(alpha) => (alpha, None),
        None => {
            let cv_cfg = CvConfig {
                folds: cfg.folds,
                seed: cfg.seed,
                warm_from_pilot: cfg.warm_from_pilot,
            };
            let report = cv_select_alpha(
                &std,
                &cfg.grid,
                &cv_cfg,
                &cfg.solver,
                &weights,
                cfg.warm_from_pilot.then_some(&m0),
            )?;
            let alpha = report.selected_alpha;
            (alpha, Some(report))
        }
    };

    let scales: Vec<f64> = std.column_scales.iter().copied().collect();
    let outcome = escalate_alpha(
        &wh,
        &cfg.grid,
        selected_alpha,
        &cfg.solver,
        &weights,
        &scales,
        cfg.omega1,
        cfg.omega2,
        cfg.warm_from_pilot.then_some(&m0),
        cfg.seed,
    )?;

    let means: Vec<f64> = std.column_means.iter().copied().collect();
    Ok(PipelineResult {
        estimate: outcome.estimate,
        selected_alpha,
        alpha_used: outcome.alpha_used,
        cutoff_at_selected: outcome.cutoff_at_selected,
        cutoff_violating: outcome.cutoff_violating,
        cv,
        initial_converged: pilot_state.converged,
        densities: outcome.state.kinds.clone(),
        final_state: outcome.state,
        column_means: means,
        column_scales: scales,
    })
}

/// Maps a demixing estimate from standardized to original units:
/// column k is divided by the k-th standard deviation. Exact zeros stay
/// exactly zero.
pub fn unstandardize_demixing(m_std: &DMatrix<f64>, column_scales: &[f64]) -> DMatrix<f64> {
    let mut m = m_std.clone();
    for c in 0..m.ncols() {
        let inv = 1.0 / column_scales[c];
        for r in 0..m.nrows() {
            if m[(r, c)] != 0.0 {
                m[(r, c)] *= inv;
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{
        assign_weights_and_noises, evaluate, gen_er_graph, sample_data, GraphKind, NoiseMenu,
    };

    fn chain_truth(d: usize, weight: f64) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(d, d);
        for j in 1..d {
            b[(j, j - 1)] = weight;
        }
        b
    }

    #[test]
    fn pipeline_recovers_two_variable_chain() {
        let b_true = chain_truth(2, 0.8);
        let truth = crate::synth::GraphTruth {
            b_true: b_true.clone(),
            graph_kind: GraphKind::Er,
            noise_specs: vec![
                (crate::synth::NoiseKind::Laplace, 1.0),
                (crate::synth::NoiseKind::Uniform, 1.5),
            ],
            seed: 0,
        };
        let data = sample_data(&truth, 2000, 7).unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.grid = AlphaGrid::log_spaced(8, 1e-3, 0.3).unwrap();
        cfg.folds = 5;
        cfg.seed = 7;
        cfg.solver.max_outer = 3000;
        let result = run_pipeline(&data, &cfg).unwrap();
        let b = &result.estimate.b;
        assert!(result.estimate.acyclic);
        assert!(
            (b[(1, 0)] - 0.8).abs() < 0.1,
            "chain weight recovered as {}, want ≈ 0.8",
            b[(1, 0)]
        );
        assert_eq!(b[(0, 1)], 0.0, "no reverse edge");
        assert_eq!(result.estimate.causal_order, vec![0, 1]);
    }

    #[test]
    fn pipeline_fixed_alpha_skips_cv() {
        let b_true = chain_truth(3, 1.0);
        let truth = crate::synth::GraphTruth {
            b_true,
            graph_kind: GraphKind::Er,
            noise_specs: vec![(crate::synth::NoiseKind::Laplace, 1.0); 3],
            seed: 1,
        };
        let data = sample_data(&truth, 1000, 3).unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.fixed_alpha = Some(0.05);
        cfg.solver.max_outer = 2500;
        cfg.seed = 3;
        let result = run_pipeline(&data, &cfg).unwrap();
        assert!(result.cv.is_none(), "fixed α must skip cross-validation");
        assert_eq!(result.selected_alpha, 0.05);
        assert!(result.alpha_used >= 0.05);
        let diag = result.diagnostics();
        assert_eq!(diag.selected_alpha, 0.05);
        assert!(diag.fold_alpha.is_none());
    }

    #[test]
    fn pipeline_is_deterministic() {
        let skeleton = gen_er_graph(4, 4.0, 21).unwrap();
        let truth = assign_weights_and_noises(&skeleton, GraphKind::Er, NoiseMenu::Mixed, 21);
        let data = sample_data(&truth, 600, 21).unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.grid = AlphaGrid::log_spaced(5, 1e-3, 0.3).unwrap();
        cfg.folds = 4;
        cfg.seed = 5;
        cfg.solver.max_outer = 1200;
        let a = run_pipeline(&data, &cfg).unwrap();
        let b = run_pipeline(&data, &cfg).unwrap();
        assert_eq!(a.estimate.b, b.estimate.b, "reruns must agree bitwise");
        assert_eq!(a.selected_alpha, b.selected_alpha);
        assert_eq!(a.alpha_used, b.alpha_used);
        assert_eq!(
            a.final_state.residual_history, b.final_state.residual_history,
            "solver trajectories must agree bitwise"
        );
    }

    #[test]
    fn pipeline_estimate_beats_empty_graph_on_easy_instance() {
        let skeleton = gen_er_graph(5, 5.0, 33).unwrap();
        let truth = assign_weights_and_noises(&skeleton, GraphKind::Er, NoiseMenu::Mixed, 33);
        let data = sample_data(&truth, 1500, 33).unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.grid = AlphaGrid::log_spaced(10, 1e-3, 0.3).unwrap();
        cfg.folds = 5;
        cfg.seed = 33;
        cfg.solver.max_outer = 2500;
        let result = run_pipeline(&data, &cfg).unwrap();
        let report = evaluate(&result.estimate.b, &truth.b_true).unwrap();
        let empty = evaluate(&DMatrix::zeros(5, 5), &truth.b_true).unwrap();
        assert!(
            report.shd < empty.shd,
            "estimate SHD {} should beat the empty graph's {}",
            report.shd,
            empty.shd
        );
        assert!(report.tpr >= 0.5, "TPR {} too low for an easy instance", report.tpr);
    }

    #[test]
    fn unstandardize_divides_columns_and_keeps_zeros() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -2.0, 4.0]);
        let out = unstandardize_demixing(&m, &[2.0, 4.0]);
        assert_eq!(out[(0, 0)], 0.5);
        assert_eq!(out[(0, 1)], 0.0);
        assert_eq!(out[(1, 0)], -1.0);
        assert_eq!(out[(1, 1)], 1.0);
        assert!(out[(0, 1)].is_sign_positive(), "zero stays exactly +0");
    }
}

//! The ADMM loop: manifold gradient descent on W, Procrustes update of P,
//! soft-threshold update of M, and the dual ascent on U, with the two
//! max-norm stopping criteria.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::data::Whitening;
use crate::error::{Error, Result};
use crate::ica::{
    lagrangian_value, natural_gradient, row_normalize, select_densities_from_sources,
    tangent_project, DensityKind, GradWorkspace,
};

/// Solver hyper-parameters. `Default` pins the published settings:
/// λ = 0.1, η = 0.005, γ = 1, tol_primal = 1e-4, tol_w = 1e-5.
#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    /// Total penalty strength λ.
    pub lambda: f64,
    /// Sparsity/orthogonality balance α ∈ [0,1]: λα weights the L1 term,
    /// λ(1−α) the orthogonality term.
    pub alpha: f64,
    /// Adaptive-lasso exponent γ (consumed when weights are built).
    pub gamma: f64,
    /// ADMM penalty ρ.
    pub rho: f64,
    /// Learning rate η for the W gradient steps.
    pub eta: f64,
    /// Maximum inner gradient iterations per outer iteration.
    pub u_max: usize,
    /// Stopping tolerance on the primal residual max|WD⁻¹Vᵀ − M|.
    pub tol_primal: f64,
    /// Stopping tolerance on the per-outer-iteration change max|W_{t+1} − W_t|.
    pub tol_w: f64,
    /// Outer iteration cap; exceeding it yields a non-converged state.
    pub max_outer: usize,
    /// Outer iterations during which densities are re-selected before
    /// freezing. The default keeps re-selection active for the entire run:
    /// adapting the density model while W moves lets mixtures near the
    /// Gaussian boundary settle into the correct family, which measurably
    /// improves both convergence and structure recovery over an early
    /// freeze.
    pub density_refresh_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            alpha: 0.1,
            gamma: 1.0,
            rho: 1.0,
            eta: 0.005,
            u_max: 10,
            tol_primal: 1e-4,
            tol_w: 1e-5,
            max_outer: 2000,
            density_refresh_iters: usize::MAX,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Parameter(format!("alpha must lie in [0,1], got {}", self.alpha)));
        }
        if self.lambda < 0.0 {
            return Err(Error::Parameter(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if self.gamma < 0.0 {
            return Err(Error::Parameter(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        for (name, v) in [("rho", self.rho), ("eta", self.eta)] {
            if v <= 0.0 {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("tol_primal", self.tol_primal),
            ("tol_w", self.tol_w),
        ] {
            if v <= 0.0 {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.u_max == 0 || self.max_outer == 0 {
            return Err(Error::Parameter("u_max and max_outer must be positive".into()));
        }
        Ok(())
    }
}

/// Converged (or best-effort) solver iterates plus convergence diagnostics.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Demixing matrix in whitened coordinates, rows unit-norm.
    pub w: DMatrix<f64>,
    /// Sparse demixing matrix in standardized coordinates (the ADMM M block).
    pub m: DMatrix<f64>,
    /// Orthogonal Procrustes target.
    pub p: DMatrix<f64>,
    /// Scaled dual variable.
    pub u: DMatrix<f64>,
    /// Per-component density selections.
    pub kinds: Vec<DensityKind>,
    /// Per-component identifiability flags (false = statistic ≤ 0, the
    /// component looked Gaussian when densities were last selected).
    pub identifiable: Vec<bool>,
    /// Outer iterations consumed.
    pub outer_iterations: usize,
    /// Whether both stopping criteria were met within max_outer.
    pub converged: bool,
    /// Final max|WD⁻¹Vᵀ − M|.
    pub primal_residual: f64,
    /// Final max|W_{t+1} − W_t|.
    pub w_change: f64,
    /// (primal residual, w change) after each outer iteration.
    pub residual_history: Vec<(f64, f64)>,
}

/// Orthogonal Procrustes update: P = U_W·V_Wᵀ from the SVD W = U_W·D_W·V_Wᵀ,
/// the orthogonal matrix nearest to W and the minimizer of ‖PᵀW − I‖²_F.
pub fn update_p(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence("non-finite entries reached the Procrustes update".into()));
    }
    let svd = w.clone().svd(true, true);
    let u = svd.u.as_ref().expect("SVD with vectors requested");
    let vt = svd.v_t.as_ref().expect("SVD with vectors requested");
    Ok(u * vt)
}

/// Soft-thresholding 𝒮(x; t) = sign(x)·max(|x| − t, 0), the prox of t·|·|.
#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// M-update: entrywise soft-threshold of WD⁻¹Vᵀ + U/ρ at level (λα/ρ)·c_jk.
pub fn update_m(
    w: &DMatrix<f64>,
    u: &DMatrix<f64>,
    c: &DMatrix<f64>,
    wh: &Whitening,
    cfg: &SolverConfig,
) -> DMatrix<f64> {
    let a = wh.demix_to_original(w);
    let scale = cfg.lambda * cfg.alpha / cfg.rho;
    let mut m = a + u / cfg.rho;
    for j in 0..m.nrows() {
        for k in 0..m.ncols() {
            m[(j, k)] = soft_threshold(m[(j, k)], scale * c[(j, k)]);
        }
    }
    m
}

/// Dual ascent: U ← U + ρ(WD⁻¹Vᵀ − M).
pub fn update_u(
    w: &DMatrix<f64>,
    m: &DMatrix<f64>,
    u: &DMatrix<f64>,
    wh: &Whitening,
    cfg: &SolverConfig,
) -> DMatrix<f64> {
    let a = wh.demix_to_original(w);
    u + (a - m) * cfg.rho
}

/// Inner gradient descent on W (up to u_max steps of W ← W − η·ΔW with the
/// tangent-projected natural gradient), followed by row re-normalization.
/// Returns the new W and the largest single-step entry change seen.
pub fn update_w(
    w: &DMatrix<f64>,
    p: &DMatrix<f64>,
    m: &DMatrix<f64>,
    u: &DMatrix<f64>,
    kinds: &[DensityKind],
    wh: &Whitening,
    cfg: &SolverConfig,
    work: &mut GradWorkspace,
) -> Result<DMatrix<f64>> {
    let mut cur = w.clone();
    for _ in 0..cfg.u_max {
        let raw = natural_gradient(&cur, p, m, u, kinds, wh, cfg, work);
        let delta = tangent_project(&cur, &raw);
        let mut step_max = 0.0f64;
        for (dst, dv) in cur.iter_mut().zip(delta.iter()) {
            let step = cfg.eta * dv;
            *dst -= step;
            step_max = step_max.max(step.abs());
        }
        if !step_max.is_finite() {
            return Err(Error::Divergence("non-finite W update step".into()));
        }
        if step_max < cfg.tol_w {
            break;
        }
    }
    row_normalize(&cur)
}

/// Warm-start payload: a previous solution for a nearby penalty setting.
#[derive(Debug, Clone)]
pub enum Init<'a> {
    /// Fresh start from a specific W₀ (rows are normalized; M₀ = W₀D⁻¹Vᵀ,
    /// U₀ = 0, P₀ = polar factor of W₀).
    Matrix(&'a DMatrix<f64>),
    /// Continue from a full previous state (W, M, U, and densities carried).
    State(&'a SolverState),
}

/// Runs the full ADMM alternation until both stopping criteria hold:
/// max|WD⁻¹Vᵀ − M| < tol_primal and max|W_{t+1} − W_t| < tol_w.
///
/// Densities are re-selected from the evolving sources during the first
/// `density_refresh_iters` outer iterations (by default: every iteration),
/// then frozen. Hitting max_outer returns the best-effort state with
/// `converged = false` rather than an error; genuine divergence
/// (non-finite iterates or a 10× objective blow-up) is an error.
pub fn fit(
    wh: &Whitening,
    cfg: &SolverConfig,
    weights: &DMatrix<f64>,
    init: Option<Init>,
    seed: u64,
) -> Result<SolverState> {
    cfg.validate()?;
    let d = wh.z.ncols();
    if weights.shape() != (d, d) {
        return Err(Error::Parameter(format!(
            "weight matrix must be {d}x{d}, got {}x{}",
            weights.nrows(),
            weights.ncols()
        )));
    }

    let (mut w, mut m, mut u, mut kinds, mut identifiable) = match init {
        Some(Init::State(prev)) => (
            prev.w.clone(),
            prev.m.clone(),
            prev.u.clone(),
            prev.kinds.clone(),
            prev.identifiable.clone(),
        ),
        Some(Init::Matrix(w0)) => {
            let w = row_normalize(w0)?;
            let m = wh.demix_to_original(&w);
            (w, m, DMatrix::zeros(d, d), vec![DensityKind::SuperGaussian; d], vec![true; d])
        }
        None => {
            let w = random_orthogonal(d, seed);
            let m = wh.demix_to_original(&w);
            (w, m, DMatrix::zeros(d, d), vec![DensityKind::SuperGaussian; d], vec![true; d])
        }
    };

    let mut work = GradWorkspace::default();
    let mut history = Vec::new();
    let mut objective_floor = f64::INFINITY;
    let mut converged = false;
    let mut primal_residual = f64::INFINITY;
    let mut w_change = f64::INFINITY;
    let mut outer = 0;

    while outer < cfg.max_outer {
        outer += 1;
        let p = update_p(&w)?;
        if outer <= cfg.density_refresh_iters {
            let (k, idf) = select_densities_from_sources(&wh.z, &w);
            kinds = k;
            identifiable = idf;
        }
        let w_prev = w.clone();
        w = update_w(&w_prev, &p, &m, &u, &kinds, wh, cfg, &mut work)?;
        m = update_m(&w, &u, weights, wh, cfg);
        u = update_u(&w, &m, &u, wh, cfg);

        let a = wh.demix_to_original(&w);
        primal_residual = (a - &m).abs().max();
        w_change = (&w - &w_prev).abs().max();
        history.push((primal_residual, w_change));

        // divergence watchdog, sampled so the likelihood pass stays off the
        // per-iteration hot path
        if outer == 1 || outer % 8 == 0 {
            let objective = lagrangian_value(&w, &p, &m, &u, weights, &kinds, wh, cfg)?;
            if !objective.is_finite() {
                return Err(Error::Divergence("objective became non-finite".into()));
            }
            if objective < objective_floor {
                objective_floor = objective;
            } else if objective_floor.abs() > 1e-12
                && objective > 10.0 * objective_floor.abs() + objective_floor
            {
                return Err(Error::Divergence(format!(
                    "objective rose from {objective_floor:.6e} to {objective:.6e}"
                )));
            }
        }

        if primal_residual < cfg.tol_primal && w_change < cfg.tol_w {
            converged = true;
            break;
        }
    }

    let p = update_p(&w)?;
    Ok(SolverState {
        w,
        m,
        p,
        u,
        kinds,
        identifiable,
        outer_iterations: outer,
        converged,
        primal_residual,
        w_change,
        residual_history: history,
    })
}

/// Random orthogonal matrix: QR of a seeded standard-normal matrix. Rows of
/// an orthogonal matrix are unit-norm, so the result lies on the manifold.
pub fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    qr.q()
}

/// M̂ = ŴD⁻¹Vᵀ for a converged state — dense counterpart of the M block.
pub fn demixing_estimate(state: &SolverState, wh: &Whitening) -> DMatrix<f64> {
    wh.demix_to_original(&state.w)
}

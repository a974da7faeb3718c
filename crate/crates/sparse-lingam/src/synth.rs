//! Ground-truth generation (random DAGs, weights, non-Gaussian noises),
//! forward sampling of the linear SEM, and the evaluation metrics.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::postprocess::is_acyclic;

/// Distribution family for one noise variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Laplace,
    Uniform,
    Exponential,
}

/// Restriction on which noise families the generator may draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMenu {
    Mixed,
    Only(NoiseKind),
}

/// Which random-graph model generated a skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Er,
    Sf,
}

/// A sampled ground truth: weighted acyclic adjacency plus per-variable
/// noise specifications.
#[derive(Debug, Clone)]
pub struct GraphTruth {
    /// b[(k, j)] ≠ 0 is a directed edge j → k with that weight.
    pub b_true: DMatrix<f64>,
    pub graph_kind: GraphKind,
    /// (distribution, variance) per variable.
    pub noise_specs: Vec<(NoiseKind, f64)>,
    pub seed: u64,
}

/// Structure-recovery metrics between an estimated and a true adjacency.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricsReport {
    /// Frobenius norm of B̂ − B_true.
    pub distance: f64,
    /// Edge insertions + deletions + reversals (a reversed pair is one step).
    pub shd: usize,
    /// (false positives + reversals) / max(1, estimated edge count).
    pub fdr: f64,
    /// True positives / max(1, true edge count).
    pub tpr: f64,
}

/// Unweighted skeleton on a random topological order: each of the
/// d(d−1)/2 order-respecting pairs becomes an edge independently with
/// probability expected_edges / (d(d−1)/2).
pub fn gen_er_graph(d: usize, expected_edges: f64, seed: u64) -> Result<DMatrix<f64>> {
    let slots = (d * (d - 1) / 2) as f64;
    if d < 2 {
        return Err(Error::Parameter(format!("need at least 2 variables, got {d}")));
    }
    if expected_edges < 0.0 || expected_edges > slots {
        return Err(Error::Parameter(format!(
            "expected edge count {expected_edges} outside [0, {slots}]"
        )));
    }
    let p = expected_edges / slots;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = random_permutation(d, &mut rng);
    let mut b = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in (i + 1)..d {
            if rng.gen_bool(p) {
                // edge order[i] → order[j]
                b[(order[j], order[i])] = 1.0;
            }
        }
    }
    Ok(b)
}

/// Preferential-attachment skeleton: nodes arrive one at a time and attach
/// `m` edges to existing nodes with probability proportional to their
/// current degree, oriented from the earlier node to the newcomer.
pub fn gen_sf_graph(d: usize, m: usize, seed: u64) -> Result<DMatrix<f64>> {
    if d < 2 || m == 0 || m >= d {
        return Err(Error::Parameter(format!(
            "attachment count must satisfy 1 <= m < d, got m={m}, d={d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = DMatrix::zeros(d, d);
    let mut degree = vec![0usize; d];
    for new in 1..d {
        let take = m.min(new);
        let mut targets: Vec<usize> = Vec::with_capacity(take);
        for _ in 0..take {
            let total: usize = (0..new).filter(|t| !targets.contains(t)).map(|t| degree[t] + 1).sum();
            // degree+1 keeps isolated early nodes reachable
            let mut ticket = rng.gen_range(0..total);
            let mut chosen = 0;
            for t in 0..new {
                if targets.contains(&t) {
                    continue;
                }
                let w = degree[t] + 1;
                if ticket < w {
                    chosen = t;
                    break;
                }
                ticket -= w;
            }
            targets.push(chosen);
        }
        for &t in &targets {
            b[(new, t)] = 1.0; // edge t → new: earlier to later, acyclic
            degree[t] += 1;
            degree[new] += 1;
        }
    }
    Ok(b)
}

/// Fills a skeleton with edge weights uniform on [−1.5, −0.5] ∪ [0.5, 1.5]
/// and draws per-variable noise specs: distribution uniform over the menu,
/// variance uniform on [1, 3].
pub fn assign_weights_and_noises(
    skeleton: &DMatrix<f64>,
    graph_kind: GraphKind,
    menu: NoiseMenu,
    seed: u64,
) -> GraphTruth {
    let d = skeleton.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e3779b97f4a7c15));
    let mut b_true = skeleton.clone();
    for j in 0..d {
        for k in 0..d {
            if skeleton[(j, k)] != 0.0 {
                let magnitude = rng.gen_range(0.5..1.5);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                b_true[(j, k)] = sign * magnitude;
            }
        }
    }
    let noise_specs = (0..d)
        .map(|_| {
            let kind = match menu {
                NoiseMenu::Only(k) => k,
                NoiseMenu::Mixed => match rng.gen_range(0..3) {
                    0 => NoiseKind::Laplace,
                    1 => NoiseKind::Uniform,
                    _ => NoiseKind::Exponential,
                },
            };
            let variance = rng.gen_range(1.0..3.0);
            (kind, variance)
        })
        .collect();
    GraphTruth { b_true, graph_kind, noise_specs, seed }
}

/// One zero-mean noise draw with the requested variance, sampled by inverse
/// CDF from a single uniform variate (bit-reproducible for a fixed seed).
fn draw_noise(kind: NoiseKind, variance: f64, rng: &mut ChaCha8Rng) -> f64 {
    match kind {
        NoiseKind::Laplace => {
            // scale b with variance 2b²
            let b = (variance / 2.0).sqrt();
            let u: f64 = rng.gen_range(-0.5..0.5);
            -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
        }
        NoiseKind::Uniform => {
            let half = (3.0 * variance).sqrt();
            rng.gen_range(-half..half)
        }
        NoiseKind::Exponential => {
            // scale = sd; centered to zero mean
            let scale = variance.sqrt();
            let u: f64 = rng.gen_range(0.0..1.0);
            -scale * (1.0 - u).ln() - scale
        }
    }
}

/// Forward-samples N rows of X = BX + S by filling variables in a
/// topological order of the truth.
pub fn sample_data(truth: &GraphTruth, n: usize, seed: u64) -> Result<Dataset> {
    let d = truth.b_true.nrows();
    let (acyclic, order) = is_acyclic(&truth.b_true);
    if !acyclic {
        return Err(Error::Parameter("ground-truth adjacency contains a cycle".into()));
    }
    let order = order.expect("acyclic graphs yield an order");
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5851f42d4c957f2d));
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        for &j in &order {
            let (kind, variance) = truth.noise_specs[j];
            let mut value = draw_noise(kind, variance, &mut rng);
            for k in 0..d {
                let w = truth.b_true[(j, k)];
                if w != 0.0 {
                    value += w * x[(i, k)];
                }
            }
            x[(i, j)] = value;
        }
    }
    Dataset::from_matrix(x)
}

/// Compares an estimated adjacency with the truth. Edge presence is exact
/// nonzeroness; SHD is counted over unordered pairs so a reversed edge is a
/// single step; FDR counts reversals as discoveries that are false.
pub fn evaluate(b_hat: &DMatrix<f64>, b_true: &DMatrix<f64>) -> Result<MetricsReport> {
    if b_hat.shape() != b_true.shape() {
        return Err(Error::Parameter(format!(
            "estimate is {:?} but truth is {:?}",
            b_hat.shape(),
            b_true.shape()
        )));
    }
    let d = b_hat.nrows();
    let distance = (b_hat - b_true).norm();

    let mut true_positives = 0usize;
    let mut reversals = 0usize;
    let mut false_positives = 0usize;
    let mut estimated_edges = 0usize;
    let mut true_edges = 0usize;
    for j in 0..d {
        for k in 0..d {
            if j == k {
                continue;
            }
            let est = b_hat[(j, k)] != 0.0;
            let tru = b_true[(j, k)] != 0.0;
            let tru_rev = b_true[(k, j)] != 0.0;
            if tru {
                true_edges += 1;
            }
            if est {
                estimated_edges += 1;
                if tru {
                    true_positives += 1;
                } else if tru_rev {
                    reversals += 1;
                } else {
                    false_positives += 1;
                }
            }
        }
    }

    let mut shd = 0usize;
    for a in 0..d {
        for b in (a + 1)..d {
            let est_pair = (b_hat[(a, b)] != 0.0, b_hat[(b, a)] != 0.0);
            let tru_pair = (b_true[(a, b)] != 0.0, b_true[(b, a)] != 0.0);
            if est_pair != tru_pair {
                shd += 1;
            }
        }
    }

    Ok(MetricsReport {
        distance,
        shd,
        fdr: (false_positives + reversals) as f64 / estimated_edges.max(1) as f64,
        tpr: true_positives as f64 / true_edges.max(1) as f64,
    })
}

fn random_permutation(d: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    order
}

//! Converts a converged demixing estimate M̂ into a weighted adjacency B̂:
//! diagonal-maximizing row permutation, row rescaling, test-and-cutoff
//! pruning to acyclicity, and the final ω₂ truncation.

use nalgebra::DMatrix;

use crate::assignment;
use crate::error::{Error, Result};

/// Assignment cost for candidate diagonal entries that are exactly zero;
/// finite but large enough to dominate any sum of reciprocals of interest.
pub const ZERO_DIAG_SENTINEL: f64 = 1e12;

/// The estimated weighted adjacency matrix and its post-processing record.
#[derive(Debug, Clone)]
pub struct AdjacencyEstimate {
    /// Weighted adjacency: b[(k, j)] ≠ 0 encodes a directed edge j → k.
    pub b: DMatrix<f64>,
    /// Variable elimination order: a permutation of 0..d such that every
    /// edge points from an earlier to a later position.
    pub causal_order: Vec<usize>,
    /// Magnitude of the largest entry zeroed to reach acyclicity (0 if none).
    pub cutoff_applied: f64,
    /// Whether the returned matrix is acyclic (always true after pruning).
    pub acyclic: bool,
    /// Whether the ω₂ truncation step ran.
    pub truncated: bool,
    /// True when no row permutation with a fully nonzero diagonal existed.
    pub degenerate_permutation: bool,
}

/// Finds the row permutation π minimizing Σⱼ 1/|{π(M)}ⱼⱼ|, i.e. the
/// assignment of rows to diagonal positions with the largest-magnitude
/// diagonal. Returns `perm` with row `perm[j]` placed at position j, plus a
/// degeneracy flag set when every candidate for some position is zero.
pub fn best_diagonal_permutation(m: &DMatrix<f64>) -> (Vec<usize>, bool) {
    let d = m.nrows();
    // cost[j][r]: placing row r at diagonal position j costs 1/|m[r, j]|
    let cost: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            (0..d)
                .map(|r| {
                    let v = m[(r, j)].abs();
                    if v > 0.0 { (1.0 / v).min(ZERO_DIAG_SENTINEL) } else { ZERO_DIAG_SENTINEL }
                })
                .collect()
        })
        .collect();
    let assign = assignment::solve(&cost);
    let mut degenerate = false;
    for (j, &r) in assign.iter().enumerate() {
        if m[(r, j)] == 0.0 {
            degenerate = true;
        }
    }
    (assign, degenerate)
}

/// Applies the permutation, rescales each row by its diagonal entry, and
/// returns B = I − rescaled matrix (with an exactly zero diagonal).
pub fn rescale_to_b(m: &DMatrix<f64>, perm: &[usize]) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    let mut b = DMatrix::zeros(d, d);
    for j in 0..d {
        let diag = m[(perm[j], j)];
        if diag == 0.0 {
            return Err(Error::Rescale { row: j + 1 });
        }
        for k in 0..d {
            b[(j, k)] = -m[(perm[j], k)] / diag;
        }
        b[(j, j)] = 0.0; // I − M/diag has an exact zero here; avoid -0.0 noise
    }
    Ok(b)
}

/// Acyclicity test by exogenous-variable elimination: repeatedly remove a
/// variable whose row is all-zero on the remaining submatrix (no remaining
/// parents). Returns the elimination order as the causal order when acyclic.
pub fn is_acyclic(b: &DMatrix<f64>) -> (bool, Option<Vec<usize>>) {
    let d = b.nrows();
    let mut remaining: Vec<usize> = (0..d).collect();
    let mut order = Vec::with_capacity(d);
    while !remaining.is_empty() {
        let mut found = None;
        for (pos, &j) in remaining.iter().enumerate() {
            if remaining.iter().all(|&k| b[(j, k)] == 0.0 || k == j) {
                found = Some(pos);
                break;
            }
        }
        match found {
            Some(pos) => order.push(remaining.remove(pos)),
            None => return (false, None),
        }
    }
    (true, Some(order))
}

/// Test-and-cutoff pruning: while the matrix is cyclic, zero its
/// smallest-magnitude nonzero entry (lexicographic (row, column) tie-break).
/// Returns the pruned matrix, the magnitude of the largest entry zeroed
/// (0 if none), and the causal order of the result.
pub fn prune_to_dag(b: &DMatrix<f64>) -> (DMatrix<f64>, f64, Vec<usize>) {
    let mut out = b.clone();
    let mut cutoff = 0.0f64;
    loop {
        if let (true, Some(order)) = is_acyclic(&out) {
            return (out, cutoff, order);
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for j in 0..out.nrows() {
            for k in 0..out.ncols() {
                let v = out[(j, k)].abs();
                if v > 0.0 && best.map_or(true, |(bv, _, _)| v < bv) {
                    best = Some((v, j, k));
                }
            }
        }
        let (v, j, k) = best.expect("a cyclic matrix has nonzero entries");
        out[(j, k)] = 0.0;
        cutoff = cutoff.max(v);
    }
}

/// Zeroes entries with |b| strictly below ω₂. Zeroing entries cannot create
/// a cycle, so acyclicity is preserved.
pub fn final_truncate(b: &DMatrix<f64>, omega2: f64) -> DMatrix<f64> {
    b.map(|v| if v.abs() < omega2 { 0.0 } else { v })
}

/// The full chain: permutation, rescaling, pruning, truncation. The causal
/// order is recomputed after truncation so it reflects the returned matrix.
pub fn postprocess(m: &DMatrix<f64>, omega2: f64) -> Result<AdjacencyEstimate> {
    let (perm, degenerate) = best_diagonal_permutation(m);
    let b = rescale_to_b(m, &perm)?;
    let (pruned, cutoff_applied, _) = prune_to_dag(&b);
    let truncated = omega2 > 0.0;
    let b = final_truncate(&pruned, omega2);
    let (acyclic, order) = is_acyclic(&b);
    debug_assert!(acyclic);
    Ok(AdjacencyEstimate {
        causal_order: order.unwrap_or_default(),
        b,
        cutoff_applied,
        acyclic,
        truncated,
        degenerate_permutation: degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn permutation_of_identity_is_identity() {
        let m = DMatrix::<f64>::identity(4, 4);
        let (perm, degenerate) = best_diagonal_permutation(&m);
        assert_eq!(perm, vec![0, 1, 2, 3]);
        assert!(!degenerate);
    }

    #[test]
    fn permutation_of_antidiagonal_reverses() {
        let mut m = DMatrix::<f64>::zeros(3, 3);
        m[(0, 2)] = 1.0;
        m[(1, 1)] = 1.0;
        m[(2, 0)] = 1.0;
        let (perm, degenerate) = best_diagonal_permutation(&m);
        assert_eq!(perm, vec![2, 1, 0]);
        assert!(!degenerate);
    }

    #[test]
    fn permutation_matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..200 {
            let d = rng.gen_range(2..=8);
            let m = DMatrix::from_fn(d, d, |_, _| {
                if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(-2.0..2.0) }
            });
            let (perm, _) = best_diagonal_permutation(&m);
            let objective = |p: &[usize]| -> f64 {
                (0..d)
                    .map(|j| {
                        let v = m[(p[j], j)].abs();
                        if v > 0.0 { (1.0 / v).min(ZERO_DIAG_SENTINEL) } else { ZERO_DIAG_SENTINEL }
                    })
                    .sum()
            };
            let got = objective(&perm);
            let mut best = f64::INFINITY;
            let mut stack: Vec<usize> = (0..d).collect();
            exhaustive(&mut stack, 0, &mut |p| {
                let v = objective(p);
                if v < best {
                    best = v;
                }
            });
            assert!((got - best).abs() <= 1e-9 * best.max(1.0), "{got} vs {best}");
        }
    }

    fn exhaustive(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == items.len() {
            visit(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            exhaustive(items, k + 1, visit);
            items.swap(k, i);
        }
    }

    #[test]
    fn degenerate_permutation_is_flagged() {
        // column 1 entirely zero: no assignment has a nonzero diagonal there
        let mut m = DMatrix::<f64>::zeros(3, 3);
        m[(0, 0)] = 1.0;
        m[(1, 2)] = 1.0;
        m[(2, 0)] = 0.5;
        let (_, degenerate) = best_diagonal_permutation(&m);
        assert!(degenerate);
    }

    #[test]
    fn rescale_examples() {
        // M = 2I: rescaled = I, B = 0
        let m = DMatrix::<f64>::identity(3, 3) * 2.0;
        let b = rescale_to_b(&m, &[0, 1, 2]).unwrap();
        assert!(b.abs().max() < 1e-15);

        // row (2, 1) with diagonal 2 → rescaled (1, 0.5) → B row (0, −0.5)
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        let b = rescale_to_b(&m, &[0, 1]).unwrap();
        assert_eq!(b[(0, 0)], 0.0);
        assert!((b[(0, 1)] + 0.5).abs() < 1e-15);

        // zero diagonal is an error
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(rescale_to_b(&m, &[0, 1]), Err(Error::Rescale { row: 1 })));
    }

    #[test]
    fn exact_recovery_from_constructed_demixing() {
        // M = I − B for a known DAG, rows permuted and rescaled: the chain
        // must recover B exactly (up to floating-point identity)
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let d = rng.gen_range(2..=10);
            // strictly lower triangular B on a random variable order
            let mut order: Vec<usize> = (0..d).collect();
            for i in (1..d).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            let mut b_true = DMatrix::<f64>::zeros(d, d);
            for i in 0..d {
                for j in 0..i {
                    if rng.gen_bool(0.4) {
                        b_true[(order[i], order[j])] =
                            rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    }
                }
            }
            let mut m = -b_true.clone();
            for i in 0..d {
                m[(i, i)] += 1.0;
            }
            // scramble: random row permutation + nonzero row scales
            let mut rows: Vec<usize> = (0..d).collect();
            for i in (1..d).rev() {
                rows.swap(i, rng.gen_range(0..=i));
            }
            let mut scrambled = DMatrix::<f64>::zeros(d, d);
            for (dst, &src) in rows.iter().enumerate() {
                let scale = rng.gen_range(0.2..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                for k in 0..d {
                    scrambled[(dst, k)] = m[(src, k)] * scale;
                }
            }
            let est = postprocess(&scrambled, 0.0).unwrap();
            assert!(
                (&est.b - &b_true).abs().max() < 1e-10,
                "recovery failed at d={d}"
            );
            assert!(est.acyclic);
            assert_eq!(est.cutoff_applied, 0.0);
        }
    }

    #[test]
    fn acyclicity_examples() {
        // strictly lower triangular: acyclic, natural elimination order
        let mut b = DMatrix::<f64>::zeros(3, 3);
        b[(1, 0)] = 1.0;
        b[(2, 0)] = 0.5;
        b[(2, 1)] = -0.3;
        let (ok, order) = is_acyclic(&b);
        assert!(ok);
        assert_eq!(order.unwrap(), vec![0, 1, 2]);

        // 2-cycle
        let mut b = DMatrix::<f64>::zeros(2, 2);
        b[(0, 1)] = 1.0;
        b[(1, 0)] = 1.0;
        let (ok, order) = is_acyclic(&b);
        assert!(!ok);
        assert!(order.is_none());
    }

    #[test]
    fn causal_order_respects_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let d = rng.gen_range(3..=9);
            let mut order: Vec<usize> = (0..d).collect();
            for i in (1..d).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            let mut b = DMatrix::<f64>::zeros(d, d);
            for i in 0..d {
                for j in 0..i {
                    if rng.gen_bool(0.35) {
                        b[(order[i], order[j])] = 1.0;
                    }
                }
            }
            let (ok, got) = is_acyclic(&b);
            assert!(ok);
            let got = got.unwrap();
            let mut pos = vec![0usize; d];
            for (idx, &v) in got.iter().enumerate() {
                pos[v] = idx;
            }
            for child in 0..d {
                for parent in 0..d {
                    if b[(child, parent)] != 0.0 {
                        assert!(
                            pos[parent] < pos[child],
                            "edge {parent}->{child} violates the returned order"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn prune_breaks_single_cycle_at_smallest_entry() {
        let mut b = DMatrix::<f64>::zeros(2, 2);
        b[(0, 1)] = 0.01;
        b[(1, 0)] = 0.9;
        let (pruned, cutoff, _) = prune_to_dag(&b);
        assert_eq!(pruned[(0, 1)], 0.0);
        assert_eq!(pruned[(1, 0)], 0.9);
        assert!((cutoff - 0.01).abs() < 1e-15);
    }

    #[test]
    fn prune_removes_only_the_cheapest_cycle_edge() {
        // 3-cycle 0→1→2→0 with magnitudes 0.1, 0.2, 0.3 plus an acyclic edge;
        // removing the 0.1 edge suffices
        let mut b = DMatrix::<f64>::zeros(4, 4);
        b[(1, 0)] = 0.1;
        b[(2, 1)] = 0.2;
        b[(0, 2)] = 0.3;
        b[(3, 0)] = 1.0;
        let (pruned, cutoff, _) = prune_to_dag(&b);
        assert_eq!(pruned[(1, 0)], 0.0);
        assert_eq!(pruned[(2, 1)], 0.2);
        assert_eq!(pruned[(0, 2)], 0.3);
        assert_eq!(pruned[(3, 0)], 1.0);
        assert!((cutoff - 0.1).abs() < 1e-15);
        // already acyclic input is untouched
        let (again, cutoff, _) = prune_to_dag(&pruned);
        assert_eq!(again, pruned);
        assert_eq!(cutoff, 0.0);
    }

    #[test]
    fn prune_output_is_always_acyclic() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..500 {
            let d = rng.gen_range(2..=8);
            let b = DMatrix::from_fn(d, d, |i, j| {
                if i != j && rng.gen_bool(0.5) { rng.gen_range(-1.0..1.0) } else { 0.0 }
            });
            let (pruned, _, order) = prune_to_dag(&b);
            let (ok, _) = is_acyclic(&pruned);
            assert!(ok);
            assert_eq!(order.len(), d);
        }
    }

    #[test]
    fn dfs_oracle_agrees_with_elimination() {
        fn has_cycle_dfs(b: &DMatrix<f64>) -> bool {
            // edge parent→child encoded as b[(child, parent)] ≠ 0
            let d = b.nrows();
            let mut color = vec![0u8; d]; // 0 white, 1 gray, 2 black
            fn visit(v: usize, b: &DMatrix<f64>, color: &mut Vec<u8>) -> bool {
                color[v] = 1;
                for child in 0..b.nrows() {
                    if b[(child, v)] != 0.0 {
                        match color[child] {
                            1 => return true,
                            0 => {
                                if visit(child, b, color) {
                                    return true;
                                }
                            }
                            _ => {}
                        }
                    }
                }
                color[v] = 2;
                false
            }
            (0..d).any(|v| color[v] == 0 && visit(v, b, &mut color))
        }

        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..1000 {
            let d = rng.gen_range(2..=8);
            let b = DMatrix::from_fn(d, d, |i, j| {
                if i != j && rng.gen_bool(0.3) { rng.gen_range(-1.0..1.0) } else { 0.0 }
            });
            let (ok, _) = is_acyclic(&b);
            assert_eq!(ok, !has_cycle_dfs(&b));
        }
    }

    #[test]
    fn truncation_contract() {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.04, 0.06, 0.0]);
        let t = final_truncate(&b, 0.05);
        assert_eq!(t[(0, 1)], 0.0);
        assert_eq!(t[(1, 0)], 0.06);
        // ω₂ = 0 leaves everything
        assert_eq!(final_truncate(&b, 0.0), b);
        // all below ω₂ → zero matrix, still acyclic
        let z = final_truncate(&b, 1.0);
        assert!(z.abs().max() == 0.0);
        assert!(is_acyclic(&z).0);
    }
}

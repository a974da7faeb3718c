//! Exact linear-assignment solver (shortest augmenting path with potentials,
//! O(n³)), used to pick the row permutation with the best diagonal.

/// Solves min Σᵢ cost[i][assign[i]] over permutations. `cost` is a square
/// row-major matrix; entries must be finite. Returns, for each row, the
/// column it is assigned to.
pub fn solve(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    debug_assert!(cost.iter().all(|row| row.len() == n));
    // potentials over a (1-indexed) virtual source row/column
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    // p[j] = row matched to column j (0 = none yet), column 0 is virtual
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // augment along the alternating path
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if p[j] != 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
        let n = cost.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = (perm.clone(), f64::INFINITY);
        permute(&mut perm, 0, &mut |p| {
            let total: f64 = (0..n).map(|i| cost[i][p[i]]).sum();
            if total < best.1 {
                best = (p.to_vec(), total);
            }
        });
        best
    }

    fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == items.len() {
            visit(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, visit);
            items.swap(k, i);
        }
    }

    #[test]
    fn identity_and_antidiagonal() {
        // cheapest on the diagonal
        let cost = vec![
            vec![0.0, 9.0, 9.0],
            vec![9.0, 0.0, 9.0],
            vec![9.0, 9.0, 0.0],
        ];
        assert_eq!(solve(&cost), vec![0, 1, 2]);
        // cheapest on the antidiagonal
        let cost = vec![
            vec![9.0, 9.0, 0.0],
            vec![9.0, 0.0, 9.0],
            vec![0.0, 9.0, 9.0],
        ];
        assert_eq!(solve(&cost), vec![2, 1, 0]);
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..200 {
            let n = rng.gen_range(2..=8);
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(0.0..10.0)).collect())
                .collect();
            let assign = solve(&cost);
            let total: f64 = (0..n).map(|i| cost[i][assign[i]]).sum();
            let (_, best) = brute_force(&cost);
            assert!(
                (total - best).abs() < 1e-9,
                "trial {trial}: got {total}, brute force {best}"
            );
            // output is a permutation
            let mut seen = vec![false; n];
            for &j in &assign {
                assert!(!seen[j]);
                seen[j] = true;
            }
        }
    }

    #[test]
    fn handles_large_sentinel_costs() {
        let big = 1e12;
        let cost = vec![
            vec![big, 1.0, big],
            vec![2.0, big, big],
            vec![big, big, 3.0],
        ];
        assert_eq!(solve(&cost), vec![1, 0, 2]);
    }
}

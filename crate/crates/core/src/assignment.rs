//! Rectangular minimum-cost linear assignment (Hungarian method, shortest
//! augmenting path formulation).

/// Solve min-cost one-to-one assignment on a `rows × cols` cost matrix.
///
/// Entries that are not finite are forbidden; they never appear in the output.
/// Returns `(row, col)` pairs sorted by row. Among solutions, the solver first
/// maximizes the number of admissible pairs, then minimizes their total cost.
pub fn solve(costs: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = costs.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = costs[0].len();
    if cols == 0 {
        return Vec::new();
    }
    debug_assert!(costs.iter().all(|r| r.len() == cols));

    let finite_max = costs
        .iter()
        .flatten()
        .filter(|c| c.is_finite())
        .fold(0.0f64, |m, c| m.max(c.abs()));
    // Any forbidden pair costs more than every admissible assignment combined.
    let forbidden = (finite_max + 1.0) * (rows.max(cols) as f64 + 1.0) * 2.0;

    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let cost = |i: usize, j: usize| -> f64 {
        let c = if transpose { costs[j][i] } else { costs[i][j] };
        if c.is_finite() {
            c
        } else {
            forbidden
        }
    };

    // 1-based potentials over n rows (n <= m).
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
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
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out = Vec::with_capacity(n);
    for j in 1..=m {
        if p[j] == 0 {
            continue;
        }
        let (r, c) = if transpose { (j - 1, p[j] - 1) } else { (p[j] - 1, j - 1) };
        if costs[r][c].is_finite() {
            out.push((r, c));
        }
    }
    out.sort_unstable();
    out
}

/// Maximum-weight assignment; non-finite weights are forbidden.
pub fn solve_max(weights: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let negated: Vec<Vec<f64>> = weights
        .iter()
        .map(|r| r.iter().map(|w| if w.is_finite() { -w } else { f64::INFINITY }).collect())
        .collect();
    solve(&negated)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive reference: best (max pair count, then min cost) over all partial injections.
    pub(crate) fn brute_force(costs: &[Vec<f64>]) -> (usize, f64) {
        fn rec(costs: &[Vec<f64>], row: usize, used: &mut Vec<bool>, count: usize, total: f64, best: &mut (usize, f64)) {
            if row == costs.len() {
                if count > best.0 || (count == best.0 && total < best.1 - 1e-12) {
                    *best = (count, total);
                }
                return;
            }
            rec(costs, row + 1, used, count, total, best);
            for j in 0..used.len() {
                if !used[j] && costs[row][j].is_finite() {
                    used[j] = true;
                    rec(costs, row + 1, used, count + 1, total + costs[row][j], best);
                    used[j] = false;
                }
            }
        }
        let cols = costs.first().map_or(0, |r| r.len());
        let mut best = (0, f64::INFINITY);
        rec(costs, 0, &mut vec![false; cols], 0, 0.0, &mut best);
        if best.0 == 0 {
            best.1 = 0.0;
        }
        best
    }

    fn summarize(costs: &[Vec<f64>], pairs: &[(usize, usize)]) -> (usize, f64) {
        (pairs.len(), pairs.iter().map(|&(i, j)| costs[i][j]).sum())
    }

    #[test]
    fn empty_inputs() {
        assert!(solve(&[]).is_empty());
        assert!(solve(&[vec![]]).is_empty());
    }

    #[test]
    fn square_known_optimum() {
        let c = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let pairs = solve(&c);
        assert_eq!(summarize(&c, &pairs).1, 5.0);
    }

    #[test]
    fn forbidden_entries_never_returned() {
        let inf = f64::INFINITY;
        let c = vec![vec![inf, inf], vec![1.0, inf]];
        assert_eq!(solve(&c), vec![(1, 0)]);
    }

    #[test]
    fn matches_brute_force_on_random_rectangles() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..300 {
            let rows = rng.gen_range(1..6);
            let cols = rng.gen_range(1..6);
            let c: Vec<Vec<f64>> = (0..rows)
                .map(|_| {
                    (0..cols)
                        .map(|_| if rng.gen_bool(0.2) { f64::INFINITY } else { rng.gen_range(-3.0..3.0) })
                        .collect()
                })
                .collect();
            let pairs = solve(&c);
            let (cnt, total) = summarize(&c, &pairs);
            let (bcnt, btotal) = brute_force(&c);
            assert_eq!(cnt, bcnt, "{c:?}");
            assert!((total - btotal).abs() < 1e-9, "{c:?}: {total} vs {btotal}");
            let mut rs: Vec<_> = pairs.iter().map(|p| p.0).collect();
            let mut cs: Vec<_> = pairs.iter().map(|p| p.1).collect();
            rs.dedup();
            cs.sort_unstable();
            cs.dedup();
            assert_eq!(rs.len(), pairs.len());
            assert_eq!(cs.len(), pairs.len());
        }
    }

    #[test]
    fn max_variant() {
        let w = vec![vec![1.0, 2.0], vec![3.0, 1.0]];
        assert_eq!(solve_max(&w), vec![(0, 1), (1, 0)]);
    }
}

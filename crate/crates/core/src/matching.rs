//! Maximum-weight bipartite matching with deterministic tie-breaking.
//!
//! Weights form a rows x columns table where `None` marks a forbidden pair.
//! Among all matchings of maximum total weight, the one returned is the
//! lexicographically smallest when rows are visited in order and each row
//! prefers the lowest column index, with "unmatched" ranked after every
//! column. Callers sort rows and columns by name to get name-based
//! tie-breaking.

use num_traits::Float;

/// Hungarian algorithm (shortest augmenting path with potentials) on a
/// square cost matrix; returns the column assigned to each row.
fn hungarian_min<T: Float>(cost: &[Vec<T>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let inf = T::infinity();
    // 1-based arrays; index 0 is the virtual source
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
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
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
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
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Best achievable total weight using only the active rows and columns.
fn optimum<T: Float>(
    weights: &[Vec<Option<T>>],
    row_active: &[bool],
    col_active: &[bool],
) -> T {
    let rows: Vec<usize> = (0..weights.len()).filter(|&r| row_active[r]).collect();
    let cols: Vec<usize> = (0..col_active.len()).filter(|&c| col_active[c]).collect();
    if rows.is_empty() || cols.is_empty() {
        return T::zero();
    }
    let n = rows.len().max(cols.len());
    let mut cost = vec![vec![T::zero(); n]; n];
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            if let Some(w) = weights[r][c] {
                if w > T::zero() {
                    cost[i][j] = -w;
                }
            }
        }
    }
    let assignment = hungarian_min(&cost);
    assignment
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (i, &j)| acc - cost[i][j])
}

fn tolerance<T: Float>(scale: T) -> T {
    T::epsilon().sqrt() * scale.abs().max(T::one())
}

/// Returns `(row, column)` pairs of the chosen matching, ordered by row.
///
/// Only pairs with a positive weight are ever matched.
pub fn max_weight_matching<T: Float>(weights: &[Vec<Option<T>>], columns: usize) -> Vec<(usize, usize)> {
    let rows = weights.len();
    debug_assert!(weights.iter().all(|r| r.len() == columns));
    let mut row_active = vec![true; rows];
    let mut col_active = vec![true; columns];
    let best = optimum(weights, &row_active, &col_active);
    let tol = tolerance(best);

    let mut fixed = T::zero();
    let mut pairs = Vec::new();
    for r in 0..rows {
        row_active[r] = false;
        let mut chosen = None;
        for c in 0..columns {
            let Some(w) = weights[r][c] else { continue };
            if !col_active[c] || w <= T::zero() {
                continue;
            }
            col_active[c] = false;
            let total = fixed + w + optimum(weights, &row_active, &col_active);
            col_active[c] = true;
            if total >= best - tol {
                chosen = Some((c, w));
                break;
            }
        }
        if let Some((c, w)) = chosen {
            col_active[c] = false;
            fixed = fixed + w;
            pairs.push((r, c));
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Exhaustive search with the same lexicographic preference.
    fn brute(weights: &[Vec<Option<f64>>], columns: usize) -> (f64, Vec<(usize, usize)>) {
        fn go(
            r: usize,
            weights: &[Vec<Option<f64>>],
            used: &mut Vec<bool>,
            cur: &mut Vec<(usize, usize)>,
            sum: f64,
            best: &mut Option<(f64, Vec<(usize, usize)>)>,
        ) {
            if r == weights.len() {
                let better = match best {
                    None => true,
                    Some((b, _)) => sum > *b + 1e-9,
                };
                if better {
                    *best = Some((sum, cur.clone()));
                }
                return;
            }
            for c in 0..used.len() {
                if let Some(w) = weights[r][c] {
                    if !used[c] && w > 0.0 {
                        used[c] = true;
                        cur.push((r, c));
                        go(r + 1, weights, used, cur, sum + w, best);
                        cur.pop();
                        used[c] = false;
                    }
                }
            }
            go(r + 1, weights, used, cur, sum, best);
        }
        let mut best = None;
        go(0, weights, &mut vec![false; columns], &mut Vec::new(), 0.0, &mut best);
        best.unwrap()
    }

    fn total(weights: &[Vec<Option<f64>>], pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(r, c)| weights[r][c].unwrap()).sum()
    }

    #[test]
    fn empty_inputs() {
        assert!(max_weight_matching::<f64>(&[], 3).is_empty());
        assert!(max_weight_matching::<f64>(&[vec![], vec![]], 0).is_empty());
    }

    #[test]
    fn prefers_total_weight_over_greedy() {
        let w = vec![
            vec![Some(0.9), Some(0.85)],
            vec![Some(0.88), None],
        ];
        assert_eq!(max_weight_matching(&w, 2), [(0, 1), (1, 0)]);
    }

    #[test]
    fn ties_go_to_lowest_indices() {
        let w = vec![vec![Some(1.0), Some(1.0)], vec![Some(1.0), Some(1.0)]];
        assert_eq!(max_weight_matching(&w, 2), [(0, 0), (1, 1)]);
        let w = vec![vec![Some(1.0), Some(1.0)]];
        assert_eq!(max_weight_matching(&w, 2), [(0, 0)]);
    }

    #[test]
    fn matches_brute_force_on_random_tables() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..300 {
            let rows = rng.gen_range(0..6);
            let cols = rng.gen_range(0..6);
            let w: Vec<Vec<Option<f64>>> = (0..rows)
                .map(|_| {
                    (0..cols)
                        .map(|_| {
                            if rng.gen_bool(0.6) {
                                // coarse grid to force ties
                                Some(rng.gen_range(1..=4) as f64 * 0.25)
                            } else {
                                None
                            }
                        })
                        .collect()
                })
                .collect();
            let got = max_weight_matching(&w, cols);
            let (best, expect) = brute(&w, cols);
            assert!((total(&w, &got) - best).abs() < 1e-9);
            assert_eq!(got, expect, "{w:?}");
        }
    }

    #[test]
    fn works_in_single_precision() {
        let w = vec![vec![Some(0.9f32), Some(0.85)], vec![Some(0.88), None]];
        assert_eq!(max_weight_matching(&w, 2), [(0, 1), (1, 0)]);
    }
}

//! Rectangular min-cost assignment.
//!
//! [`min_cost_assignment`] runs the shortest-augmenting-path Hungarian method
//! with row/column potentials in `O(rows² · cols)`. [`lexicographic_assignment`]
//! then pins rows one at a time to the lowest column that still admits an
//! optimal completion, which makes tie-breaking deterministic.

/// Relative tolerance under which two assignment totals are considered tied.
const TIE_TOLERANCE: f64 = 1e-10;

/// Column assigned to each row, minimizing the summed cost.
///
/// `cost` is row-major with `rows <= cols`; every row receives a distinct
/// column.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    debug_assert!(n <= m, "more rows than columns");
    debug_assert!(cost.iter().all(|r| r.len() == m));

    // 1-based with a virtual column 0, following the classical formulation.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
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
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut cols = vec![usize::MAX; n];
    for j in 1..=m {
        if owner[j] != 0 {
            cols[owner[j] - 1] = j - 1;
        }
    }
    cols
}

/// Sum of `cost[row][cols[row]]`, accumulated in row order.
pub fn assignment_cost(cost: &[Vec<f64>], cols: &[usize]) -> f64 {
    cols.iter()
        .enumerate()
        .map(|(row, &col)| cost[row][col])
        .sum()
}

/// Optimal assignment whose column sequence is lexicographically smallest
/// among all optimal assignments.
pub fn lexicographic_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    let best = assignment_cost(cost, &min_cost_assignment(cost));
    let tol = TIE_TOLERANCE * best.abs().max(1.0);

    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    let mut free: Vec<usize> = (0..m).collect();
    let mut prefix = 0.0;
    for row in 0..n {
        let mut picked = None;
        for (pos, &col) in free.iter().enumerate() {
            let rest_cols: Vec<usize> = free.iter().copied().filter(|&c| c != col).collect();
            let sub: Vec<Vec<f64>> = cost[row + 1..]
                .iter()
                .map(|r| rest_cols.iter().map(|&c| r[c]).collect())
                .collect();
            let sub_best = assignment_cost(&sub, &min_cost_assignment(&sub));
            if prefix + cost[row][col] + sub_best <= best + tol {
                picked = Some(pos);
                break;
            }
        }
        // The column of an optimal solution always qualifies, so a pick exists
        // up to rounding; fall back to the cheapest completion otherwise.
        let pos = picked.unwrap_or(0);
        let col = free.remove(pos);
        prefix += cost[row][col];
        chosen.push(col);
    }
    chosen
}

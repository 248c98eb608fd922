//! Minimum-cost rectangular assignment.
//!
//! `hungarian` returns an exact optimum, and among equal-cost optima the
//! lexicographically smallest pair sequence. The potentials-based core
//! solver is O(n^2 m); the deterministic tie-break wraps it with a
//! fix-one-pair-and-resolve pass per row, which is still far below a
//! millisecond at tracking problem sizes.

/// Optimal row-to-column assignment minimizing total cost.
///
/// Returns `min(rows, cols)` pairs sorted by row, columns distinct. Among
/// all minimum-cost assignments the result is the lexicographically
/// smallest sequence of `(row, col)` pairs; when there are more rows than
/// columns this also pins which rows are left out (earlier rows are kept
/// unless skipping one is strictly cheaper). Costs must be finite; the
/// matrix must be rectangular.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let r = cost.len();
    if r == 0 {
        return Vec::new();
    }
    let c = cost[0].len();
    assert!(
        cost.iter().all(|row| row.len() == c),
        "cost matrix must be rectangular"
    );
    if c == 0 {
        return Vec::new();
    }
    debug_assert!(
        cost.iter().flatten().all(|v| v.is_finite()),
        "costs must be finite"
    );

    let k = r.min(c);
    let mut avail: Vec<usize> = (0..c).collect();
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(k);
    let mut fixed = 0.0;
    for row in 0..r {
        if pairs.len() == k {
            break;
        }
        let need = k - pairs.len();
        let rows_after = r - row - 1;
        let rest_rows: Vec<usize> = (row + 1..r).collect();

        // Cheapest completion for each candidate column; keep the smallest
        // column among equal totals.
        let mut best: Option<(f64, usize)> = None;
        for (ci, &col) in avail.iter().enumerate() {
            let mut rest_cols = avail.clone();
            rest_cols.remove(ci);
            let total = fixed + cost[row][col] + min_cost(cost, &rest_rows, &rest_cols);
            match best {
                Some((bt, _)) if total >= bt => {}
                _ => best = Some((total, col)),
            }
        }
        let (assign_total, assign_col) = best.expect("columns available while pairs remain");

        // Leaving this row out is allowed only while enough rows remain,
        // and taken only when strictly cheaper: keeping earlier rows
        // assigned is the lexicographically smaller outcome on ties.
        if rows_after >= need {
            let skip_total = fixed + min_cost(cost, &rest_rows, &avail);
            if skip_total < assign_total {
                continue;
            }
        }
        pairs.push((row, assign_col));
        fixed += cost[row][assign_col];
        avail.retain(|&x| x != assign_col);
    }
    pairs
}

/// Minimum total cost of assigning `min(|rows|, |cols|)` pairs within the
/// given index subsets. Classic potentials algorithm; the matrix is viewed
/// transposed when the row subset is the larger side.
fn min_cost(cost: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    let (rn, cn) = (rows.len(), cols.len());
    if rn == 0 || cn == 0 {
        return 0.0;
    }
    let flip = rn > cn;
    let (n, m) = if flip { (cn, rn) } else { (rn, cn) };
    // 1-based virtual matrix entry.
    let at = |i: usize, j: usize| -> f64 {
        if flip {
            cost[rows[j - 1]][cols[i - 1]]
        } else {
            cost[rows[i - 1]][cols[j - 1]]
        }
    };

    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1]; // row matched to each column, 0 = free
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
                if !used[j] {
                    let cur = at(i0, j) - u[i0] - v[j];
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
    // Sum the selected original entries rather than reading the potentials,
    // so the reported total is an exact sum of matrix values.
    let mut total = 0.0;
    for j in 1..=m {
        if p[j] != 0 {
            total += at(p[j], j);
        }
    }
    total
}

//! Brute-force greedy regression tree used as an independent reference for
//! the split search.

/// One greedy split: `(feature, threshold)`.
pub type Split = (usize, f64);

fn sse(ys: &[f64]) -> f64 {
    if ys.is_empty() {
        return 0.0;
    }
    let m = ys.iter().sum::<f64>() / ys.len() as f64;
    ys.iter().map(|y| (y - m) * (y - m)).sum()
}

/// Best split of `rows` by direct SSE evaluation of every (feature,
/// midpoint) pair. Ties (gains equal to 1e-12 relative) keep the lowest
/// feature, then the lowest threshold.
fn best(xs: &[Vec<f64>], ys: &[f64], rows: &[usize]) -> Option<Split> {
    let parent: Vec<f64> = rows.iter().map(|&r| ys[r]).collect();
    let parent_sse = sse(&parent);
    let mut found: Option<(f64, Split)> = None;
    for f in 0..xs[0].len() {
        let mut vals: Vec<f64> = rows.iter().map(|&r| xs[r][f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let t = if t < w[1] { t } else { w[0] };
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| xs[i][f] <= t);
            let lys: Vec<f64> = l.iter().map(|&i| ys[i]).collect();
            let rys: Vec<f64> = r.iter().map(|&i| ys[i]).collect();
            let gain = parent_sse - sse(&lys) - sse(&rys);
            if found.is_none_or(|(g, _)| gain > g + 1e-12 * g.abs()) {
                found = Some((gain, (f, t)));
            }
        }
    }
    found.filter(|&(g, _)| g > 1e-12 * parent_sse.max(1e-300)).map(|(_, s)| s)
}

/// Pre-order split sequence of the depth-limited greedy tree (≤ goes left,
/// leaves need at least one row, pure nodes are not split).
pub fn greedy_splits(xs: &[Vec<f64>], ys: &[f64], max_depth: usize) -> Vec<Split> {
    let mut out = Vec::new();
    grow(xs, ys, (0..ys.len()).collect(), 0, max_depth, &mut out);
    out
}

fn grow(xs: &[Vec<f64>], ys: &[f64], rows: Vec<usize>, depth: usize, max_depth: usize, out: &mut Vec<Split>) {
    if depth >= max_depth || rows.len() < 2 {
        return;
    }
    let Some((f, t)) = best(xs, ys, &rows) else { return };
    out.push((f, t));
    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| xs[i][f] <= t);
    grow(xs, ys, l, depth + 1, max_depth, out);
    grow(xs, ys, r, depth + 1, max_depth, out);
}

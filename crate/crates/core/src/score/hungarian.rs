/// Maximum-weight one-to-one assignment between rows and columns of
/// `weight`. Returns, per row, the matched column; exactly
/// `min(rows, cols)` rows are matched.
pub fn max_weight_assignment(weight: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weight.len();
    let cols = weight.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows > cols {
        let t: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| weight[i][j]).collect()).collect();
        let by_col = max_weight_assignment(&t);
        let mut out = vec![None; rows];
        for (j, i) in by_col.into_iter().enumerate() {
            if let Some(i) = i {
                out[i] = Some(j);
            }
        }
        return out;
    }
    // shortest augmenting path with potentials, 1-based with a virtual column 0
    let cost = |i: usize, j: usize| -weight[i - 1][j - 1];
    let (n, m) = (rows, cols);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
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
    let mut out = vec![None; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = Some(j - 1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn total(w: &[Vec<f64>], a: &[Option<usize>]) -> f64 {
        a.iter().enumerate().filter_map(|(i, j)| j.map(|j| w[i][j])).sum()
    }

    fn brute(w: &[Vec<f64>]) -> f64 {
        fn go(w: &[Vec<f64>], i: usize, used: &mut Vec<bool>, matched: usize, need: usize) -> f64 {
            if i == w.len() {
                return if matched == need { 0.0 } else { f64::NEG_INFINITY };
            }
            let mut best = go(w, i + 1, used, matched, need);
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.max(w[i][j] + go(w, i + 1, used, matched + 1, need));
                    used[j] = false;
                }
            }
            best
        }
        let cols = w[0].len();
        go(w, 0, &mut vec![false; cols], 0, w.len().min(cols))
    }

    #[test]
    fn reversed_identity() {
        let w = vec![vec![0.1, 0.2, 1.0], vec![0.0, 1.0, 0.3], vec![1.0, 0.4, 0.2]];
        assert_eq!(max_weight_assignment(&w), vec![Some(2), Some(1), Some(0)]);
    }

    #[test]
    fn rectangular_picks_best_survivor() {
        assert_eq!(max_weight_assignment(&[vec![0.2, 0.9]]), vec![Some(1)]);
        assert_eq!(max_weight_assignment(&[vec![0.2], vec![0.9]]), vec![None, Some(0)]);
        assert_eq!(max_weight_assignment(&[]), Vec::<Option<usize>>::new());
    }

    proptest! {
        #[test]
        fn matches_brute_force(rows in 1..=6usize, cols in 1..=6usize, seed in proptest::collection::vec(0.0..1.0f64, 36)) {
            let w: Vec<Vec<f64>> = (0..rows).map(|i| (0..cols).map(|j| seed[i * 6 + j]).collect()).collect();
            let a = max_weight_assignment(&w);
            prop_assert_eq!(a.iter().flatten().count(), rows.min(cols));
            let mut seen = std::collections::HashSet::new();
            prop_assert!(a.iter().flatten().all(|j| seen.insert(*j)));
            prop_assert!((total(&w, &a) - brute(&w)).abs() < 1e-9);
        }
    }
}

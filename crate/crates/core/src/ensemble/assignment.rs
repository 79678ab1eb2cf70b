//! Minimum-cost perfect assignment (Hungarian method, shortest augmenting
//! path form, `O(n^3)`).

/// Returns `assign` with `assign[row] = column` minimizing
/// `sum cost[row][assign[row]]` over a square cost matrix.
pub fn solve(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    assert!(cost.iter().all(|r| r.len() == n), "cost matrix must be square");
    if n == 0 {
        return Vec::new();
    }
    // 1-based potentials; column 0 is a virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut next = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[r - 1][col - 1] - u[r] - v[col];
                if reduced < min_slack[col] {
                    min_slack[col] = reduced;
                    way[col] = col0;
                }
                if min_slack[col] < delta {
                    delta = min_slack[col];
                    next = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_slack[col] -= delta;
                }
            }
            col0 = next;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for col in 1..=n {
        assign[owner[col] - 1] = col - 1;
    }
    assign
}

pub fn total_cost(cost: &[Vec<f64>], assign: &[usize]) -> f64 {
    assign.iter().enumerate().map(|(r, &c)| cost[r][c]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        fn rec(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == cost.len() {
                *best = best.min(acc);
                return;
            }
            for c in 0..cost.len() {
                if !used[c] {
                    used[c] = true;
                    rec(cost, row + 1, used, acc + cost[row][c], best);
                    used[c] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
        best
    }

    #[test]
    fn small_known_case() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = solve(&cost);
        assert_eq!(a, vec![1, 0, 2]);
        assert_eq!(total_cost(&cost, &a), 5.0);
    }

    #[test]
    fn empty_and_single() {
        assert!(solve(&[]).is_empty());
        assert_eq!(solve(&[vec![3.0]]), vec![0]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(n in 1usize..7, values in prop::collection::vec(0.0f64..10.0, 49)) {
            let cost: Vec<Vec<f64>> = (0..n).map(|r| values[r * 7..r * 7 + n].to_vec()).collect();
            let a = solve(&cost);
            let mut seen = a.clone();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
            prop_assert!((total_cost(&cost, &a) - brute_force(&cost)).abs() < 1e-9);
        }
    }
}

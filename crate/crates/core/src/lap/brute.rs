use crate::error::{Error, Result};

use super::{Assignment, CostMatrix};

pub const BRUTE_FORCE_MAX_N: usize = 9;

/// Exhaustive minimum over all `n!` permutations, visited in lexicographic
/// order; the first minimum wins. Sums accumulate in row order.
pub fn brute_force(costs: &CostMatrix) -> Result<Assignment> {
    let n = costs.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::SizeLimit {
            what: "brute-force matrix size",
            got: n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    let mut best = Assignment {
        perm: (0..n).collect(),
        total_cost: f64::INFINITY,
    };
    let mut current = Vec::with_capacity(n);
    let mut used = vec![false; n];
    search(costs, &mut current, &mut used, 0.0, &mut best);
    if n == 0 {
        best.total_cost = 0.0;
    }
    Ok(best)
}

fn search(costs: &CostMatrix, current: &mut Vec<usize>, used: &mut [bool], partial: f64, best: &mut Assignment) {
    let i = current.len();
    if i == costs.n() {
        if partial < best.total_cost {
            best.total_cost = partial;
            best.perm.clone_from(current);
        }
        return;
    }
    for j in 0..costs.n() {
        if !used[j] {
            used[j] = true;
            current.push(j);
            search(costs, current, used, partial + costs.get(i, j), best);
            current.pop();
            used[j] = false;
        }
    }
}

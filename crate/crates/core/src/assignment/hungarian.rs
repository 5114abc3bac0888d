use super::{require_square, Permutation, Solution, SolverStats};
use crate::error::Result;
use crate::matrix::DenseMatrix;

/// Exact maximizer by the Hungarian method with row-by-row augmentation,
/// `O(n³)`. Internally minimizes `max(F) - F`.
pub fn lap_exact(f: &DenseMatrix) -> Result<Solution> {
    let n = require_square(f)?;
    let (_, hi) = f.range().expect("non-empty");
    let cost = |i: usize, j: usize| hi - f.get(i, j);

    // 1-based potentials; column 0 is the virtual start of each augmentation
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
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
            for j in 0..=n {
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
    let mut forward = vec![0; n];
    for j in 1..=n {
        forward[owner[j] - 1] = j - 1;
    }
    let permutation = Permutation::from_solver(forward)?;
    let objective = permutation.objective(f);
    Ok(Solution {
        permutation,
        objective,
        stats: SolverStats {
            solver: "exact",
            rounds: n as u64,
            phases: 1,
            final_eps: None,
            objective,
        },
    })
}

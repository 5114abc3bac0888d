use super::{require_square, Permutation, Solution, SolverStats};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Largest size accepted by [`lap_bruteforce`].
pub const BRUTEFORCE_MAX_N: usize = 9;

/// Enumerate all `n!` permutations in lexicographic order and keep the first
/// maximizer.
pub fn lap_bruteforce(f: &DenseMatrix) -> Result<Solution> {
    let n = require_square(f)?;
    if n > BRUTEFORCE_MAX_N {
        return Err(Error::InvalidArgument(format!(
            "brute force is limited to n <= {BRUTEFORCE_MAX_N}, got {n}"
        )));
    }
    let mut p: Vec<usize> = (0..n).collect();
    let mut best = p.clone();
    let mut best_val = row_sum(f, &p);
    let mut visited = 1u64;
    while next_permutation(&mut p) {
        visited += 1;
        let v = row_sum(f, &p);
        if v > best_val {
            best_val = v;
            best.copy_from_slice(&p);
        }
    }
    Ok(Solution {
        permutation: Permutation::from_solver(best)?,
        objective: best_val,
        stats: SolverStats {
            solver: "bruteforce",
            rounds: visited,
            phases: 1,
            final_eps: None,
            objective: best_val,
        },
    })
}

fn row_sum(f: &DenseMatrix, p: &[usize]) -> f64 {
    p.iter().enumerate().map(|(i, &j)| f.get(i, j)).sum()
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

use std::collections::BTreeSet;

use super::matching::{hall_violator, maximum_matching};
use super::{require_square, AuctionConfig, Permutation, Solution, SolverStats};
use crate::error::{Error, Infeasibility, Result};
use crate::matrix::{DenseMatrix, SparseMatrix};

const NONE: usize = usize::MAX;

trait Rows {
    fn n(&self) -> usize;
    /// Best and second best `(column, F[i][j] - price[j])`. The second value
    /// is `-inf` when the row has a single entry.
    fn best_two(&self, i: usize, prices: &[f64]) -> Top;
    fn value(&self, i: usize, j: usize) -> f64;
    /// `(row, F[row][j])` for every stored entry of column `j`.
    fn column(&self, j: usize, out: &mut Vec<(usize, f64)>);
}

#[derive(Debug, Clone, Copy)]
struct Top {
    c1: usize,
    v1: f64,
    c2: usize,
    v2: f64,
}

impl Top {
    const EMPTY: Top = Top {
        c1: NONE,
        v1: f64::NEG_INFINITY,
        c2: NONE,
        v2: f64::NEG_INFINITY,
    };

    #[inline]
    fn push(&mut self, j: usize, v: f64) {
        if v > self.v1 {
            self.c2 = self.c1;
            self.v2 = self.v1;
            self.c1 = j;
            self.v1 = v;
        } else if v > self.v2 {
            self.c2 = j;
            self.v2 = v;
        }
    }
}

impl Rows for DenseMatrix {
    fn n(&self) -> usize {
        self.rows()
    }

    fn best_two(&self, i: usize, prices: &[f64]) -> Top {
        let mut best = Top::EMPTY;
        for (j, (&f, &p)) in self.row(i).iter().zip(prices).enumerate() {
            best.push(j, f - p);
        }
        best
    }

    fn value(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }

    fn column(&self, j: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        out.extend((0..self.rows()).map(|i| (i, self.get(i, j))));
    }
}

struct SparseRows<'a> {
    f: &'a SparseMatrix,
    col_start: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl<'a> SparseRows<'a> {
    fn new(f: &'a SparseMatrix) -> Self {
        let mut col_start = vec![0usize; f.cols() + 1];
        for &c in f.col_idx() {
            col_start[c + 1] += 1;
        }
        for c in 0..f.cols() {
            col_start[c + 1] += col_start[c];
        }
        let mut fill = col_start.clone();
        let mut entries = vec![(0, 0.0); f.nnz()];
        for i in 0..f.rows() {
            let (cols, vals) = f.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                entries[fill[c]] = (i, v);
                fill[c] += 1;
            }
        }
        SparseRows { f, col_start, entries }
    }
}

impl Rows for SparseRows<'_> {
    fn n(&self) -> usize {
        self.f.rows()
    }

    fn column(&self, j: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        out.extend_from_slice(&self.entries[self.col_start[j]..self.col_start[j + 1]]);
    }

    fn best_two(&self, i: usize, prices: &[f64]) -> Top {
        let mut best = Top::EMPTY;
        let (cols, vals) = self.f.row(i);
        for (&j, &f) in cols.iter().zip(vals) {
            best.push(j, f - prices[j]);
        }
        best
    }

    fn value(&self, i: usize, j: usize) -> f64 {
        self.f.get(i, j).expect("assigned entry is stored")
    }
}

/// Forward auction with ε-scaling on a dense square payoff.
///
/// The result is within `n · eps_final` of the optimum. `None` uses
/// [`AuctionConfig::for_dense`].
pub fn lap_auction(f: &DenseMatrix, cfg: Option<AuctionConfig>) -> Result<Solution> {
    require_square(f)?;
    let cfg = cfg.unwrap_or_else(|| AuctionConfig::for_dense(f));
    let (lo, hi) = f.range().expect("non-empty");
    run(f, &cfg, hi - lo, "auction")
}

/// Forward auction restricted to the stored entries of `f`.
///
/// Fails with [`Infeasibility::Hall`] if the pattern has no perfect matching.
/// `None` uses [`AuctionConfig::for_sparse`].
pub fn lap_auction_sparse(f: &SparseMatrix, cfg: Option<AuctionConfig>) -> Result<Solution> {
    if f.rows() != f.cols() || f.rows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "assignment needs a non-empty square payoff, got {}x{}",
            f.rows(),
            f.cols()
        )));
    }
    if let Some(k) = f.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("stored payoff entry {k} is not finite")));
    }
    let matching = maximum_matching(f);
    if let Some((rows, columns)) = hall_violator(f, &matching) {
        return Err(Error::Infeasible(Infeasibility::Hall { rows, columns }));
    }
    let cfg = cfg.unwrap_or_else(|| AuctionConfig::for_sparse(f));
    let lo = f.values().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = f.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    run(&SparseRows::new(f), &cfg, hi - lo, "auction-sparse")
}

fn run<R: Rows>(f: &R, cfg: &AuctionConfig, span: f64, name: &'static str) -> Result<Solution> {
    cfg.validate()?;
    let n = f.n();
    let mut prices = vec![0.0f64; n];
    let mut owner = vec![NONE; n];
    let mut assigned = vec![NONE; n];
    let mut rounds = 0u64;
    let mut phases = 0u32;
    let mut eps = cfg.eps_start;
    let bound = n as f64 * cfg.eps_final;
    loop {
        phases += 1;
        owner.fill(NONE);
        assigned.fill(NONE);
        let mut waiting: BTreeSet<usize> = (0..n).collect();
        let mut cursor = 0;
        while let Some(&i) = waiting.range(cursor..).next().or_else(|| waiting.iter().next()) {
            waiting.remove(&i);
            cursor = i + 1;
            let Top { c1: j, v1, v2, .. } = f.best_two(i, &prices);
            if j == NONE {
                return Err(Error::Internal(format!("row {i} has no entries")));
            }
            let increment = if v2.is_finite() { v1 - v2 + eps } else { span + eps };
            prices[j] += increment;
            let prev = std::mem::replace(&mut owner[j], i);
            if prev != NONE {
                assigned[prev] = NONE;
                waiting.insert(prev);
            }
            assigned[i] = j;
            rounds += 1;
            if rounds > cfg.max_rounds {
                return Err(Error::NotConverged { rounds, eps });
            }
        }
        let primal: f64 = (0..n).map(|i| f.value(i, assigned[i])).sum();
        let dual = tightened_dual(f, &prices);
        if eps <= cfg.eps_final || dual - primal <= bound {
            break;
        }
        eps = (eps * cfg.eps_scale_factor).max(cfg.eps_final);
    }
    let permutation = Permutation::from_solver(assigned)?;
    let objective = (0..n).map(|i| f.value(i, permutation.apply(i))).sum();
    Ok(Solution {
        permutation,
        objective,
        stats: SolverStats {
            solver: name,
            rounds,
            phases,
            final_eps: Some(eps),
            objective,
        },
    })
}

/// Upper bound `Σ_j p_j + Σ_i max_j (F[i][j] - p_j)` on the optimum after one
/// sweep of coordinate descent over the column prices.
fn tightened_dual<R: Rows>(f: &R, prices: &[f64]) -> f64 {
    let n = f.n();
    let mut p = prices.to_vec();
    let mut top: Vec<Top> = (0..n).map(|i| f.best_two(i, &p)).collect();
    let mut col = Vec::new();
    for j in 0..n {
        f.column(j, &mut col);
        let (mut a1, mut a2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(i, v) in &col {
            let t = top[i];
            let s = if t.c1 == j { t.v2 } else { t.v1 };
            let a = v - s;
            if a > a1 {
                a2 = a1;
                a1 = a;
            } else if a > a2 {
                a2 = a;
            }
        }
        let target = p[j].min(a1).max(a2);
        if !(target < p[j]) {
            continue;
        }
        p[j] = target;
        for &(i, v) in &col {
            let value = v - target;
            let t = &mut top[i];
            if t.c1 == j {
                t.v1 = value;
            } else if t.c2 == j {
                t.v2 = value;
                if t.v2 > t.v1 {
                    std::mem::swap(&mut t.c1, &mut t.c2);
                    std::mem::swap(&mut t.v1, &mut t.v2);
                }
            } else {
                t.push(j, value);
            }
        }
    }
    p.iter().sum::<f64>() + top.iter().map(|t| t.v1).sum::<f64>()
}

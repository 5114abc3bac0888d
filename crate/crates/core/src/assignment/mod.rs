//! Linear assignment: maximize `Σ_i F[i][p(i)]` over permutations `p`.
//!
//! All solvers work in maximization form and break ties toward the smaller
//! column index.

mod auction;
mod bruteforce;
mod hungarian;
mod matching;

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, SparseMatrix};

pub use auction::{lap_auction, lap_auction_sparse};
pub use bruteforce::{lap_bruteforce, BRUTEFORCE_MAX_N};
pub use hungarian::lap_exact;
pub use matching::{hall_violator, maximum_matching};

static SOLVER_PERMUTATIONS: AtomicU64 = AtomicU64::new(0);
static SOLVER_REJECTIONS: AtomicU64 = AtomicU64::new(0);

/// Number of solver outputs checked for bijectivity in this process, and how
/// many of them failed the check.
pub fn bijection_audit() -> (u64, u64) {
    (
        SOLVER_PERMUTATIONS.load(Ordering::Relaxed),
        SOLVER_REJECTIONS.load(Ordering::Relaxed),
    )
}

/// `Ok` iff `p` is a bijection on `{0, …, p.len() - 1}`.
pub fn check_bijection(p: &[usize]) -> Result<()> {
    let n = p.len();
    let mut seen = vec![false; n];
    for (i, &j) in p.iter().enumerate() {
        if j >= n {
            return Err(Error::Validation(format!("entry {i} maps to {j}, outside 0..{n}")));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::Validation(format!("column {j} is used twice (again by row {i})")));
        }
    }
    Ok(())
}

/// A bijection `i ↦ p[i]` with its inverse.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn new(forward: Vec<usize>) -> Result<Self> {
        check_bijection(&forward)?;
        let mut inverse = vec![0; forward.len()];
        for (i, &j) in forward.iter().enumerate() {
            inverse[j] = i;
        }
        Ok(Permutation { forward, inverse })
    }

    /// Wraps a solver's output, recording the check in [`bijection_audit`].
    pub(crate) fn from_solver(forward: Vec<usize>) -> Result<Self> {
        SOLVER_PERMUTATIONS.fetch_add(1, Ordering::Relaxed);
        Self::new(forward).map_err(|e| {
            SOLVER_REJECTIONS.fetch_add(1, Ordering::Relaxed);
            Error::Internal(format!("solver returned a non-bijective map: {e}"))
        })
    }

    pub fn identity(n: usize) -> Self {
        let v: Vec<usize> = (0..n).collect();
        Permutation {
            forward: v.clone(),
            inverse: v,
        }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    pub fn apply(&self, i: usize) -> usize {
        self.forward[i]
    }

    pub fn inverted(&self) -> Permutation {
        Permutation {
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }

    /// `i ↦ other(self(i))`.
    pub fn then(&self, other: &Permutation) -> Result<Permutation> {
        if other.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot compose permutations of length {} and {}",
                self.len(),
                other.len()
            )));
        }
        Permutation::new(self.forward.iter().map(|&j| other.forward[j]).collect())
    }

    pub fn is_identity(&self) -> bool {
        self.forward.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// `Σ_i F[i][p(i)]`, summed in row order.
    pub fn objective(&self, f: &DenseMatrix) -> f64 {
        self.forward.iter().enumerate().map(|(i, &j)| f.get(i, j)).sum()
    }

    /// Same as [`Self::objective`]; `None` if some pair is not stored.
    pub fn objective_sparse(&self, f: &SparseMatrix) -> Option<f64> {
        let mut acc = 0.0;
        for (i, &j) in self.forward.iter().enumerate() {
            acc += f.get(i, j)?;
        }
        Some(acc)
    }

    /// One `i p_i` line per row.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.len() * 12);
        for (i, &j) in self.forward.iter().enumerate() {
            let _ = writeln!(s, "{i} {j}");
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut forward = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let l = ln + 1;
            let mut it = line.split_whitespace();
            let (a, b) = match (it.next(), it.next(), it.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => return Err(Error::parse(path, l, format!("expected 'i p_i', found {line:?}"))),
            };
            let i: usize = a.parse().map_err(|_| Error::parse(path, l, format!("bad row index {a:?}")))?;
            let j: usize = b.parse().map_err(|_| Error::parse(path, l, format!("bad column index {b:?}")))?;
            if i != forward.len() {
                return Err(Error::parse(path, l, format!("expected row {} but found {i}", forward.len())));
            }
            forward.push(j);
        }
        Permutation::new(forward).map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// ε-scaling schedule of the auction solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuctionConfig {
    pub eps_start: f64,
    pub eps_scale_factor: f64,
    pub eps_final: f64,
    pub max_rounds: u64,
}

/// Default bid budget of one auction solve.
pub const DEFAULT_MAX_ROUNDS: u64 = 2_000_000_000;

impl AuctionConfig {
    /// Defaults derived from the payoff range: `eps_start = (max - min) / 2`,
    /// factor 1/4, `eps_final = 1e-9 · max`.
    pub fn for_range(min: f64, max: f64) -> Self {
        let scale = if max.abs() > 0.0 { max.abs() } else { 1.0 };
        let eps_final = 1e-9 * scale;
        AuctionConfig {
            eps_start: ((max - min) / 2.0).max(eps_final),
            eps_scale_factor: 0.25,
            eps_final,
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }

    pub fn for_dense(f: &DenseMatrix) -> Self {
        let (lo, hi) = f.range().unwrap_or((0.0, 0.0));
        Self::for_range(lo, hi)
    }

    pub fn for_sparse(f: &SparseMatrix) -> Self {
        let lo = f.values().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = f.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() {
            Self::for_range(lo, hi)
        } else {
            Self::for_range(0.0, 0.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.eps_final > 0.0
            && self.eps_start >= self.eps_final
            && self.eps_start.is_finite()
            && self.eps_scale_factor > 0.0
            && self.eps_scale_factor < 1.0
            && self.max_rounds > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid auction schedule: start {}, factor {}, final {}, rounds {}",
                self.eps_start, self.eps_scale_factor, self.eps_final, self.max_rounds
            )))
        }
    }
}

/// Counters reported by a solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverStats {
    pub solver: &'static str,
    /// Bids for the auction, augmentations for the Hungarian method,
    /// permutations visited for brute force.
    pub rounds: u64,
    pub phases: u32,
    pub final_eps: Option<f64>,
    pub objective: f64,
}

/// Optimal (or ε-optimal) assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub permutation: Permutation,
    pub objective: f64,
    pub stats: SolverStats,
}

pub(crate) fn require_square(f: &DenseMatrix) -> Result<usize> {
    if !f.is_square() {
        return Err(Error::InvalidArgument(format!(
            "assignment needs a square payoff, got {}x{}",
            f.rows(),
            f.cols()
        )));
    }
    if f.rows() == 0 {
        return Err(Error::InvalidArgument("assignment needs a non-empty payoff".into()));
    }
    if let Some(k) = f.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "payoff entry ({}, {}) is not finite",
            k / f.cols(),
            k % f.cols()
        )));
    }
    Ok(f.rows())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_inverse() {
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        assert_eq!(p.inverse(), &[1, 2, 0]);
        assert!(p.then(&p.inverted()).unwrap().is_identity());
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        assert!(Permutation::identity(0).is_empty());
    }

    #[test]
    fn text_round_trip() {
        let p = Permutation::new(vec![3, 1, 0, 2]).unwrap();
        let text = p.to_text();
        assert_eq!(text, "0 3\n1 1\n2 0\n3 2\n");
        assert_eq!(Permutation::parse(&text, Path::new("p")).unwrap(), p);
        assert!(matches!(
            Permutation::parse("0 1\n2 0\n", Path::new("p")),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Permutation::parse("0 1\n1 1\n", Path::new("p")),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn default_schedule() {
        let c = AuctionConfig::for_range(0.0, 4.0);
        assert_eq!(c.eps_start, 2.0);
        assert_eq!(c.eps_scale_factor, 0.25);
        assert_eq!(c.eps_final, 4e-9);
        c.validate().unwrap();
        AuctionConfig::for_range(1.0, 1.0).validate().unwrap();
        let bad = AuctionConfig { eps_scale_factor: 1.0, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rejects_non_square_and_nan() {
        let f = DenseMatrix::zeros(2, 3);
        assert!(lap_exact(&f).is_err());
        let mut g = DenseMatrix::zeros(2, 2);
        g.set(1, 0, f64::NAN);
        assert!(lap_exact(&g).is_err());
        assert!(lap_auction(&g, None).is_err());
    }
}

//! The filter itself: iterate density estimation and assignment until the
//! bijection stops changing, either on the full shapes or coarse to fine.

mod three_point;

use std::sync::Arc;

use serde::Serialize;

use crate::assignment::{lap_auction, lap_auction_sparse, lap_exact, AuctionConfig, Permutation, Solution, SolverStats};
use crate::density::{
    kernel_matrix_with, payoff_dense_with, payoff_sparse_streamed, weight_mask_with, KernelParams, MaskInput,
    MatchSet, StreamedPayoff, DEFAULT_KERNEL_FLOOR,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::matrix::DenseMatrix;
use crate::metric::MetricSpace;
use crate::sampling::SamplingHierarchy;

pub use three_point::{three_point_1d, three_point_density, ThreePoint};

/// Most retries of a widening policy before giving up.
pub const MAX_WIDENINGS: u32 = 3;

/// Vicinity factor of the multiscale mask before any widening.
pub const DEFAULT_VICINITY_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SolverChoice {
    Exact,
    /// `None` derives the schedule from each payoff.
    Auction { config: Option<AuctionConfig> },
}

impl Default for SolverChoice {
    fn default() -> Self {
        SolverChoice::Auction { config: None }
    }
}

/// What to do when a multiscale level admits no bijection inside its mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WidenPolicy {
    Fail,
    /// Multiply the vicinity factor by `step` and retry, at most
    /// [`MAX_WIDENINGS`] times per level.
    Widen { step: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmfConfig {
    pub kernel: KernelParams,
    pub max_iters: usize,
    pub stop_on_fixed_point: bool,
    pub solver: SolverChoice,
    pub record_history: bool,
    /// Assignment solves per multiscale level after the first.
    pub level_iters: usize,
    /// Kernel values below this are dropped from masked payoffs.
    pub kernel_floor: f64,
    #[serde(skip)]
    pub exec: Exec,
}

impl PmfConfig {
    pub fn new(kernel: KernelParams) -> Self {
        PmfConfig {
            kernel,
            max_iters: 10,
            stop_on_fixed_point: true,
            solver: SolverChoice::default(),
            record_history: false,
            level_iters: 1,
            kernel_floor: DEFAULT_KERNEL_FLOOR,
            exec: Exec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.level_iters == 0 {
            return Err(Error::InvalidArgument("iteration counts must be at least 1".into()));
        }
        if let SolverChoice::Auction { config: Some(c) } = &self.solver {
            c.validate()?;
        }
        if !(self.kernel_floor >= 0.0) {
            return Err(Error::InvalidArgument(format!("kernel floor {} is negative", self.kernel_floor)));
        }
        Ok(())
    }
}

/// One level of a multiscale run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelReport {
    pub size: usize,
    /// Covering radii of this level's samples.
    pub radius_x: f64,
    pub radius_y: f64,
    /// Vicinity factor the mask was finally built with; `None` on level 1.
    pub factor: Option<f64>,
    pub widenings: u32,
    pub mask_nnz: Option<usize>,
    pub iterations: usize,
    pub objective: f64,
    /// Map between positions in this level's sample lists.
    #[serde(skip)]
    pub map: Permutation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmfResult {
    #[serde(skip)]
    pub permutation: Permutation,
    /// `⟨P, F⟩` of every assignment solve, in order.
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
    /// Whether the last solve reproduced its input.
    pub fixed_point: bool,
    #[serde(skip)]
    pub history: Option<Vec<Permutation>>,
    pub solver_stats: Vec<SolverStats>,
    pub sigma_sq: f64,
    pub levels: Vec<LevelReport>,
}

impl PmfResult {
    pub fn total_widenings(&self) -> u32 {
        self.levels.iter().map(|l| l.widenings).sum()
    }
}

/// Row-wise argmax of `F`, ties to the smallest column. Not a bijection in
/// general.
pub fn pointwise_estimate(f: &DenseMatrix) -> Vec<usize> {
    (0..f.rows())
        .map(|i| {
            let row = f.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn solve_dense(f: &DenseMatrix, solver: &SolverChoice) -> Result<Solution> {
    match solver {
        SolverChoice::Exact => lap_exact(f),
        SolverChoice::Auction { config } => lap_auction(f, *config),
    }
}

fn require_equal_sizes(x: &MetricSpace, y: &MetricSpace) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!(
            "shapes have {} and {} points but a bijection needs equal counts; \
             resample the larger shape first (`pmf resample`)",
            x.len(),
            y.len()
        )));
    }
    Ok(x.len())
}

/// Iterate dense density estimation and assignment.
///
/// The first payoff is built from `init` (any number of pairs), later ones
/// from the full previous bijection. Stops at `max_iters` or, if enabled,
/// once a solve reproduces its input.
pub fn pmf_single_scale(x: &MetricSpace, y: &MetricSpace, init: &MatchSet, cfg: &PmfConfig) -> Result<PmfResult> {
    cfg.validate()?;
    let n = require_equal_sizes(x, y)?;
    init.validate(n, n)?;
    x.ensure_cache_capacity(2 * n);
    y.ensure_cache_capacity(2 * n);

    let mut previous = init.as_bijection(n);
    let mut matches = init.clone();
    let mut trace = Vec::new();
    let mut stats = Vec::new();
    let mut history = cfg.record_history.then(Vec::new);
    let mut fixed_point = false;
    let mut current = None;
    for _ in 0..cfg.max_iters {
        let kx = kernel_matrix_with(x, &matches.sources(), &cfg.kernel, cfg.exec)?;
        let ky = kernel_matrix_with(y, &matches.targets(), &cfg.kernel, cfg.exec)?;
        let f = payoff_dense_with(&kx, &ky, matches.weights(), cfg.exec)?;
        drop((kx, ky));
        let sol = solve_dense(f.as_dense().expect("dense payoff"), &cfg.solver)?;
        trace.push(sol.objective);
        stats.push(sol.stats.clone());
        if let Some(h) = history.as_mut() {
            h.push(sol.permutation.clone());
        }
        fixed_point = previous.as_ref() == Some(&sol.permutation);
        matches = MatchSet::from_permutation(&sol.permutation);
        previous = Some(sol.permutation.clone());
        current = Some(sol.permutation);
        if fixed_point && cfg.stop_on_fixed_point {
            break;
        }
    }
    Ok(PmfResult {
        permutation: current.expect("at least one iteration"),
        iterations_run: trace.len(),
        objective_trace: trace,
        fixed_point,
        history,
        solver_stats: stats,
        sigma_sq: cfg.kernel.sigma_sq(),
        levels: Vec::new(),
    })
}

fn positions(ids: &[usize], n: usize) -> Vec<usize> {
    let mut pos = vec![usize::MAX; n];
    for (p, &v) in ids.iter().enumerate() {
        pos[v] = p;
    }
    pos
}

/// Coarse-to-fine filtering over two sampling hierarchies with equal level
/// sizes whose last level covers every point.
///
/// Level 1 runs [`pmf_single_scale`] on the coarsest samples; `init` pairs
/// must be level-1 samples (global ids). Each further level solves one
/// assignment restricted to the vicinity mask of the previous level's map,
/// with kernels anchored at the previous samples and their images, plus
/// `level_iters - 1` refinements anchored at its own map.
pub fn pmf_multiscale(
    x: &Arc<MetricSpace>,
    y: &Arc<MetricSpace>,
    hx: &SamplingHierarchy,
    hy: &SamplingHierarchy,
    init: &MatchSet,
    cfg: &PmfConfig,
    widen: WidenPolicy,
) -> Result<PmfResult> {
    cfg.validate()?;
    let n = require_equal_sizes(x, y)?;
    if hx.sizes() != hy.sizes() {
        return Err(Error::InvalidArgument(format!(
            "hierarchies differ in level sizes: {:?} vs {:?}",
            hx.sizes(),
            hy.sizes()
        )));
    }
    if hx.sizes().last() != Some(&n) {
        return Err(Error::InvalidArgument(format!(
            "the finest level has {:?} samples but the shapes have {n} points",
            hx.sizes().last()
        )));
    }
    if let WidenPolicy::Widen { step } = widen {
        if !(step > 1.0 && step.is_finite()) {
            return Err(Error::InvalidArgument(format!("widening step must exceed 1, got {step}")));
        }
    }
    init.validate(n, n)?;
    let (lx, ly) = (hx.levels(), hy.levels());

    // level 1
    let px = positions(&lx[0].indices, n);
    let py = positions(&ly[0].indices, n);
    let mut local = Vec::with_capacity(init.len());
    for &(a, b) in init.pairs() {
        if px[a] == usize::MAX || py[b] == usize::MAX {
            return Err(Error::Validation(format!(
                "initial match ({a}, {b}) is not a pair of coarsest-level samples"
            )));
        }
        local.push((px[a], py[b]));
    }
    let local_init = match init.weights() {
        Some(w) => MatchSet::with_weights(local, w.to_vec())?,
        None => MatchSet::new(local)?,
    };
    let sub_x = MetricSpace::subset(x.clone(), lx[0].indices.clone())?;
    let sub_y = MetricSpace::subset(y.clone(), ly[0].indices.clone())?;
    let first = pmf_single_scale(&sub_x, &sub_y, &local_init, cfg)?;
    drop((sub_x, sub_y));

    let mut trace = first.objective_trace.clone();
    let mut stats = first.solver_stats.clone();
    let mut history = first.history.clone();
    let mut fixed_point = first.fixed_point;
    let mut current = first.permutation.clone();
    let mut levels = vec![LevelReport {
        size: lx[0].indices.len(),
        radius_x: lx[0].radius,
        radius_y: ly[0].radius,
        factor: None,
        widenings: 0,
        mask_nnz: None,
        iterations: first.iterations_run,
        objective: *first.objective_trace.last().expect("non-empty trace"),
        map: first.permutation,
    }];

    for i in 1..lx.len() {
        let (coarse_x, coarse_y) = (&lx[i - 1], &ly[i - 1]);
        let (fine_x, fine_y) = (&lx[i].indices, &ly[i].indices);
        let mut factor = DEFAULT_VICINITY_FACTOR;
        let mut widenings = 0;
        let (mask, sol) = loop {
            let attempt = (|| {
                let mask = weight_mask_with(
                    &MaskInput {
                        space_x: x,
                        space_y: y,
                        coarse_x: &coarse_x.indices,
                        coarse_y: &coarse_y.indices,
                        coarse_map: current.forward(),
                        radius_x: coarse_x.radius,
                        radius_y: coarse_y.radius,
                        fine_x,
                        fine_y,
                        factor,
                    },
                    cfg.exec,
                )?;
                let images: Vec<usize> = current.forward().iter().map(|&b| coarse_y.indices[b]).collect();
                let sol = solve_masked(x, y, &coarse_x.indices, &images, fine_x, fine_y, &mask, cfg)?;
                Ok::<_, Error>((mask, sol))
            })();
            match attempt {
                Ok(done) => break done,
                Err(Error::Infeasible(why)) => match widen {
                    WidenPolicy::Widen { step } if widenings < MAX_WIDENINGS => {
                        factor *= step;
                        widenings += 1;
                    }
                    _ => {
                        return Err(Error::Infeasible(why));
                    }
                },
                Err(e) => return Err(e),
            }
        };
        let mut sol = sol;
        let mut iterations = 1;
        trace.push(sol.objective);
        stats.push(sol.stats.clone());
        if let Some(h) = history.as_mut() {
            h.push(sol.permutation.clone());
        }
        fixed_point = false;
        while iterations < cfg.level_iters {
            let images: Vec<usize> = sol.permutation.forward().iter().map(|&b| fine_y[b]).collect();
            let next = solve_masked(x, y, fine_x, &images, fine_x, fine_y, &mask, cfg)?;
            iterations += 1;
            trace.push(next.objective);
            stats.push(next.stats.clone());
            if let Some(h) = history.as_mut() {
                h.push(next.permutation.clone());
            }
            fixed_point = next.permutation == sol.permutation;
            sol = next;
            if fixed_point && cfg.stop_on_fixed_point {
                break;
            }
        }
        levels.push(LevelReport {
            size: fine_x.len(),
            radius_x: lx[i].radius,
            radius_y: ly[i].radius,
            factor: Some(factor),
            widenings,
            mask_nnz: Some(mask.nnz()),
            iterations,
            objective: sol.objective,
            map: sol.permutation.clone(),
        });
        current = sol.permutation;
    }

    // finest positions back to vertex ids
    let (fine_x, fine_y) = (&lx[lx.len() - 1].indices, &ly[ly.len() - 1].indices);
    let mut forward = vec![0; n];
    for (s, &t) in current.forward().iter().enumerate() {
        forward[fine_x[s]] = fine_y[t];
    }
    Ok(PmfResult {
        permutation: Permutation::new(forward)?,
        iterations_run: trace.len(),
        objective_trace: trace,
        fixed_point,
        history,
        solver_stats: stats,
        sigma_sq: cfg.kernel.sigma_sq(),
        levels,
    })
}

#[allow(clippy::too_many_arguments)]
fn solve_masked(
    x: &MetricSpace,
    y: &MetricSpace,
    anchors_x: &[usize],
    anchors_y: &[usize],
    fine_x: &[usize],
    fine_y: &[usize],
    mask: &crate::density::WeightMask,
    cfg: &PmfConfig,
) -> Result<Solution> {
    let payoff = payoff_sparse_streamed(
        &StreamedPayoff {
            space_x: x,
            space_y: y,
            anchors_x,
            anchors_y,
            weights: None,
            fine_x,
            fine_y,
            params: &cfg.kernel,
            floor: cfg.kernel_floor,
        },
        mask,
        cfg.exec,
    )?;
    let config = match cfg.solver {
        SolverChoice::Auction { config } => config,
        SolverChoice::Exact => None,
    };
    lap_auction_sparse(payoff.as_sparse().expect("sparse payoff"), config)
}

//! Kernel density estimation in the product space.
//!
//! The density at a pair `(x_i, y_j)` is the Parzen sum
//! `Σ_k w_k K(d_X(x_i, ξ_k)) K(d_Y(y_j, η_k))` with the unnormalized Gaussian
//! `K(d) = exp(-d² / 2σ²)`. Over all pairs this is the payoff matrix
//! `F = K_X · diag(w) · K_Yᵀ`.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::assignment::Permutation;
use crate::error::{Error, Infeasibility, Result};
use crate::exec::Exec;
use crate::matrix::{DenseMatrix, SparseMatrix};
use crate::metric::{self, MetricSpace};

/// σ² as a fraction of the target surface area.
pub const DEFAULT_SIGMA_SQ_REL: f64 = 0.02;

/// Kernel values below this are stored as exact zeros in sparse payoffs.
pub const DEFAULT_KERNEL_FLOOR: f64 = 1e-12;

/// Anchors per batch when streaming kernel columns into a sparse payoff.
const STREAM_BATCH: usize = 64;

/// Rows per work item when accumulating sparse payoff entries.
const ROW_BLOCK: usize = 256;

/// Width of the Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelParams {
    /// Relative width the absolute σ² was resolved from, if any.
    pub sigma_sq_rel: Option<f64>,
    sigma_sq: f64,
}

impl KernelParams {
    /// σ² = `sigma_sq_rel` × the target's area measure
    /// (see [`MetricSpace::area_measure`]).
    pub fn resolve(sigma_sq_rel: f64, target: &MetricSpace) -> Result<Self> {
        if !(sigma_sq_rel > 0.0 && sigma_sq_rel.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "relative sigma^2 must be positive, got {sigma_sq_rel}"
            )));
        }
        Ok(KernelParams {
            sigma_sq_rel: Some(sigma_sq_rel),
            sigma_sq: sigma_sq_rel * target.area_measure(),
        })
    }

    pub fn absolute(sigma_sq: f64) -> Result<Self> {
        if !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma^2 must be positive, got {sigma_sq}")));
        }
        Ok(KernelParams {
            sigma_sq_rel: None,
            sigma_sq,
        })
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }

    #[inline]
    pub fn value(&self, d: f64) -> f64 {
        (-(d * d) / (2.0 * self.sigma_sq)).exp()
    }
}

/// `exp(-d² / 2σ²)`.
pub fn kernel_value(d: f64, params: &KernelParams) -> f64 {
    params.value(d)
}

/// Noisy input sample `{(ξ_k, η_k)}` with optional positive weights.
///
/// Pairs may repeat on either side.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSet {
    pairs: Vec<(usize, usize)>,
    weights: Option<Vec<f64>>,
}

impl MatchSet {
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("match set is empty".into()));
        }
        Ok(MatchSet { pairs, weights: None })
    }

    pub fn with_weights(pairs: Vec<(usize, usize)>, weights: Vec<f64>) -> Result<Self> {
        let mut m = Self::new(pairs)?;
        if weights.len() != m.pairs.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} pairs",
                weights.len(),
                m.pairs.len()
            )));
        }
        if let Some((k, w)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!("weight {w} of pair {k} is not positive")));
        }
        m.weights = Some(weights);
        Ok(m)
    }

    /// The full match set `{(i, p[i])}` of a bijection.
    pub fn from_permutation(p: &Permutation) -> Self {
        MatchSet {
            pairs: p.forward().iter().copied().enumerate().collect(),
            weights: None,
        }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn targets(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.1).collect()
    }

    /// Swap the roles of the two shapes.
    pub fn transposed(&self) -> Self {
        MatchSet {
            pairs: self.pairs.iter().map(|&(a, b)| (b, a)).collect(),
            weights: self.weights.clone(),
        }
    }

    pub fn validate(&self, n_x: usize, n_y: usize) -> Result<()> {
        for (k, &(a, b)) in self.pairs.iter().enumerate() {
            if a >= n_x || b >= n_y {
                return Err(Error::Validation(format!(
                    "match {k} ({a}, {b}) out of range for shapes with {n_x} and {n_y} points"
                )));
            }
        }
        Ok(())
    }

    /// The bijection this set describes, if it pairs every row and every
    /// column of an `n × n` problem exactly once with uniform weight.
    pub fn as_bijection(&self, n: usize) -> Option<Permutation> {
        if self.pairs.len() != n {
            return None;
        }
        if let Some(w) = &self.weights {
            if w.iter().any(|&x| x != w[0]) {
                return None;
            }
        }
        let mut forward = vec![usize::MAX; n];
        for &(a, b) in &self.pairs {
            if a >= n || forward[a] != usize::MAX {
                return None;
            }
            forward[a] = b;
        }
        Permutation::new(forward).ok()
    }

    /// Parse the match-file format: one `xi eta [weight]` per line, 0-based,
    /// `#` starts a comment.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut weights = Vec::new();
        let mut any_weight = false;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let l = ln + 1;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if !(2..=3).contains(&toks.len()) {
                return Err(Error::parse(path, l, format!("expected 'xi eta [weight]', found {line:?}")));
            }
            let idx = |t: &str| {
                t.parse::<usize>()
                    .map_err(|_| Error::parse(path, l, format!("cannot parse index {t:?}")))
            };
            pairs.push((idx(toks[0])?, idx(toks[1])?));
            let w = match toks.get(2) {
                Some(t) => {
                    any_weight = true;
                    t.parse::<f64>()
                        .ok()
                        .filter(|w| *w > 0.0 && w.is_finite())
                        .ok_or_else(|| Error::parse(path, l, format!("weight {t:?} is not a positive number")))?
                }
                None => 1.0,
            };
            weights.push(w);
        }
        if pairs.is_empty() {
            return Err(Error::parse(path, 0, "match file contains no pairs"));
        }
        if any_weight {
            Self::with_weights(pairs, weights)
        } else {
            Self::new(pairs)
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, &(a, b)) in self.pairs.iter().enumerate() {
            match &self.weights {
                Some(w) => {
                    let _ = writeln!(s, "{a} {b} {}", w[k]);
                }
                None => {
                    let _ = writeln!(s, "{a} {b}");
                }
            }
        }
        s
    }
}

/// Where a payoff matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Provenance {
    pub sigma_sq: Option<f64>,
    pub match_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Dense(DenseMatrix),
    Sparse(SparseMatrix),
}

/// Non-negative payoff `F`, dense or restricted to a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix {
    pub storage: Storage,
    pub provenance: Provenance,
}

impl PayoffMatrix {
    pub fn as_dense(&self) -> Option<&DenseMatrix> {
        match &self.storage {
            Storage::Dense(d) => Some(d),
            Storage::Sparse(_) => None,
        }
    }

    pub fn as_sparse(&self) -> Option<&SparseMatrix> {
        match &self.storage {
            Storage::Sparse(s) => Some(s),
            Storage::Dense(_) => None,
        }
    }

    pub fn with_sigma_sq(mut self, sigma_sq: f64) -> Self {
        self.provenance.sigma_sq = Some(sigma_sq);
        self
    }
}

/// Allowed `(row, column)` pairs of the multiscale assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMask {
    cols: usize,
    row_start: Vec<usize>,
    col_idx: Vec<usize>,
}

impl WeightMask {
    /// Build from per-row allowed column lists. Every row must be non-empty.
    pub fn from_rows(cols: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        let mut row_start = vec![0];
        let mut col_idx = Vec::new();
        for (s, mut r) in rows.into_iter().enumerate() {
            r.sort_unstable();
            r.dedup();
            if r.is_empty() {
                return Err(Error::Infeasible(Infeasibility::EmptyRow {
                    row: s,
                    nearest_coarse: Vec::new(),
                    hint: "every row of a weight mask needs an allowed column".into(),
                }));
            }
            if r.last().is_some_and(|&c| c >= cols) {
                return Err(Error::InvalidArgument(format!("mask row {s} has a column out of range")));
            }
            col_idx.extend(r);
            row_start.push(col_idx.len());
        }
        Ok(WeightMask {
            cols,
            row_start,
            col_idx,
        })
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self::from_rows(cols, vec![(0..cols).collect(); rows]).expect("full mask")
    }

    pub fn diagonal(n: usize) -> Self {
        Self::from_rows(n, (0..n).map(|i| vec![i]).collect()).expect("diagonal mask")
    }

    pub fn rows(&self) -> usize {
        self.row_start.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, s: usize) -> &[usize] {
        &self.col_idx[self.row_start[s]..self.row_start[s + 1]]
    }

    pub fn allows(&self, s: usize, t: usize) -> bool {
        self.row(s).binary_search(&t).is_ok()
    }
}

/// `K[i][k] = K(d(x_i, anchors[k]))` as an `n × m` matrix.
pub fn kernel_matrix(space: &MetricSpace, anchors: &[usize], params: &KernelParams) -> Result<DenseMatrix> {
    kernel_matrix_with(space, anchors, params, Exec::default())
}

pub fn kernel_matrix_with(
    space: &MetricSpace,
    anchors: &[usize],
    params: &KernelParams,
    exec: Exec,
) -> Result<DenseMatrix> {
    if anchors.is_empty() {
        return Err(Error::InvalidArgument("kernel matrix needs at least one anchor".into()));
    }
    let (n, m) = (space.len(), anchors.len());
    metric::reserve_dense("kernel matrix", square_equivalent(n, m), space.dense_cap())?;
    space.ensure_cache_capacity(2 * m);
    let columns = exec
        .map_range(m, |k| space.distance_column(anchors[k]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut data = vec![0.0; n * m];
    exec.for_each_chunk_mut(&mut data, m * ROW_BLOCK, |start, block| {
        let first_row = start / m;
        for (r, row) in block.chunks_mut(m).enumerate() {
            let i = first_row + r;
            for (k, v) in row.iter_mut().enumerate() {
                *v = params.value(columns[k][i]);
            }
        }
    });
    DenseMatrix::new(n, m, data)
}

fn square_equivalent(rows: usize, cols: usize) -> usize {
    ((rows as f64) * (cols as f64)).sqrt().ceil() as usize
}

fn check_weights(weights: Option<&[f64]>, m: usize) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != m {
            return Err(Error::InvalidArgument(format!("{} weights for {m} matches", w.len())));
        }
    }
    Ok(())
}

/// `F[i][j] = Σ_k w_k · kx[i][k] · ky[j][k]`, accumulated in ascending `k`.
pub fn payoff_dense(kx: &DenseMatrix, ky: &DenseMatrix, weights: Option<&[f64]>) -> Result<PayoffMatrix> {
    payoff_dense_with(kx, ky, weights, Exec::default())
}

pub fn payoff_dense_with(
    kx: &DenseMatrix,
    ky: &DenseMatrix,
    weights: Option<&[f64]>,
    exec: Exec,
) -> Result<PayoffMatrix> {
    let m = kx.cols();
    if ky.cols() != m {
        return Err(Error::InvalidArgument(format!(
            "kernel matrices disagree on match count: {} vs {}",
            m,
            ky.cols()
        )));
    }
    check_weights(weights, m)?;
    let (nx, ny) = (kx.rows(), ky.rows());
    metric::reserve_dense("dense payoff", square_equivalent(nx, ny), metric::DEFAULT_DENSE_CAP)?;
    let mut data = vec![0.0; nx * ny];
    if ny > 0 {
        exec.for_each_chunk_mut(&mut data, ny * 16, |start, block| {
            let first_row = start / ny;
            for (r, out) in block.chunks_mut(ny).enumerate() {
                let a = kx.row(first_row + r);
                for (j, f) in out.iter_mut().enumerate() {
                    *f = dot(a, ky.row(j), weights);
                }
            }
        });
    }
    Ok(PayoffMatrix {
        storage: Storage::Dense(DenseMatrix::new(nx, ny, data)?),
        provenance: Provenance {
            sigma_sq: None,
            match_count: m,
        },
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64], weights: Option<&[f64]>) -> f64 {
    let mut acc = 0.0;
    match weights {
        Some(w) => {
            for k in 0..a.len() {
                acc += w[k] * a[k] * b[k];
            }
        }
        None => {
            for k in 0..a.len() {
                acc += a[k] * b[k];
            }
        }
    }
    acc
}

/// Inputs of the multiscale weighting mask between level `i` and `i + 1`.
///
/// All index lists hold global vertex ids. `coarse_map[k]` is the position in
/// `coarse_y` of the image of coarse sample `coarse_x[k]`.
#[derive(Debug, Clone, Copy)]
pub struct MaskInput<'a> {
    pub space_x: &'a MetricSpace,
    pub space_y: &'a MetricSpace,
    pub coarse_x: &'a [usize],
    pub coarse_y: &'a [usize],
    pub coarse_map: &'a [usize],
    pub radius_x: f64,
    pub radius_y: f64,
    pub fine_x: &'a [usize],
    pub fine_y: &'a [usize],
    /// Vicinity slack; 2 unless the caller widened it.
    pub factor: f64,
}

impl MaskInput<'_> {
    /// Global ids of the coarse images `p_i(k)` on Y.
    pub fn images(&self) -> Vec<usize> {
        self.coarse_map.iter().map(|&b| self.coarse_y[b]).collect()
    }
}

/// Fine pair `(s, t)` is excluded iff for some coarse sample `k`
/// either `d_X(s, x_k) < r_X` and `d_Y(t, p(k)) > f·r_Y`,
/// or `d_Y(t, p(k)) < r_Y` and `d_X(s, x_k) > f·r_X`.
///
/// Rows and columns of the mask are positions in `fine_x` and `fine_y`.
pub fn weight_mask(input: &MaskInput<'_>) -> Result<WeightMask> {
    weight_mask_with(input, Exec::default())
}

pub fn weight_mask_with(input: &MaskInput<'_>, exec: Exec) -> Result<WeightMask> {
    let MaskInput {
        space_x,
        space_y,
        coarse_x,
        coarse_y,
        coarse_map,
        radius_x: rx,
        radius_y: ry,
        fine_x,
        fine_y,
        factor,
    } = *input;
    if !(rx > 0.0 && ry > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "weight mask needs positive coarse radii, got {rx} and {ry}"
        )));
    }
    if !(factor >= 1.0 && factor.is_finite()) {
        return Err(Error::InvalidArgument(format!("vicinity factor must be at least 1, got {factor}")));
    }
    if coarse_map.len() != coarse_x.len() {
        return Err(Error::InvalidArgument("coarse map and coarse samples differ in length".into()));
    }
    crate::assignment::check_bijection(coarse_map)
        .map_err(|e| Error::InvalidArgument(format!("coarse map is not a bijection: {e}")))?;
    if coarse_y.len() != coarse_map.len() {
        return Err(Error::InvalidArgument("coarse samples on X and Y differ in number".into()));
    }
    let images = input.images();
    let (wide_x, wide_y) = (factor * rx, factor * ry);

    let pos_x = positions(fine_x, space_x.len())?;
    let pos_y = positions(fine_y, space_y.len())?;
    let ncoarse = coarse_x.len();

    // balls of radius f·r around each coarse sample and its image, as fine positions
    let balls = exec
        .map_range(ncoarse, |k| -> Result<(Vec<(usize, f64)>, Vec<(usize, f64)>)> {
            let bx = restrict(space_x.ball(coarse_x[k], wide_x)?, &pos_x);
            let by = restrict(space_y.ball(images[k], wide_y)?, &pos_y);
            Ok((bx, by))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    // per fine point: (k, d) for every coarse k within f·r, ascending k
    let mut near_x: Vec<Vec<(usize, f64)>> = vec![Vec::new(); fine_x.len()];
    let mut near_y: Vec<Vec<(usize, f64)>> = vec![Vec::new(); fine_y.len()];
    for (k, (bx, by)) in balls.iter().enumerate() {
        for &(s, d) in bx {
            near_x[s].push((k, d));
        }
        for &(t, d) in by {
            near_y[t].push((k, d));
        }
    }
    let loose_y: Vec<usize> = (0..fine_y.len())
        .filter(|&t| near_y[t].iter().all(|&(_, d)| d >= ry))
        .collect();

    let within = |list: &[(usize, f64)], k: usize| list.binary_search_by_key(&k, |e| e.0).is_ok();
    let rows = exec.map_range(fine_x.len(), |s| {
        let bx = &near_x[s];
        let inner: Vec<usize> = bx.iter().filter(|e| e.1 < rx).map(|e| e.0).collect();
        let mut candidates: Vec<usize> = match inner.first() {
            Some(&k0) => balls[k0].1.iter().map(|e| e.0).collect(),
            None => {
                let mut c: Vec<usize> = bx
                    .iter()
                    .flat_map(|&(k, _)| balls[k].1.iter().filter(|e| e.1 < ry).map(|e| e.0))
                    .collect();
                c.extend_from_slice(&loose_y);
                c.sort_unstable();
                c.dedup();
                c
            }
        };
        candidates.retain(|&t| {
            let by = &near_y[t];
            inner.iter().all(|&k| within(by, k))
                && by.iter().filter(|e| e.1 < ry).all(|e| within(bx, e.0))
        });
        candidates
    });

    for (s, r) in rows.iter().enumerate() {
        if r.is_empty() {
            let mut nearest = near_x[s].clone();
            nearest.sort_by(|a, b| a.1.total_cmp(&b.1));
            return Err(Error::Infeasible(Infeasibility::EmptyRow {
                row: fine_x[s],
                nearest_coarse: nearest.iter().take(3).map(|e| coarse_x[e.0]).collect(),
                hint: format!("no admissible target within the vicinity factor {factor}; widen the factor"),
            }));
        }
    }
    WeightMask::from_rows(fine_y.len(), rows)
}

fn positions(ids: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut pos = vec![usize::MAX; n];
    for (p, &v) in ids.iter().enumerate() {
        if v >= n || pos[v] != usize::MAX {
            return Err(Error::InvalidArgument(format!(
                "fine index {v} is out of range or repeated"
            )));
        }
        pos[v] = p;
    }
    Ok(pos)
}

fn restrict(ball: Vec<(usize, f64)>, pos: &[usize]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = ball
        .into_iter()
        .filter(|&(v, _)| pos[v] != usize::MAX)
        .map(|(v, d)| (pos[v], d))
        .collect();
    out.sort_unstable_by_key(|e| e.0);
    out
}

/// Payoff restricted to `mask`, from kernel matrices whose rows are the
/// mask's rows (`kx`) and columns (`ky`).
///
/// Stored values equal the corresponding [`payoff_dense`] entries exactly,
/// except that kernel values below `floor` count as zero.
pub fn payoff_sparse(
    kx: &DenseMatrix,
    ky: &DenseMatrix,
    weights: Option<&[f64]>,
    mask: &WeightMask,
    floor: f64,
) -> Result<PayoffMatrix> {
    let m = kx.cols();
    if ky.cols() != m || kx.rows() != mask.rows() || ky.rows() != mask.cols() {
        return Err(Error::InvalidArgument(format!(
            "kernel shapes {}x{} and {}x{} do not fit a {}x{} mask",
            kx.rows(),
            kx.cols(),
            ky.rows(),
            ky.cols(),
            mask.rows(),
            mask.cols()
        )));
    }
    check_weights(weights, m)?;
    let clip = |v: f64| if v < floor { 0.0 } else { v };
    let a: Vec<f64> = kx.data().iter().map(|&v| clip(v)).collect();
    let b: Vec<f64> = ky.data().iter().map(|&v| clip(v)).collect();
    let mut values = vec![0.0; mask.nnz()];
    accumulate(mask, &mut values, &a, &b, m, weights, Exec::default());
    finish_sparse(mask, values, m)
}

fn finish_sparse(mask: &WeightMask, values: Vec<f64>, m: usize) -> Result<PayoffMatrix> {
    let sparse = SparseMatrix::from_csr(
        mask.rows(),
        mask.cols(),
        mask.row_start.clone(),
        mask.col_idx.clone(),
        values,
    )?;
    Ok(PayoffMatrix {
        storage: Storage::Sparse(sparse),
        provenance: Provenance {
            sigma_sq: None,
            match_count: m,
        },
    })
}

/// `values[e] += Σ_kk w_kk · a[s][kk] · b[t][kk]` for every mask entry
/// `e = (s, t)`, adding terms one at a time in ascending `kk`. `a` and `b` are
/// row-major with `width` columns.
fn accumulate(
    mask: &WeightMask,
    values: &mut [f64],
    a: &[f64],
    b: &[f64],
    width: usize,
    weights: Option<&[f64]>,
    exec: Exec,
) {
    let mut blocks = Vec::new();
    let mut rest = values;
    let mut row = 0;
    while row < mask.rows() {
        let end = (row + ROW_BLOCK).min(mask.rows());
        let len = mask.row_start[end] - mask.row_start[row];
        let (head, tail) = rest.split_at_mut(len);
        blocks.push((row, end, head));
        rest = tail;
        row = end;
    }
    exec.for_each(blocks, |(lo, hi, out)| {
        let base = mask.row_start[lo];
        for s in lo..hi {
            let arow = &a[s * width..(s + 1) * width];
            for e in mask.row_start[s]..mask.row_start[s + 1] {
                let t = mask.col_idx[e];
                let brow = &b[t * width..(t + 1) * width];
                let mut acc = out[e - base];
                match weights {
                    Some(w) => {
                        for k in 0..width {
                            acc += w[k] * arow[k] * brow[k];
                        }
                    }
                    None => {
                        for k in 0..width {
                            acc += arow[k] * brow[k];
                        }
                    }
                }
                out[e - base] = acc;
            }
        }
    });
}

/// Inputs of a masked payoff whose kernel columns are computed on demand.
#[derive(Debug, Clone, Copy)]
pub struct StreamedPayoff<'a> {
    pub space_x: &'a MetricSpace,
    pub space_y: &'a MetricSpace,
    /// Kernel anchors on X (global ids).
    pub anchors_x: &'a [usize],
    /// Kernel anchors on Y (global ids), paired with `anchors_x`.
    pub anchors_y: &'a [usize],
    pub weights: Option<&'a [f64]>,
    /// Mask rows, as global ids on X.
    pub fine_x: &'a [usize],
    /// Mask columns, as global ids on Y.
    pub fine_y: &'a [usize],
    pub params: &'a KernelParams,
    pub floor: f64,
}

/// Masked payoff `F(s,t) = W(s,t) Σ_k w_k K_X(s,k) K_Y(t,k)` computed in
/// batches of anchors, so neither kernel matrix is ever held in full.
///
/// Memory is `O(batch · (|fine_x| + |fine_y|) + nnz(mask))`. Values are
/// bit-identical to [`payoff_sparse`] on the same inputs.
pub fn payoff_sparse_streamed(input: &StreamedPayoff<'_>, mask: &WeightMask, exec: Exec) -> Result<PayoffMatrix> {
    let m = input.anchors_x.len();
    if input.anchors_y.len() != m || m == 0 {
        return Err(Error::InvalidArgument(format!(
            "anchor lists must be non-empty and paired, got {} and {}",
            m,
            input.anchors_y.len()
        )));
    }
    check_weights(input.weights, m)?;
    if mask.rows() != input.fine_x.len() || mask.cols() != input.fine_y.len() {
        return Err(Error::InvalidArgument("mask shape does not match the fine index sets".into()));
    }
    let (nf_x, nf_y) = (input.fine_x.len(), input.fine_y.len());
    let params = *input.params;
    let clip = |v: f64| if v < input.floor { 0.0 } else { v };

    let mut values = vec![0.0; mask.nnz()];
    for start in (0..m).step_by(STREAM_BATCH) {
        let end = (start + STREAM_BATCH).min(m);
        let width = end - start;
        let columns = exec
            .map_range(2 * width, |c| -> Result<Vec<f64>> {
                let (space, fine, anchor) = if c < width {
                    (input.space_x, input.fine_x, input.anchors_x[start + c])
                } else {
                    (input.space_y, input.fine_y, input.anchors_y[start + c - width])
                };
                let col = space.distance_column_uncached(anchor)?;
                Ok(fine.iter().map(|&v| clip(params.value(col[v]))).collect())
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let a = transpose_columns(&columns[..width], nf_x);
        let b = transpose_columns(&columns[width..], nf_y);
        let w = input.weights.map(|w| &w[start..end]);
        accumulate(mask, &mut values, &a, &b, width, w, exec);
    }
    Ok(finish_sparse(mask, values, m)?.with_sigma_sq(params.sigma_sq()))
}

fn transpose_columns(columns: &[Vec<f64>], rows: usize) -> Vec<f64> {
    let width = columns.len();
    let mut out = vec![0.0; rows * width];
    for (k, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            out[i * width + k] = v;
        }
    }
    out
}

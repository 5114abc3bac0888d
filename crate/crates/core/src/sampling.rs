//! Farthest-point sampling hierarchies with covering radii.

use std::collections::BinaryHeap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::metric::MetricSpace;

/// One level of a sampling hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    /// Sample vertices in selection order. Each level extends the previous one.
    pub indices: Vec<usize>,
    /// Covering radius: the largest distance from any vertex to its nearest sample.
    pub radius: f64,
}

/// Nested farthest-point samples `n_1 < … < n_p` with decreasing covering radii.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingHierarchy {
    levels: Vec<Level>,
    seed: usize,
}

impl SamplingHierarchy {
    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn seed(&self) -> usize {
        self.seed
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.indices.len()).collect()
    }

    /// Text export: one line per level, `n_i r_i idx…`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for level in &self.levels {
            let _ = write!(s, "{} {}", level.indices.len(), level.radius);
            for i in &level.indices {
                let _ = write!(s, " {i}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut levels = Vec::new();
        for (ln, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |m: &str| Error::Validation(format!("hierarchy line {}: {m}", ln + 1));
            let mut t = line.split_whitespace();
            let size: usize = t.next().and_then(|x| x.parse().ok()).ok_or_else(|| bad("bad size"))?;
            let radius: f64 = t.next().and_then(|x| x.parse().ok()).ok_or_else(|| bad("bad radius"))?;
            let indices = t
                .map(|x| x.parse::<usize>().map_err(|_| bad("bad index")))
                .collect::<Result<Vec<_>>>()?;
            if indices.len() != size {
                return Err(bad("index count does not match level size"));
            }
            levels.push(Level { indices, radius });
        }
        let seed = levels
            .first()
            .and_then(|l: &Level| l.indices.first().copied())
            .ok_or_else(|| Error::Validation("empty hierarchy".into()))?;
        Ok(SamplingHierarchy { levels, seed })
    }
}

/// Default level schedule `{1000, 2000, 4000, 8000, 16000, n}` clipped to `n`.
pub fn default_schedule(n: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = [1000, 2000, 4000, 8000, 16000]
        .into_iter()
        .filter(|&s| s < n)
        .collect();
    sizes.push(n);
    sizes
}

pub fn farthest_point_sampling(space: &MetricSpace, level_sizes: &[usize], seed: usize) -> Result<SamplingHierarchy> {
    farthest_point_sampling_with(space, level_sizes, seed, Exec::default())
}

/// Greedy farthest-point sampling from `seed`; levels are prefixes of a
/// single run. Ties go to the smallest vertex index.
pub fn farthest_point_sampling_with(
    space: &MetricSpace,
    level_sizes: &[usize],
    seed: usize,
    exec: Exec,
) -> Result<SamplingHierarchy> {
    let n = space.len();
    validate_sizes(level_sizes, n)?;
    if seed >= n {
        return Err(Error::InvalidArgument(format!("seed {seed} out of range for {n} points")));
    }
    let total = *level_sizes.last().unwrap_or(&0);

    let mut min_dist = vec![f64::INFINITY; n];
    let mut order = Vec::with_capacity(total);
    let mut levels = Vec::with_capacity(level_sizes.len());
    let mut next_level = 0;
    let mut selector = if space.mesh().is_some() {
        Selector::Heap(BinaryHeap::new())
    } else {
        Selector::Scan(exec)
    };

    let mut current = seed;
    loop {
        order.push(current);
        selector.relax(space, current, &mut min_dist)?;
        while next_level < level_sizes.len() && order.len() == level_sizes[next_level] {
            levels.push(Level {
                indices: order.clone(),
                radius: min_dist.iter().copied().fold(0.0, f64::max),
            });
            next_level += 1;
        }
        if order.len() == total {
            break;
        }
        current = selector
            .farthest(&min_dist)
            .ok_or_else(|| Error::Internal("farthest-point sampling ran out of candidates".into()))?;
    }
    Ok(SamplingHierarchy { levels, seed })
}

fn validate_sizes(sizes: &[usize], n: usize) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::InvalidArgument("no level sizes given".into()));
    }
    if sizes[0] == 0 {
        return Err(Error::InvalidArgument("level sizes must be positive".into()));
    }
    if let Some(w) = sizes.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "level sizes must be strictly increasing, got {} then {}",
            w[0], w[1]
        )));
    }
    let last = sizes[sizes.len() - 1];
    if last > n {
        return Err(Error::InvalidArgument(format!("level size {last} exceeds the {n} available points")));
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    vertex: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    // max-heap on distance, then smallest vertex first
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

enum Selector {
    // lazily invalidated heap over pruned mesh updates
    Heap(BinaryHeap<Candidate>),
    Scan(Exec),
}

const SCAN_CHUNK: usize = 4096;

impl Selector {
    fn relax(&mut self, space: &MetricSpace, source: usize, min_dist: &mut [f64]) -> Result<()> {
        match self {
            Selector::Heap(heap) => {
                space.relax_min_distances(source, min_dist, |vertex, dist| {
                    heap.push(Candidate { dist, vertex })
                })?;
            }
            Selector::Scan(exec) => {
                let column = space.distance_column_uncached(source)?;
                exec.for_each_chunk_mut(min_dist, SCAN_CHUNK, |start, piece| {
                    for (o, m) in piece.iter_mut().enumerate() {
                        let d = column[start + o];
                        if d < *m {
                            *m = d;
                        }
                    }
                });
            }
        }
        Ok(())
    }

    fn farthest(&mut self, min_dist: &[f64]) -> Option<usize> {
        match self {
            Selector::Heap(heap) => {
                while let Some(c) = heap.pop() {
                    if c.dist == min_dist[c.vertex] && c.dist > 0.0 {
                        return Some(c.vertex);
                    }
                }
                None
            }
            Selector::Scan(exec) => {
                let chunks = min_dist.len().div_ceil(SCAN_CHUNK);
                let best = exec
                    .map_range(chunks, |c| {
                        let lo = c * SCAN_CHUNK;
                        let hi = (lo + SCAN_CHUNK).min(min_dist.len());
                        (lo..hi).fold(None, |acc: Option<Candidate>, v| {
                            let cand = Candidate { dist: min_dist[v], vertex: v };
                            Some(match acc {
                                Some(a) if a >= cand => a,
                                _ => cand,
                            })
                        })
                    })
                    .into_iter()
                    .flatten()
                    .max()?;
                (best.dist > 0.0).then_some(best.vertex)
            }
        }
    }
}

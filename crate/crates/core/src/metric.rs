//! Finite metric spaces with on-demand distance columns.
//!
//! Mesh spaces measure shortest paths on the edge graph weighted by
//! Euclidean edge lengths. This overestimates the true surface geodesic by
//! at most a factor set by the triangulation, which the Gaussian kernel
//! tolerates. Full `n × n` matrices are only ever assembled below a size
//! cap; everything else works column by column.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::geometry::TriMesh;

/// Largest `n` for which an `n × n` matrix may be materialized by default.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Column data budget of the cache, in `f64` entries (256 MiB).
const CACHE_BUDGET_ENTRIES: usize = 32 << 20;

pub type Column = Arc<[f64]>;

static PEAK_DENSE_DIM: AtomicUsize = AtomicUsize::new(0);

/// Largest side of any square dense matrix materialized in this process.
pub fn peak_dense_dim() -> usize {
    PEAK_DENSE_DIM.load(AtomicOrdering::Relaxed)
}

/// Admit an `n × n` dense allocation against `cap`, recording the peak.
pub fn reserve_dense(what: &'static str, n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::SizeCap {
            what,
            requested: n,
            cap,
        });
    }
    PEAK_DENSE_DIM.fetch_max(n, AtomicOrdering::Relaxed);
    Ok(())
}

#[derive(Debug)]
enum Kind {
    Mesh(Arc<TriMesh>),
    Circle { n: usize, circumference: f64 },
    Explicit { n: usize, data: Arc<Vec<f64>> },
    Subset { parent: Arc<MetricSpace>, indices: Arc<Vec<usize>> },
}

/// A finite metric space.
#[derive(Debug)]
pub struct MetricSpace {
    kind: Kind,
    cache: Mutex<ColumnCache>,
    dense_cap: usize,
}

#[derive(Debug)]
struct ColumnCache {
    capacity: usize,
    tick: u64,
    entries: HashMap<usize, (Column, u64)>,
}

impl ColumnCache {
    fn get(&mut self, source: usize) -> Option<Column> {
        self.tick += 1;
        let tick = self.tick;
        self.entries.get_mut(&source).map(|(c, t)| {
            *t = tick;
            c.clone()
        })
    }

    fn peek(&self, source: usize) -> Option<Column> {
        self.entries.get(&source).map(|(c, _)| c.clone())
    }

    fn insert(&mut self, source: usize, column: Column) -> Column {
        if let Some((existing, _)) = self.entries.get(&source) {
            return existing.clone();
        }
        if self.capacity == 0 {
            return column;
        }
        while self.entries.len() >= self.capacity {
            let oldest = self
                .entries
                .iter()
                .min_by_key(|(k, (_, t))| (*t, **k))
                .map(|(k, _)| *k);
            match oldest {
                Some(k) => {
                    self.entries.remove(&k);
                }
                None => break,
            }
        }
        self.tick += 1;
        self.entries.insert(source, (column.clone(), self.tick));
        column
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    vertex: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    // min-heap on (dist, vertex)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths on the mesh edge graph, settling vertices in
/// `(distance, index)` order and stopping once the frontier exceeds `radius`.
/// Calls `visit(v, d)` once per settled vertex.
fn dijkstra(mesh: &TriMesh, source: usize, radius: f64, dist: &mut [f64], mut visit: impl FnMut(usize, f64)) {
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapItem {
        dist: 0.0,
        vertex: source,
    });
    while let Some(HeapItem { dist: d, vertex: v }) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        if d > radius {
            break;
        }
        visit(v, d);
        for &(w, len) in mesh.neighbors(v) {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(HeapItem { dist: nd, vertex: w });
            }
        }
    }
}

impl MetricSpace {
    fn with_kind(kind: Kind) -> Self {
        let n = match &kind {
            Kind::Mesh(m) => m.n_vertices(),
            Kind::Circle { n, .. } | Kind::Explicit { n, .. } => *n,
            Kind::Subset { indices, .. } => indices.len(),
        };
        MetricSpace {
            kind,
            cache: Mutex::new(ColumnCache {
                capacity: (2 * n).min(CACHE_BUDGET_ENTRIES / n.max(1)).max(4),
                tick: 0,
                entries: HashMap::new(),
            }),
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }

    /// Edge-graph geodesic space of a mesh.
    pub fn from_mesh(mesh: TriMesh) -> Self {
        Self::with_kind(Kind::Mesh(Arc::new(mesh)))
    }

    pub fn from_mesh_arc(mesh: Arc<TriMesh>) -> Self {
        Self::with_kind(Kind::Mesh(mesh))
    }

    /// `n` equally spaced points on a circle; distances are arc lengths.
    pub fn circle(n: usize, circumference: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("circle needs at least one point".into()));
        }
        if !(circumference > 0.0 && circumference.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "circle circumference must be positive, got {circumference}"
            )));
        }
        Ok(Self::with_kind(Kind::Circle { n, circumference }))
    }

    /// Space given by a full row-major distance matrix.
    ///
    /// Symmetry, zero diagonal and non-negativity are checked exhaustively.
    /// The triangle inequality is checked on every triple for `n ≤ 64` and
    /// on a deterministic sample of triples above that.
    pub fn explicit(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(Error::Validation(format!(
                "explicit metric needs {n}x{n} = {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        let at = |i: usize, j: usize| data[i * n + j];
        for i in 0..n {
            if at(i, i) != 0.0 {
                return Err(Error::Validation(format!("d({i},{i}) = {} is not zero", at(i, i))));
            }
            for j in 0..n {
                let d = at(i, j);
                if !(d >= 0.0 && d.is_finite()) {
                    return Err(Error::Validation(format!("d({i},{j}) = {d} is not a finite non-negative number")));
                }
                if (d - at(j, i)).abs() > 1e-12 * d.abs().max(1.0) {
                    return Err(Error::Validation(format!(
                        "matrix is not symmetric: d({i},{j}) = {d} but d({j},{i}) = {}",
                        at(j, i)
                    )));
                }
            }
        }
        let check = |i: usize, j: usize, k: usize| -> Result<()> {
            let slack = 1e-9 * (at(i, j) + at(j, k)).max(1.0);
            if at(i, k) > at(i, j) + at(j, k) + slack {
                return Err(Error::Validation(format!(
                    "triangle inequality fails: d({i},{k}) > d({i},{j}) + d({j},{k})"
                )));
            }
            Ok(())
        };
        if n <= 64 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        check(i, j, k)?;
                    }
                }
            }
        } else {
            let mut state = 0x9E37_79B9_7F4A_7C15u64;
            let mut next = || {
                // splitmix64
                state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
                let mut z = state;
                z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
                ((z ^ (z >> 31)) % n as u64) as usize
            };
            for _ in 0..(64 * 64 * 64) {
                let (i, j, k) = (next(), next(), next());
                check(i, j, k)?;
            }
        }
        Ok(Self::with_kind(Kind::Explicit {
            n,
            data: Arc::new(data),
        }))
    }

    /// Restriction of `parent` to `indices`; point `a` of the subset is
    /// point `indices[a]` of the parent.
    pub fn subset(parent: Arc<MetricSpace>, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("subset needs at least one index".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= parent.len()) {
            return Err(Error::InvalidArgument(format!(
                "subset index {bad} out of range for a space of {} points",
                parent.len()
            )));
        }
        Ok(Self::with_kind(Kind::Subset {
            parent,
            indices: Arc::new(indices),
        }))
    }

    pub fn len(&self) -> usize {
        match &self.kind {
            Kind::Mesh(m) => m.n_vertices(),
            Kind::Circle { n, .. } | Kind::Explicit { n, .. } => *n,
            Kind::Subset { indices, .. } => indices.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            Kind::Mesh(_) => "mesh-geodesic",
            Kind::Circle { .. } => "circle",
            Kind::Explicit { .. } => "explicit",
            Kind::Subset { .. } => "subset",
        }
    }

    pub fn mesh(&self) -> Option<&TriMesh> {
        match &self.kind {
            Kind::Mesh(m) => Some(m),
            _ => None,
        }
    }

    pub fn dense_cap(&self) -> usize {
        self.dense_cap
    }

    pub fn set_dense_cap(&mut self, cap: usize) {
        self.dense_cap = cap;
    }

    pub fn cache_capacity(&self) -> usize {
        self.lock_cache().capacity
    }

    /// Raise the column cache capacity to at least `columns`, within the
    /// cache memory budget.
    pub fn ensure_cache_capacity(&self, columns: usize) {
        let limit = CACHE_BUDGET_ENTRIES / self.len().max(1);
        let mut cache = self.lock_cache();
        cache.capacity = cache.capacity.max(columns.min(limit));
    }

    pub fn set_cache_capacity(&self, columns: usize) {
        let mut cache = self.lock_cache();
        cache.capacity = columns;
        while cache.entries.len() > columns {
            let oldest = cache
                .entries
                .iter()
                .min_by_key(|(k, (_, t))| (*t, **k))
                .map(|(k, _)| *k)
                .unwrap_or_default();
            cache.entries.remove(&oldest);
        }
    }

    pub fn cached_columns(&self) -> usize {
        self.lock_cache().entries.len()
    }

    fn lock_cache(&self) -> std::sync::MutexGuard<'_, ColumnCache> {
        self.cache.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Surface measure used to resolve area-relative kernel widths.
    ///
    /// Meshes use their surface area. A circle of circumference `C` uses the
    /// area of the sphere with the same radius, `4π (C/2π)² = C²/π`. Explicit
    /// spaces use the same formula with `C = 2·diameter`. Subsets inherit
    /// their parent's measure.
    pub fn area_measure(&self) -> f64 {
        match &self.kind {
            Kind::Mesh(m) => m.area(),
            Kind::Circle { circumference, .. } => circumference * circumference / std::f64::consts::PI,
            Kind::Explicit { data, .. } => {
                let diameter = data.iter().copied().fold(0.0, f64::max);
                4.0 * diameter * diameter / std::f64::consts::PI
            }
            Kind::Subset { parent, .. } => parent.area_measure(),
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "vertex index {i} out of range for a space of {} points",
                self.len()
            )));
        }
        Ok(())
    }

    /// Distance between two points.
    pub fn distance(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        match &self.kind {
            Kind::Circle { n, circumference } => Ok(circle_distance(*n, *circumference, i, j)),
            Kind::Explicit { n, data } => Ok(data[i * n + j]),
            Kind::Subset { parent, indices } => parent.distance(indices[i], indices[j]),
            Kind::Mesh(_) => Ok(self.distance_column(i)?[j]),
        }
    }

    /// Distances from `source` to every point, cached.
    ///
    /// Repeated calls return bit-identical columns.
    pub fn distance_column(&self, source: usize) -> Result<Column> {
        self.check_index(source)?;
        if let Some(c) = self.lock_cache().get(source) {
            return Ok(c);
        }
        let column: Column = self.compute_column(source)?.into();
        Ok(self.lock_cache().insert(source, column))
    }

    /// Like [`distance_column`](Self::distance_column) but never inserts into
    /// the cache (it still reads from it).
    pub fn distance_column_uncached(&self, source: usize) -> Result<Column> {
        self.check_index(source)?;
        if let Some(c) = self.lock_cache().peek(source) {
            return Ok(c);
        }
        Ok(self.compute_column(source)?.into())
    }

    fn compute_column(&self, source: usize) -> Result<Vec<f64>> {
        let n = self.len();
        match &self.kind {
            Kind::Circle { circumference, .. } => Ok((0..n)
                .map(|j| circle_distance(n, *circumference, source, j))
                .collect()),
            Kind::Explicit { data, .. } => Ok(data[source * n..(source + 1) * n].to_vec()),
            Kind::Subset { parent, indices } => {
                let full = parent.distance_column_uncached(indices[source])?;
                Ok(indices.iter().map(|&i| full[i]).collect())
            }
            Kind::Mesh(mesh) => {
                let mut dist = vec![f64::INFINITY; n];
                dijkstra(mesh, source, f64::INFINITY, &mut dist, |_, _| {});
                if let Some(bad) = dist.iter().position(|d| d.is_infinite()) {
                    return Err(Error::Internal(format!(
                        "vertex {bad} unreachable from {source} in a mesh that passed the connectivity check"
                    )));
                }
                Ok(dist)
            }
        }
    }

    /// All points within `radius` of `source` (inclusive), sorted by index.
    ///
    /// Distances are bit-identical to the corresponding entries of
    /// [`distance_column`](Self::distance_column).
    pub fn ball(&self, source: usize, radius: f64) -> Result<Vec<(usize, f64)>> {
        self.check_index(source)?;
        let mut out = match &self.kind {
            Kind::Mesh(mesh) => {
                if let Some(c) = self.lock_cache().peek(source) {
                    filter_ball(&c, radius)
                } else {
                    let mut dist = vec![f64::INFINITY; self.len()];
                    let mut out = Vec::new();
                    dijkstra(mesh, source, radius, &mut dist, |v, d| out.push((v, d)));
                    out
                }
            }
            _ => filter_ball(&self.distance_column_uncached(source)?, radius),
        };
        out.sort_unstable_by_key(|&(v, _)| v);
        Ok(out)
    }

    /// `min_dist[v] = min(min_dist[v], d(source, v))` for every `v`.
    ///
    /// On meshes the search is pruned wherever it cannot improve `min_dist`,
    /// which makes incremental farthest-point sampling cost proportional to
    /// the area each new sample claims rather than to the mesh size.
    pub fn relax_min_distances(
        &self,
        source: usize,
        min_dist: &mut [f64],
        mut on_decrease: impl FnMut(usize, f64),
    ) -> Result<()> {
        self.check_index(source)?;
        if min_dist.len() != self.len() {
            return Err(Error::InvalidArgument("min-distance buffer has the wrong length".into()));
        }
        match &self.kind {
            Kind::Mesh(mesh) => {
                let mut heap = BinaryHeap::new();
                if min_dist[source] > 0.0 {
                    min_dist[source] = 0.0;
                    on_decrease(source, 0.0);
                }
                heap.push(HeapItem {
                    dist: 0.0,
                    vertex: source,
                });
                while let Some(HeapItem { dist: d, vertex: v }) = heap.pop() {
                    if d > min_dist[v] {
                        continue;
                    }
                    for &(w, len) in mesh.neighbors(v) {
                        let nd = d + len;
                        if nd < min_dist[w] {
                            min_dist[w] = nd;
                            on_decrease(w, nd);
                            heap.push(HeapItem { dist: nd, vertex: w });
                        }
                    }
                }
            }
            _ => {
                let column = self.distance_column_uncached(source)?;
                for (v, (m, &d)) in min_dist.iter_mut().zip(column.iter()).enumerate() {
                    if d < *m {
                        *m = d;
                        on_decrease(v, d);
                    }
                }
            }
        }
        Ok(())
    }

    /// The full row-major distance matrix. Fails above the dense size cap.
    pub fn full_distance_matrix(&self) -> Result<Vec<f64>> {
        let n = self.len();
        reserve_dense("full distance matrix", n, self.dense_cap)?;
        if let Kind::Explicit { data, .. } = &self.kind {
            return Ok(data.as_ref().clone());
        }
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let c = self.distance_column_uncached(i)?;
            out[i * n..(i + 1) * n].copy_from_slice(&c);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (out[i * n + j], out[j * n + i]);
                if (a - b).abs() > 1e-9 {
                    return Err(Error::Internal(format!(
                        "distance matrix asymmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(out)
    }
}

fn filter_ball(column: &[f64], radius: f64) -> Vec<(usize, f64)> {
    column
        .iter()
        .enumerate()
        .filter(|(_, &d)| d <= radius)
        .map(|(v, &d)| (v, d))
        .collect()
}

fn circle_distance(n: usize, circumference: f64, i: usize, j: usize) -> f64 {
    let k = i.abs_diff(j);
    let steps = k.min(n - k);
    circumference * steps as f64 / n as f64
}

/// Read an explicit metric: first line `n`, then `n` rows of `n` numbers.
pub fn load_explicit(path: impl AsRef<Path>) -> Result<MetricSpace> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (l0, first) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let n: usize = first
        .parse()
        .map_err(|_| Error::parse(path, l0, format!("expected the point count, found {first:?}")))?;
    let mut data = Vec::with_capacity(n * n);
    for row in 0..n {
        let (l, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 0, format!("file ends after {row} of {n} rows")))?;
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(
                tok.parse::<f64>()
                    .map_err(|_| Error::parse(path, l, format!("cannot parse distance {tok:?}")))?,
            );
        }
        if data.len() - before != n {
            return Err(Error::parse(path, l, format!("row {row} has {} entries, expected {n}", data.len() - before)));
        }
    }
    if let Some((l, _)) = lines.next() {
        return Err(Error::parse(path, l, "trailing data after the last row"));
    }
    MetricSpace::explicit(n, data)
}

/// Write a row-major matrix in the explicit-metric text format.
pub fn write_explicit(path: impl AsRef<Path>, n: usize, data: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::with_capacity(n * n * 8);
    let _ = writeln!(s, "{n}");
    for i in 0..n {
        for j in 0..n {
            if j > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{}", data[i * n + j]);
        }
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::icosphere;
    use proptest::prelude::*;

    fn tetra() -> MetricSpace {
        let s = 1.0 / 2f64.sqrt();
        let v = vec![[0.0, 0.0, 0.0], [s, s, 0.0], [s, 0.0, s], [0.0, s, s]];
        MetricSpace::from_mesh(TriMesh::new(v, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]).unwrap())
    }

    #[test]
    fn circle_column() {
        let c = MetricSpace::circle(8, 8.0).unwrap();
        assert_eq!(&*c.distance_column(0).unwrap(), &[0.0, 1.0, 2.0, 3.0, 4.0, 3.0, 2.0, 1.0]);
    }

    #[test]
    fn circle_full_matrix() {
        let c = MetricSpace::circle(4, 4.0).unwrap();
        assert_eq!(
            c.full_distance_matrix().unwrap(),
            vec![0., 1., 2., 1., 1., 0., 1., 2., 2., 1., 0., 1., 1., 2., 1., 0.]
        );
    }

    #[test]
    fn tetrahedron_columns() {
        let t = tetra();
        for s in 0..4 {
            let mut c = t.distance_column(s).unwrap().to_vec();
            c.sort_by(f64::total_cmp);
            assert_eq!(c[0], 0.0);
            for d in &c[1..] {
                assert!((d - 1.0).abs() < 1e-12);
            }
        }
        let m = t.full_distance_matrix().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!((m[i * 4 + j] - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn explicit_returns_stored_matrix() {
        let data = vec![0.0, 2.0, 3.0, 2.0, 0.0, 4.0, 3.0, 4.0, 0.0];
        let e = MetricSpace::explicit(3, data.clone()).unwrap();
        assert_eq!(e.full_distance_matrix().unwrap(), data);
    }

    #[test]
    fn explicit_validation() {
        assert!(MetricSpace::explicit(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(MetricSpace::explicit(2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
        let msg = MetricSpace::explicit(3, vec![0., 1., 5., 1., 0., 1., 5., 1., 0.])
            .unwrap_err()
            .to_string();
        assert!(msg.contains("triangle"), "{msg}");
    }

    #[test]
    fn pole_to_pole_on_icosphere() {
        let mesh = icosphere(3);
        let north = (0..mesh.n_vertices())
            .max_by(|&a, &b| mesh.vertices()[a][1].total_cmp(&mesh.vertices()[b][1]))
            .unwrap();
        let south = (0..mesh.n_vertices())
            .min_by(|&a, &b| mesh.vertices()[a][1].total_cmp(&mesh.vertices()[b][1]))
            .unwrap();
        let space = MetricSpace::from_mesh(mesh);
        let d = space.distance_column(north).unwrap()[south];
        let pi = std::f64::consts::PI;
        // edge paths are chains of chords, so slightly shorter than the arc is possible
        assert!(d >= 0.97 * pi && d <= 1.1 * pi, "{d}");
    }

    #[test]
    fn columns_are_deterministic_and_cached() {
        let s = MetricSpace::from_mesh(icosphere(2));
        let a = s.distance_column(7).unwrap();
        let b = s.distance_column(7).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let c = s.distance_column_uncached(8).unwrap();
        let d = MetricSpace::from_mesh(icosphere(2)).distance_column(8).unwrap();
        assert_eq!(c.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), d.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn cache_is_bounded_lru() {
        let s = MetricSpace::circle(100, 1.0).unwrap();
        s.set_cache_capacity(3);
        for i in 0..10 {
            s.distance_column(i).unwrap();
        }
        assert_eq!(s.cached_columns(), 3);
    }

    #[test]
    fn size_cap_blocks_dense_assembly() {
        let mut s = MetricSpace::circle(100, 1.0).unwrap();
        s.set_dense_cap(50);
        assert!(matches!(s.full_distance_matrix(), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn ball_matches_column() {
        let s = MetricSpace::from_mesh(icosphere(3));
        let col = MetricSpace::from_mesh(icosphere(3)).distance_column(5).unwrap();
        let ball = s.ball(5, 0.6).unwrap();
        let expect: Vec<(usize, f64)> = col.iter().copied().enumerate().filter(|&(_, d)| d <= 0.6).collect();
        assert_eq!(ball, expect);
    }

    #[test]
    fn relax_matches_column_min() {
        let s = MetricSpace::from_mesh(icosphere(3));
        let mut pruned = vec![f64::INFINITY; s.len()];
        let mut brute = pruned.clone();
        for src in [0, 100, 300, 641] {
            s.relax_min_distances(src, &mut pruned, |_, _| {}).unwrap();
            let c = s.distance_column(src).unwrap();
            for (b, &d) in brute.iter_mut().zip(c.iter()) {
                *b = b.min(d);
            }
        }
        for (a, b) in pruned.iter().zip(&brute) {
            assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn subset_reads_parent() {
        let parent = Arc::new(MetricSpace::circle(8, 8.0).unwrap());
        let sub = MetricSpace::subset(parent, vec![0, 2, 4, 6]).unwrap();
        assert_eq!(&*sub.distance_column(1).unwrap(), &[2.0, 0.0, 2.0, 4.0]);
        assert_eq!(sub.area_measure(), 64.0 / std::f64::consts::PI);
    }

    #[test]
    fn explicit_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.txt");
        let c = MetricSpace::circle(5, 3.7).unwrap();
        let m = c.full_distance_matrix().unwrap();
        write_explicit(&p, 5, &m).unwrap();
        let back = load_explicit(&p).unwrap();
        assert_eq!(back.full_distance_matrix().unwrap(), m);
        std::fs::write(&p, "2\n0 1\n1\n").unwrap();
        assert!(matches!(load_explicit(&p), Err(Error::Parse { line: 3, .. })));
    }

    proptest! {
        #[test]
        fn circle_rotation_invariance(n in 1usize..40, i in 0usize..40, j in 0usize..40, r in 0usize..40) {
            let c = MetricSpace::circle(n, 2.5).unwrap();
            let (i, j, r) = (i % n, j % n, r % n);
            prop_assert_eq!(c.distance(i, j).unwrap(), c.distance((i + r) % n, (j + r) % n).unwrap());
            prop_assert_eq!(c.distance(i, j).unwrap(), c.distance(j, i).unwrap());
        }

        #[test]
        fn mesh_triangle_inequality(i in 0usize..162, j in 0usize..162, k in 0usize..162) {
            thread_local! {
                static S: MetricSpace = MetricSpace::from_mesh(icosphere(2));
            }
            S.with(|s| {
                let dij = s.distance(i, j).unwrap();
                let dik = s.distance(i, k).unwrap();
                let dkj = s.distance(k, j).unwrap();
                assert!(dij <= dik + dkj + 1e-12);
                assert!((dij - s.distance(j, i).unwrap()).abs() < 1e-12);
                assert_eq!(s.distance(i, i).unwrap(), 0.0);
            });
        }
    }
}

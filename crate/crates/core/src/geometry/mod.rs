//! Triangle meshes: validation, measurement and the edge graph used for
//! geodesic distances.

mod io;
mod shapes;

pub use io::{load_mesh, load_ply_with_colors, write_mesh, write_ply_colored, MeshFormat};
pub use shapes::{geodesic_sphere, icosphere, torus_grid};

use crate::error::{Error, Result};
use crate::metric::MetricSpace;
use crate::sampling::farthest_point_sampling;

pub type Point3 = [f64; 3];

/// An immutable, validated triangle mesh.
///
/// Invariants checked at construction: face indices in range, no repeated
/// vertex within a face, no zero-length edge, connected edge graph.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    // CSR adjacency: neighbors of v are adj[adj_start[v]..adj_start[v + 1]]
    adj_start: Vec<usize>,
    adj: Vec<(usize, f64)>,
}

/// Undirected edge with `a < b` and its Euclidean length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if n == 0 {
            return Err(Error::Validation("mesh has no vertices".into()));
        }
        if faces.is_empty() {
            return Err(Error::Validation("mesh has no faces".into()));
        }
        for (vi, v) in vertices.iter().enumerate() {
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::Validation(format!(
                    "vertex {vi} has a non-finite coordinate {v:?}"
                )));
            }
        }
        let mut pairs = Vec::with_capacity(faces.len() * 3);
        for (fi, f) in faces.iter().enumerate() {
            for &i in f {
                if i >= n {
                    return Err(Error::Validation(format!(
                        "face {fi} references vertex {i} but the mesh has {n} vertices"
                    )));
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Validation(format!(
                    "face {fi} repeats a vertex: {f:?}"
                )));
            }
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                pairs.push((a.min(b), a.max(b), fi));
            }
        }
        pairs.sort_unstable();
        pairs.dedup_by_key(|p| (p.0, p.1));

        let mut edges = Vec::with_capacity(pairs.len());
        for &(a, b, fi) in &pairs {
            let length = distance(&vertices[a], &vertices[b]);
            if length == 0.0 {
                return Err(Error::Validation(format!(
                    "face {fi} has a zero-length edge between vertices {a} and {b}"
                )));
            }
            edges.push(Edge { a, b, length });
        }

        let mut degree = vec![0usize; n + 1];
        for e in &edges {
            degree[e.a + 1] += 1;
            degree[e.b + 1] += 1;
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let adj_start = degree;
        let mut fill = adj_start.clone();
        let mut adj = vec![(0usize, 0.0f64); 2 * edges.len()];
        for e in &edges {
            adj[fill[e.a]] = (e.b, e.length);
            fill[e.a] += 1;
            adj[fill[e.b]] = (e.a, e.length);
            fill[e.b] += 1;
        }

        let mesh = TriMesh {
            vertices,
            faces,
            edges,
            adj_start,
            adj,
        };
        mesh.check_connected()?;
        Ok(mesh)
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.vertices.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &(w, _) in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        if count != n {
            let first = seen.iter().position(|s| !s).unwrap_or(0);
            return Err(Error::Validation(format!(
                "edge graph is disconnected: vertex {first} is unreachable from vertex 0 \
                 ({count} of {n} vertices reachable)"
            )));
        }
        Ok(())
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `v` with edge lengths.
    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adj[self.adj_start[v]..self.adj_start[v + 1]]
    }

    /// Total surface area, summed over faces with the cross-product formula.
    pub fn area(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| triangle_area(&self.vertices[f[0]], &self.vertices[f[1]], &self.vertices[f[2]]))
            .sum()
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounding_box(&self) -> (Point3, Point3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for c in 0..3 {
                lo[c] = lo[c].min(v[c]);
                hi[c] = hi[c].max(v[c]);
            }
        }
        (lo, hi)
    }
}

/// Surface area of `mesh`.
pub fn mesh_area(mesh: &TriMesh) -> f64 {
    mesh.area()
}

/// Largest pairwise distance among `sample_count` farthest-point samples
/// seeded at vertex 0.
///
/// This is a lower bound on the true diameter. Because farthest-point
/// samples are nested, the value never decreases as `sample_count` grows.
pub fn shape_diameter(space: &MetricSpace, sample_count: usize) -> Result<f64> {
    if sample_count < 2 {
        return Err(Error::InvalidArgument(format!(
            "shape_diameter needs at least 2 samples, got {sample_count}"
        )));
    }
    let count = sample_count.min(space.len());
    if count < 2 {
        return Err(Error::InvalidArgument(
            "shape_diameter needs a space with at least 2 points".into(),
        ));
    }
    let hierarchy = farthest_point_sampling(space, &[count], 0)?;
    let samples = &hierarchy.levels()[0].indices;
    let mut best = 0.0f64;
    for (a, &s) in samples.iter().enumerate() {
        let column = space.distance_column(s)?;
        for &t in &samples[a + 1..] {
            best = best.max(column[t]);
        }
    }
    Ok(best)
}

pub(crate) fn distance(a: &Point3, b: &Point3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn triangle_area(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    0.5 * (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn unit_tetrahedron() -> TriMesh {
        let s = 1.0 / 2f64.sqrt();
        // alternate corners of a cube with side s: all edges have length 1
        let v = vec![
            [0.0, 0.0, 0.0],
            [s, s, 0.0],
            [s, 0.0, s],
            [0.0, s, s],
        ];
        TriMesh::new(v, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]).unwrap()
    }

    #[test]
    fn tetrahedron_edges_and_area() {
        let m = unit_tetrahedron();
        assert_eq!(m.edges().len(), 6);
        for e in m.edges() {
            assert_relative_eq!(e.length, 1.0, epsilon = 1e-12);
        }
        assert_relative_eq!(mesh_area(&m), 3f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(3f64.sqrt(), 1.7320508, epsilon = 1e-7);
    }

    #[test]
    fn right_triangle_area() {
        let m = TriMesh::new(
            vec![[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [0.0, 4.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(mesh_area(&m), 6.0);
    }

    #[test]
    fn rejects_out_of_range_index() {
        let err = TriMesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![[0, 1, 2], [0, 1, 9]],
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("face 1") && msg.contains("vertex 9"), "{msg}");
    }

    #[test]
    fn rejects_degenerate_faces() {
        let v = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert!(TriMesh::new(v.clone(), vec![[0, 1, 1]]).is_err());
        let dup = vec![[0.0; 3], [0.0; 3], [0.0, 1.0, 0.0]];
        let msg = TriMesh::new(dup, vec![[0, 1, 2]]).unwrap_err().to_string();
        assert!(msg.contains("zero-length"), "{msg}");
    }

    #[test]
    fn rejects_disconnected() {
        let v = vec![
            [0.0; 3],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [5.0, 0.0, 0.0],
            [6.0, 0.0, 0.0],
            [5.0, 1.0, 0.0],
        ];
        let msg = TriMesh::new(v, vec![[0, 1, 2], [3, 4, 5]])
            .unwrap_err()
            .to_string();
        assert!(msg.contains("disconnected"), "{msg}");
    }

    #[test]
    fn boundary_meshes_are_accepted() {
        let v = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        let m = TriMesh::new(v, vec![[0, 1, 2], [1, 3, 2]]).unwrap();
        assert_eq!(m.edges().len(), 5);
        assert_relative_eq!(m.area(), 1.0);
    }

    #[test]
    fn icosphere_area_close_to_sphere() {
        let m = icosphere(3);
        assert_eq!(m.n_vertices(), 642);
        assert_eq!(m.faces().len(), 1280);
        let sphere = 4.0 * std::f64::consts::PI;
        assert!((m.area() - sphere).abs() < 0.02 * sphere, "{}", m.area());
    }

    #[test]
    fn diameter_examples() {
        let circle = MetricSpace::circle(16, 2.0 * std::f64::consts::PI).unwrap();
        assert_relative_eq!(
            shape_diameter(&circle, 2).unwrap(),
            std::f64::consts::PI,
            epsilon = 1e-12
        );
        let two = MetricSpace::explicit(2, vec![0.0, 5.0, 5.0, 0.0]).unwrap();
        assert_eq!(shape_diameter(&two, 2).unwrap(), 5.0);
        assert!(shape_diameter(&two, 1).is_err());

        let sphere = MetricSpace::from_mesh(icosphere(3));
        let d = shape_diameter(&sphere, 50).unwrap();
        let exact = sphere.full_distance_matrix().unwrap().into_iter().fold(0.0, f64::max);
        assert!(d <= exact && d >= 0.95 * exact, "diameter {d} vs {exact}");
    }

    #[test]
    fn diameter_monotone_in_sample_count() {
        let sphere = MetricSpace::from_mesh(icosphere(2));
        let mut last = 0.0;
        for k in [2, 3, 5, 10, 20, 40] {
            let d = shape_diameter(&sphere, k).unwrap();
            assert!(d >= last);
            last = d;
        }
    }

    #[test]
    fn area_invariant_under_rigid_motion() {
        let m = icosphere(2);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let moved: Vec<Point3> = m
            .vertices()
            .iter()
            .map(|v| [c * v[0] - s * v[1] + 2.0, s * v[0] + c * v[1] - 1.0, v[2] + 0.5])
            .collect();
        let m2 = TriMesh::new(moved, m.faces().to_vec()).unwrap();
        assert_relative_eq!(m.area(), m2.area(), max_relative = 1e-9);
    }
}

//! Synthetic meshes for fixtures, tests and benchmarks.

use std::collections::HashMap;

use super::{Point3, TriMesh};

/// Class-I geodesic sphere of unit radius: every icosahedron face is split
/// into `frequency²` triangles and the vertices are projected onto the
/// sphere. Has `10·f² + 2` vertices and `20·f²` faces.
pub fn geodesic_sphere(frequency: usize) -> TriMesh {
    assert!(frequency >= 1, "frequency must be positive");
    let f = frequency;
    let (corners, ico_faces) = icosahedron();

    // Shared vertices are keyed by their integer barycentric weights over
    // global icosahedron corners, so each one is created exactly once.
    let mut index: HashMap<Vec<(usize, usize)>, usize> = HashMap::new();
    let mut vertices: Vec<Point3> = Vec::new();
    let mut vertex_id = |weights: [(usize, usize); 3], vertices: &mut Vec<Point3>| -> usize {
        let mut key: Vec<(usize, usize)> = weights.iter().copied().filter(|&(_, w)| w > 0).collect();
        key.sort_unstable();
        *index.entry(key.clone()).or_insert_with(|| {
            let mut p = [0.0; 3];
            for &(c, w) in &key {
                for d in 0..3 {
                    p[d] += corners[c][d] * w as f64;
                }
            }
            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            vertices.push([p[0] / norm, p[1] / norm, p[2] / norm]);
            vertices.len() - 1
        })
    };

    let mut faces = Vec::with_capacity(20 * f * f);
    for [a, b, c] in ico_faces {
        // grid point (i, j) has weights (f - i - j, i, j) on (a, b, c)
        let mut id = vec![vec![0usize; f + 1]; f + 1];
        for i in 0..=f {
            for j in 0..=(f - i) {
                id[i][j] = vertex_id([(a, f - i - j), (b, i), (c, j)], &mut vertices);
            }
        }
        for i in 0..f {
            for j in 0..(f - i) {
                faces.push([id[i][j], id[i + 1][j], id[i][j + 1]]);
                if i + j + 1 < f {
                    faces.push([id[i + 1][j], id[i + 1][j + 1], id[i][j + 1]]);
                }
            }
        }
    }
    TriMesh::new(vertices, faces).expect("geodesic sphere is a valid mesh")
}

/// Unit icosphere after `subdivisions` rounds of 4-to-1 splitting
/// (642 vertices and 1280 faces at 3 subdivisions).
pub fn icosphere(subdivisions: u32) -> TriMesh {
    geodesic_sphere(1usize << subdivisions)
}

/// Triangulated torus on a `nu × nv` parameter grid with major radius
/// `major` and tube radius `minor`. Vertex `(u, v)` has index `u·nv + v`.
pub fn torus_grid(nu: usize, nv: usize, major: f64, minor: f64) -> TriMesh {
    assert!(nu >= 3 && nv >= 3, "torus grid needs at least 3x3 vertices");
    let tau = std::f64::consts::TAU;
    let mut vertices = Vec::with_capacity(nu * nv);
    for u in 0..nu {
        let (su, cu) = (tau * u as f64 / nu as f64).sin_cos();
        for v in 0..nv {
            let (sv, cv) = (tau * v as f64 / nv as f64).sin_cos();
            let r = major + minor * cv;
            vertices.push([r * cu, r * su, minor * sv]);
        }
    }
    let id = |u: usize, v: usize| (u % nu) * nv + (v % nv);
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for u in 0..nu {
        for v in 0..nv {
            faces.push([id(u, v), id(u + 1, v), id(u + 1, v + 1)]);
            faces.push([id(u, v), id(u + 1, v + 1), id(u, v + 1)]);
        }
    }
    TriMesh::new(vertices, faces).expect("torus grid is a valid mesh")
}

fn icosahedron() -> (Vec<Point3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let corners = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (corners, faces)
}

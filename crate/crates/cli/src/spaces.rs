//! Space arguments: mesh files, explicit distance matrices, `circle:N[:C]`
//! and `subset:<index-file>:<space>`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use pmf_core::geometry::{load_mesh, MeshFormat, TriMesh};
use pmf_core::metric::load_explicit;
use pmf_core::{Error, MetricSpace};

use crate::{usage, Failure, Stage};

pub struct Loaded {
    pub space: Arc<MetricSpace>,
    pub mesh: Option<Arc<TriMesh>>,
}

pub fn load_space(spec: &str, stage: &'static str) -> Result<Loaded, Failure> {
    if let Some(rest) = spec.strip_prefix("circle:") {
        let mut parts = rest.split(':');
        let n: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| usage(stage, format!("bad circle spec {spec:?}, expected circle:N[:C]")))?;
        let c = match parts.next() {
            Some(t) => t
                .parse::<f64>()
                .map_err(|_| usage(stage, format!("bad circumference in {spec:?}")))?,
            None => n as f64,
        };
        let space = MetricSpace::circle(n, c).stage(stage)?;
        return Ok(Loaded {
            space: Arc::new(space),
            mesh: None,
        });
    }
    if let Some(rest) = spec.strip_prefix("subset:") {
        let (index_file, parent) = rest
            .split_once(':')
            .ok_or_else(|| usage(stage, format!("bad subset spec {spec:?}, expected subset:<index-file>:<space>")))?;
        let parent = load_space(parent, stage)?;
        let indices = read_index_map(Path::new(index_file)).stage(stage)?;
        let space = MetricSpace::subset(parent.space, indices).stage(stage)?;
        return Ok(Loaded {
            space: Arc::new(space),
            mesh: None,
        });
    }
    let path = PathBuf::from(spec);
    if MeshFormat::from_path(&path).is_some() {
        let mesh = Arc::new(load_mesh(&path, None).stage(stage)?);
        return Ok(Loaded {
            space: Arc::new(MetricSpace::from_mesh_arc(mesh.clone())),
            mesh: Some(mesh),
        });
    }
    let space = load_explicit(&path).stage(stage)?;
    Ok(Loaded {
        space: Arc::new(space),
        mesh: None,
    })
}

pub fn load_mesh_only(spec: &str, stage: &'static str) -> Result<Arc<TriMesh>, Failure> {
    load_space(spec, stage)?
        .mesh
        .ok_or_else(|| usage(stage, format!("{spec} is not a mesh file (.off or .ply)")))
}

/// Lines `i original`, with `i` counting from 0.
pub fn read_index_map(path: &Path) -> pmf_core::Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: ln + 1,
            msg,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(bad(format!("expected 'i original', found {line:?}")));
        }
        let i: usize = toks[0].parse().map_err(|_| bad(format!("bad index {:?}", toks[0])))?;
        let v: usize = toks[1].parse().map_err(|_| bad(format!("bad index {:?}", toks[1])))?;
        if i != out.len() {
            return Err(bad(format!("expected row {} but found {i}", out.len())));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn index_map_text(indices: &[usize]) -> String {
    let mut s = String::new();
    for (i, v) in indices.iter().enumerate() {
        s.push_str(&format!("{i} {v}\n"));
    }
    s
}

//! ASCII OFF and PLY readers and writers.

use std::fmt::Write as _;
use std::path::Path;

use super::TriMesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("off") => Some(MeshFormat::Off),
            Some("ply") => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

/// Load a mesh, inferring the format from the extension when `format` is
/// `None`. Vertex order is preserved exactly.
pub fn load_mesh(path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<TriMesh> {
    let path = path.as_ref();
    let format = resolve_format(path, format)?;
    let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        MeshFormat::Off => parse_off(path, &as_text(path, &text)?),
        MeshFormat::Ply => parse_ply(path, &text).map(|(m, _)| m),
    }
}

/// Load an ASCII PLY file along with its per-vertex `red green blue`
/// properties, if present.
pub fn load_ply_with_colors(path: impl AsRef<Path>) -> Result<(TriMesh, Option<Vec<[u8; 3]>>)> {
    let path = path.as_ref();
    let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(path, &text)
}

pub fn write_mesh(mesh: &TriMesh, path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<()> {
    let path = path.as_ref();
    let text = match resolve_format(path, format)? {
        MeshFormat::Off => off_string(mesh),
        MeshFormat::Ply => ply_string(mesh, None),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write `mesh` as ASCII PLY with one RGB triple per vertex.
pub fn write_ply_colored(mesh: &TriMesh, colors: &[[u8; 3]], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if colors.len() != mesh.n_vertices() {
        return Err(Error::InvalidArgument(format!(
            "{} colors for {} vertices",
            colors.len(),
            mesh.n_vertices()
        )));
    }
    std::fs::write(path, ply_string(mesh, Some(colors))).map_err(|e| Error::io(path, e))
}

fn resolve_format(path: &Path, format: Option<MeshFormat>) -> Result<MeshFormat> {
    format.or_else(|| MeshFormat::from_path(path)).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "cannot infer mesh format of {} (expected .off or .ply)",
            path.display()
        ))
    })
}

fn as_text<'a>(path: &Path, bytes: &'a [u8]) -> Result<std::borrow::Cow<'a, str>> {
    std::str::from_utf8(bytes)
        .map(Into::into)
        .map_err(|_| Error::parse(path, 0, "file is not ASCII/UTF-8 text"))
}

// f64 Display is the shortest representation that round-trips exactly.
fn off_string(mesh: &TriMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "OFF");
    let _ = writeln!(s, "{} {} 0", mesh.n_vertices(), mesh.faces().len());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", v[0], v[1], v[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    s
}

fn ply_string(mesh: &TriMesh, colors: Option<&[[u8; 3]]>) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", mesh.n_vertices());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    if colors.is_some() {
        s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    let _ = writeln!(s, "element face {}", mesh.faces().len());
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    for (i, v) in mesh.vertices().iter().enumerate() {
        let _ = write!(s, "{} {} {}", v[0], v[1], v[2]);
        if let Some(c) = colors {
            let _ = write!(s, " {} {} {}", c[i][0], c[i][1], c[i][2]);
        }
        s.push('\n');
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    s
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_num<T: std::str::FromStr>(path: &Path, line: usize, tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(path, line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::parse(path, line, format!("cannot parse {what} from {tok:?}")))
}

fn parse_off(path: &Path, text: &str) -> Result<TriMesh> {
    let mut lines = content_lines(text);
    let (hl, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let mut head = header.split_whitespace();
    if head.next() != Some("OFF") {
        return Err(Error::parse(path, hl, format!("expected OFF header, found {header:?}")));
    }
    // counts may share the header line
    let rest: Vec<&str> = head.collect();
    let (cl, counts): (usize, Vec<&str>) = if rest.is_empty() {
        let (l, c) = lines
            .next()
            .ok_or_else(|| Error::parse(path, hl + 1, "missing counts line"))?;
        (l, c.split_whitespace().collect())
    } else {
        (hl, rest)
    };
    let nv: usize = parse_num(path, cl, counts.first().copied(), "vertex count")?;
    let nf: usize = parse_num(path, cl, counts.get(1).copied(), "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    for k in 0..nv {
        let (l, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 0, format!("file ends after {k} of {nv} vertices")))?;
        let mut t = line.split_whitespace();
        let mut p = [0.0; 3];
        for (c, name) in ["x", "y", "z"].iter().enumerate() {
            p[c] = parse_num(path, l, t.next(), name)?;
        }
        vertices.push(p);
    }
    let mut faces = Vec::with_capacity(nf);
    for k in 0..nf {
        let (l, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 0, format!("file ends after {k} of {nf} faces")))?;
        let mut t = line.split_whitespace();
        let count: usize = parse_num(path, l, t.next(), "face vertex count")?;
        if count != 3 {
            return Err(Error::parse(path, l, format!("face {k} has {count} vertices; only triangles are supported")));
        }
        let mut f = [0usize; 3];
        for slot in &mut f {
            *slot = parse_num(path, l, t.next(), "vertex index")?;
        }
        faces.push(f);
    }
    TriMesh::new(vertices, faces)
}

#[derive(Debug)]
enum Property {
    Scalar(String),
    List(String),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

fn parse_ply(path: &Path, bytes: &[u8]) -> Result<(TriMesh, Option<Vec<[u8; 3]>>)> {
    // the header is ASCII even for binary files, so find it before decoding
    let header_end = find_subslice(bytes, b"end_header")
        .ok_or_else(|| Error::parse(path, 1, "missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::parse(path, 1, "header is not ASCII"))?;
    let mut elements: Vec<Element> = Vec::new();
    let mut header_lines = 0;
    for (i, raw) in header.lines().enumerate() {
        header_lines = i + 1;
        let line = raw.trim();
        let l = i + 1;
        let mut t = line.split_whitespace();
        match t.next() {
            None | Some("comment") | Some("obj_info") => {}
            Some("ply") if l == 1 => {}
            Some("format") => match t.next() {
                Some("ascii") => {}
                Some(other) => {
                    return Err(Error::parse(path, l, format!("unsupported PLY format {other:?}; only ascii is accepted")))
                }
                None => return Err(Error::parse(path, l, "format line has no format")),
            },
            Some("element") => {
                let name = t.next().ok_or_else(|| Error::parse(path, l, "element without name"))?;
                let count = parse_num(path, l, t.next(), "element count")?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(path, l, "property before any element"))?;
                let toks: Vec<&str> = t.collect();
                let prop = match toks.as_slice() {
                    ["list", _, _, name] => Property::List(name.to_string()),
                    [_, name] => Property::Scalar(name.to_string()),
                    _ => return Err(Error::parse(path, l, format!("malformed property {line:?}"))),
                };
                el.props.push(prop);
            }
            Some(tok) if l == 1 => {
                return Err(Error::parse(path, l, format!("expected 'ply' magic, found {tok:?}")))
            }
            Some(other) => return Err(Error::parse(path, l, format!("unknown header keyword {other:?}"))),
        }
    }
    if !header.starts_with("ply") {
        return Err(Error::parse(path, 1, "expected 'ply' magic"));
    }
    let body = std::str::from_utf8(&bytes[header_end..])
        .map_err(|_| Error::parse(path, header_lines, "body is not ASCII"))?;
    // skip the remainder of the end_header line
    let mut lines = body
        .lines()
        .enumerate()
        .skip(1)
        .map(|(i, l)| (i + header_lines + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut vertices = Vec::new();
    let mut colors: Vec<[u8; 3]> = Vec::new();
    let mut faces = Vec::new();
    let mut seen_vertex = false;
    for el in &elements {
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        seen_vertex |= is_vertex;
        let pos = |name: &str| {
            el.props
                .iter()
                .position(|p| matches!(p, Property::Scalar(n) if n == name))
        };
        let xyz = [pos("x"), pos("y"), pos("z")];
        let rgb = [pos("red"), pos("green"), pos("blue")];
        let has_rgb = rgb.iter().all(Option::is_some);
        if is_vertex && xyz.iter().any(Option::is_none) {
            return Err(Error::parse(path, header_lines, "vertex element lacks x, y or z"));
        }
        let index_list = el.props.iter().position(
            |p| matches!(p, Property::List(n) if n == "vertex_indices" || n == "vertex_index"),
        );
        if is_face && index_list.is_none() {
            return Err(Error::parse(path, header_lines, "face element lacks vertex_indices"));
        }
        for k in 0..el.count {
            let (l, line) = lines.next().ok_or_else(|| {
                Error::parse(path, 0, format!("file ends after {k} of {} {} records", el.count, el.name))
            })?;
            let mut toks = line.split_whitespace();
            let mut scalars: Vec<&str> = Vec::with_capacity(el.props.len());
            let mut face: Option<Vec<usize>> = None;
            for (pi, p) in el.props.iter().enumerate() {
                match p {
                    Property::Scalar(_) => {
                        scalars.push(toks.next().ok_or_else(|| Error::parse(path, l, "too few values"))?);
                    }
                    Property::List(_) => {
                        let c: usize = parse_num(path, l, toks.next(), "list length")?;
                        let mut items = Vec::with_capacity(c);
                        for _ in 0..c {
                            items.push(toks.next().ok_or_else(|| Error::parse(path, l, "list too short"))?);
                        }
                        if Some(pi) == index_list {
                            let idx = items
                                .iter()
                                .map(|s| parse_num(path, l, Some(s), "vertex index"))
                                .collect::<Result<Vec<usize>>>()?;
                            face = Some(idx);
                        }
                        scalars.push("");
                    }
                }
            }
            if is_vertex {
                let mut p = [0.0; 3];
                for c in 0..3 {
                    p[c] = parse_num(path, l, Some(scalars[xyz[c].unwrap_or(0)]), "coordinate")?;
                }
                vertices.push(p);
                if has_rgb {
                    let mut rgbv = [0u8; 3];
                    for c in 0..3 {
                        rgbv[c] = parse_num(path, l, Some(scalars[rgb[c].unwrap_or(0)]), "color")?;
                    }
                    colors.push(rgbv);
                }
            } else if is_face {
                let idx = face.unwrap_or_default();
                if idx.len() != 3 {
                    return Err(Error::parse(path, l, format!("face {k} has {} vertices; only triangles are supported", idx.len())));
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
        }
    }
    if !seen_vertex {
        return Err(Error::parse(path, header_lines, "no vertex element"));
    }
    let has_colors = !colors.is_empty();
    let mesh = TriMesh::new(vertices, faces)?;
    Ok((mesh, has_colors.then_some(colors)))
}

fn find_subslice(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

//! Plain text formats for meshes, coefficient vectors and plot data.
//!
//! Mesh files hold a `nv nt nb` line, then `nv` lines `x y`, `nt` lines
//! `i j k` (0-based) and `nb` lines `i j marker`. Field dumps hold a
//! `space_kind degree ndof` line followed by one coefficient per line.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use monge_core::mesh::Mesh;
use monge_core::spaces::{FieldVector, ScalarSpace, SpaceKind};
use monge_core::Error as CoreError;

use crate::{read_file, write_file, Error, Result};

fn parse_err(line: usize, msg: impl std::fmt::Display) -> CoreError {
    CoreError::Parse(format!("line {line}: {msg}"))
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
        }
    }

    /// Next non-blank line as whitespace separated fields.
    fn record<T: FromStr>(&mut self, count: usize) -> monge_core::Result<Vec<T>> {
        for (i, line) in self.inner.by_ref() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != count {
                return Err(parse_err(i + 1, format!("expected {count} fields, found {}", fields.len())));
            }
            return fields
                .iter()
                .map(|f| f.parse::<T>().map_err(|_| parse_err(i + 1, format!("bad value `{f}`"))))
                .collect();
        }
        Err(CoreError::Parse("unexpected end of input".into()))
    }

    fn finish(mut self) -> monge_core::Result<()> {
        match self.inner.find(|(_, l)| !l.trim().is_empty()) {
            Some((i, _)) => Err(parse_err(i + 1, "trailing data")),
            None => Ok(()),
        }
    }
}

pub fn mesh_to_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    let nb = mesh.boundary_edges().len();
    writeln!(s, "{} {} {}", mesh.num_vertices(), mesh.num_triangles(), nb).unwrap();
    for p in mesh.vertices() {
        writeln!(s, "{:e} {:e}", p[0], p[1]).unwrap();
    }
    for t in mesh.triangles() {
        writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
    }
    for be in mesh.boundary_edges() {
        writeln!(s, "{} {} {}", be.vertices[0], be.vertices[1], be.marker).unwrap();
    }
    s
}

pub fn mesh_from_str(text: &str) -> monge_core::Result<Mesh> {
    let mut lines = Lines::new(text);
    let head: Vec<usize> = lines.record(3)?;
    let (nv, nt, nb) = (head[0], head[1], head[2]);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let v: Vec<f64> = lines.record(2)?;
        vertices.push([v[0], v[1]]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let t: Vec<usize> = lines.record(3)?;
        triangles.push([t[0], t[1], t[2]]);
    }
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let b: Vec<i64> = lines.record(3)?;
        if b[0] < 0 || b[1] < 0 {
            return Err(CoreError::Parse("negative vertex index in boundary edge".into()));
        }
        let marker = i32::try_from(b[2]).map_err(|_| CoreError::Parse("boundary marker out of range".into()))?;
        boundary.push(([b[0] as usize, b[1] as usize], marker));
    }
    lines.finish()?;
    Mesh::with_boundary(vertices, triangles, &boundary)
}

pub fn field_to_string(v: &FieldVector) -> String {
    let mut s = String::with_capacity(24 * (v.len() + 1));
    writeln!(s, "{} {} {}", v.kind.as_str(), v.degree, v.len()).unwrap();
    for x in &v.values {
        writeln!(s, "{x:.16e}").unwrap();
    }
    s
}

pub fn field_from_str(text: &str) -> monge_core::Result<FieldVector> {
    let mut lines = Lines::new(text);
    let head: Vec<String> = lines.record(3)?;
    let kind = SpaceKind::parse(&head[0]).ok_or_else(|| parse_err(1, format!("unknown space kind `{}`", head[0])))?;
    let degree: usize = head[1].parse().map_err(|_| parse_err(1, "bad degree"))?;
    let ndof: usize = head[2].parse().map_err(|_| parse_err(1, "bad dof count"))?;
    let mut values = Vec::with_capacity(ndof);
    for _ in 0..ndof {
        values.push(lines.record::<f64>(1)?[0]);
    }
    lines.finish()?;
    Ok(FieldVector::new(kind, degree, values))
}

/// `x y u` per mesh vertex, for gnuplot's `splot`.
pub fn vertex_plot_data(space: &ScalarSpace, u: &FieldVector) -> String {
    let mut s = String::from("# x y u\n");
    for (i, p) in space.mesh().vertices().iter().enumerate() {
        writeln!(s, "{:e} {:e} {:e}", p[0], p[1], u.values[i]).unwrap();
    }
    s
}

fn with_path<T>(path: &Path, r: monge_core::Result<T>) -> Result<T> {
    r.map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    with_path(path, mesh_from_str(&read_file(path)?))
}

pub fn write_mesh(path: &Path, mesh: &Mesh) -> Result<()> {
    write_file(path, &mesh_to_string(mesh))
}

pub fn read_field(path: &Path) -> Result<FieldVector> {
    with_path(path, field_from_str(&read_file(path)?))
}

pub fn write_field(path: &Path, v: &FieldVector) -> Result<()> {
    write_file(path, &field_to_string(v))
}

pub fn read_problem(path: &Path) -> Result<monge_core::problems::ProblemSpec> {
    with_path(path, monge_core::problems::parse_problem(&read_file(path)?))
}

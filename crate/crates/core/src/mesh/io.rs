//! Line-oriented `bdfmesh 1` text format.
//!
//! ```text
//! bdfmesh 1
//! vertices <n>
//! x y                  (n lines)
//! triangles <m>
//! i j k region         (m lines, 0-based)
//! boundary <b>
//! i j label            (b lines)
//! ```

use std::io::{BufRead, Write};

use super::{BoundaryEdge, Mesh};
use crate::error::{Error, Result};

pub fn write_mesh<W: Write>(mesh: &Mesh, mut out: W) -> Result<()> {
    writeln!(out, "bdfmesh 1")?;
    writeln!(out, "vertices {}", mesh.n_vertices())?;
    for p in mesh.vertices() {
        writeln!(out, "{:.16e} {:.16e}", p[0], p[1])?;
    }
    writeln!(out, "triangles {}", mesh.n_triangles())?;
    for (tri, region) in mesh.triangles().iter().zip(mesh.tri_region()) {
        writeln!(out, "{} {} {} {}", tri[0], tri[1], tri[2], region)?;
    }
    writeln!(out, "boundary {}", mesh.boundary_edges().len())?;
    for be in mesh.boundary_edges() {
        writeln!(out, "{} {} {}", be.vertices[0], be.vertices[1], be.label)?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_fields(&mut self) -> Result<Vec<String>> {
        loop {
            self.line += 1;
            let text = match self.inner.next() {
                Some(l) => l?,
                None => return Err(self.err("unexpected end of file")),
            };
            let fields: Vec<String> = text.split_whitespace().map(str::to_owned).collect();
            if !fields.is_empty() {
                return Ok(fields);
            }
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::MeshFormat { line: self.line, message: message.into() }
    }

    fn header(&mut self, keyword: &str) -> Result<usize> {
        let f = self.next_fields()?;
        if f.len() != 2 || f[0] != keyword {
            return Err(self.err(format!("expected `{keyword} <count>`")));
        }
        f[1].parse().map_err(|_| self.err(format!("bad {keyword} count `{}`", f[1])))
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("cannot parse `{s}`")))
    }

    fn record(&mut self, width: usize) -> Result<Vec<String>> {
        let f = self.next_fields()?;
        if f.len() != width {
            return Err(self.err(format!("expected {width} fields, found {}", f.len())));
        }
        Ok(f)
    }
}

/// Reads a mesh; refinement edges are reassigned by the longest-edge rule.
pub fn read_mesh<R: BufRead>(input: R) -> Result<Mesh> {
    let mut lines = Lines { inner: input.lines(), line: 0 };
    let head = lines.next_fields()?;
    if head != ["bdfmesh", "1"] {
        return Err(lines.err("missing `bdfmesh 1` header"));
    }
    let n = lines.header("vertices")?;
    let mut vertices = Vec::with_capacity(n);
    for _ in 0..n {
        let f = lines.record(2)?;
        vertices.push([lines.parse(&f[0])?, lines.parse(&f[1])?]);
    }
    let m = lines.header("triangles")?;
    let mut triangles = Vec::with_capacity(m);
    let mut regions = Vec::with_capacity(m);
    for _ in 0..m {
        let f = lines.record(4)?;
        triangles.push([lines.parse(&f[0])?, lines.parse(&f[1])?, lines.parse(&f[2])?]);
        regions.push(lines.parse(&f[3])?);
    }
    let b = lines.header("boundary")?;
    let mut boundary = Vec::with_capacity(b);
    for _ in 0..b {
        let f = lines.record(3)?;
        boundary.push(BoundaryEdge {
            vertices: [lines.parse(&f[0])?, lines.parse(&f[1])?],
            label: lines.parse(&f[2])?,
        });
    }
    Mesh::new(vertices, triangles, regions, boundary, None)
}

//! Conforming 2D triangulations.
//!
//! A [`Mesh`] owns vertex coordinates, counterclockwise triangles with a
//! region tag, labelled boundary edges, the derived edge adjacency and, per
//! triangle, the local index of its refinement edge (the edge opposite the
//! newest vertex). Meshes are immutable; [`Mesh::refine`] returns a new one.

mod io;
mod refine;

pub use io::{read_mesh, write_mesh};
pub use refine::DEFAULT_TRIANGLE_BUDGET;

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Boundary segment label.
pub type BoundaryLabel = u32;

/// Labels assigned by [`uniform_mesh`] to the sides of the rectangle.
pub mod side {
    use super::BoundaryLabel;
    pub const BOTTOM: BoundaryLabel = 1;
    pub const RIGHT: BoundaryLabel = 2;
    pub const TOP: BoundaryLabel = 3;
    pub const LEFT: BoundaryLabel = 4;
}

/// Default bound on `h_K / rho_K` accepted by [`Mesh::check_shape_regularity`].
pub const DEFAULT_SIGMA_MAX: f64 = 10.0;

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn unit_square() -> Self {
        Rect::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub label: BoundaryLabel,
}

/// Triangles on either side of an edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EdgeNeighbors {
    Interior(usize, usize),
    Boundary { triangle: usize, label: BoundaryLabel },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// Endpoints, smaller index first.
    pub vertices: [usize; 2],
    pub neighbors: EdgeNeighbors,
}

impl Edge {
    pub fn is_interior(&self) -> bool {
        matches!(self.neighbors, EdgeNeighbors::Interior(..))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    tri_region: Vec<i32>,
    boundary_edges: Vec<BoundaryEdge>,
    refinement_edge: Vec<u8>,
    edges: Vec<Edge>,
    /// `tri_edges[t][k]` is the edge opposite local vertex `k`.
    tri_edges: Vec<[usize; 3]>,
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn signed_area(p: Point, q: Point, r: Point) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

fn dist(p: Point, q: Point) -> f64 {
    ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt()
}

impl Mesh {
    /// Builds and validates a mesh. When `refinement_edge` is `None` each
    /// triangle refines its longest edge, ties going to the edge whose
    /// opposite vertex has the smallest index.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        tri_region: Vec<i32>,
        boundary_edges: Vec<BoundaryEdge>,
        refinement_edge: Option<Vec<u8>>,
    ) -> Result<Mesh> {
        if tri_region.len() != triangles.len() {
            return Err(Error::Shape { expected: triangles.len(), actual: tri_region.len() });
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidInput(format!("triangle {t} references a missing vertex")));
            }
            let a = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(a > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "triangle {t} has non-positive signed area {a:e}"
                )));
            }
        }
        let refinement_edge = match refinement_edge {
            Some(r) => {
                if r.len() != triangles.len() {
                    return Err(Error::Shape { expected: triangles.len(), actual: r.len() });
                }
                if r.iter().any(|&k| k > 2) {
                    return Err(Error::InvalidInput("refinement edge index out of range".into()));
                }
                r
            }
            None => triangles.iter().map(|tri| longest_edge(&vertices, tri)).collect(),
        };

        let mut labels: HashMap<(usize, usize), BoundaryLabel> = HashMap::new();
        for be in &boundary_edges {
            if labels.insert(edge_key(be.vertices[0], be.vertices[1]), be.label).is_some() {
                return Err(Error::InvalidInput(format!(
                    "boundary edge {:?} listed twice",
                    be.vertices
                )));
            }
        }

        // Edges are numbered in order of first appearance.
        let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len() / 2 + 8);
        let mut incident: Vec<([usize; 2], Vec<usize>)> = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0usize; 3];
            for k in 0..3 {
                let key = edge_key(tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let e = *index.entry(key).or_insert_with(|| {
                    incident.push(([key.0, key.1], Vec::with_capacity(2)));
                    incident.len() - 1
                });
                incident[e].1.push(t);
                te[k] = e;
            }
            tri_edges.push(te);
        }

        let mut edges = Vec::with_capacity(incident.len());
        let mut boundary_seen = 0usize;
        for (verts, tris) in incident {
            let key = (verts[0], verts[1]);
            let neighbors = match (tris.as_slice(), labels.get(&key)) {
                ([a, b], None) => EdgeNeighbors::Interior(*a, *b),
                ([t], Some(&label)) => {
                    boundary_seen += 1;
                    EdgeNeighbors::Boundary { triangle: *t, label }
                }
                ([_], None) => {
                    return Err(Error::InvalidInput(format!(
                        "edge {verts:?} lies on the boundary but carries no label"
                    )))
                }
                ([_, _], Some(_)) => {
                    return Err(Error::InvalidInput(format!(
                        "labelled boundary edge {verts:?} is shared by two triangles"
                    )))
                }
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "edge {verts:?} is shared by {} triangles",
                        tris.len()
                    )))
                }
            };
            edges.push(Edge { vertices: verts, neighbors });
        }
        if boundary_seen != boundary_edges.len() {
            return Err(Error::InvalidInput(
                "boundary edge list contains edges that are not triangle edges".into(),
            ));
        }

        Ok(Mesh { vertices, triangles, tri_region, boundary_edges, refinement_edge, edges, tri_edges })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn tri_region(&self) -> &[i32] {
        &self.tri_region
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn refinement_edges(&self) -> &[u8] {
        &self.refinement_edge
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [p, q, r] = self.corners(t);
        signed_area(p, q, r)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    /// Labels present on the boundary, sorted.
    pub fn boundary_labels(&self) -> Vec<BoundaryLabel> {
        let mut labels: Vec<_> = self.boundary_edges.iter().map(|e| e.label).collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    /// `max_K h_K / rho_K`.
    pub fn shape_regularity(&self) -> f64 {
        let m = mesh_metrics(self);
        m.h.iter().zip(&m.rho).map(|(h, r)| h / r).fold(0.0, f64::max)
    }

    pub fn check_shape_regularity(&self, sigma_max: f64) -> Result<()> {
        let sigma = self.shape_regularity();
        if sigma <= sigma_max {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("shape regularity {sigma} exceeds {sigma_max}")))
        }
    }

    /// Re-checks the adjacency invariants: interior edges have two distinct
    /// incident triangles that both list the edge, boundary edges have one.
    pub fn verify_adjacency(&self) -> bool {
        self.edges.iter().enumerate().all(|(e, edge)| match edge.neighbors {
            EdgeNeighbors::Interior(a, b) => {
                a != b && self.tri_edges[a].contains(&e) && self.tri_edges[b].contains(&e)
            }
            EdgeNeighbors::Boundary { triangle, .. } => self.tri_edges[triangle].contains(&e),
        })
    }
}

fn longest_edge(vertices: &[Point], tri: &[usize; 3]) -> u8 {
    let mut best = 0u8;
    let mut best_len = -1.0;
    let mut best_opp = usize::MAX;
    for k in 0..3 {
        let len = dist(vertices[tri[(k + 1) % 3]], vertices[tri[(k + 2) % 3]]);
        // exact ties only; uniform grids produce bitwise equal lengths
        if len > best_len || (len == best_len && tri[k] < best_opp) {
            best = k as u8;
            best_len = len;
            best_opp = tri[k];
        }
    }
    best
}

/// Structured triangulation of `rect` with `nx * ny` cells, each split along
/// the diagonal from its lower-left to its upper-right corner.
pub fn uniform_mesh(nx: usize, ny: usize, rect: Rect) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("grid dimensions must be positive".into()));
    }
    if !(rect.x1 > rect.x0 && rect.y1 > rect.y0) || !rect.area().is_finite() {
        return Err(Error::InvalidInput(format!("degenerate rectangle {rect:?}")));
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = if j == ny { rect.y1 } else { rect.y0 + (rect.y1 - rect.y0) * j as f64 / ny as f64 };
        for i in 0..=nx {
            let x = if i == nx { rect.x1 } else { rect.x0 + (rect.x1 - rect.x0) * i as f64 / nx as f64 };
            vertices.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (sw, se, nw, ne) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            triangles.push([sw, se, ne]);
            triangles.push([sw, ne, nw]);
        }
    }
    let mut boundary = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary.push(BoundaryEdge { vertices: [id(i, 0), id(i + 1, 0)], label: side::BOTTOM });
    }
    for j in 0..ny {
        boundary.push(BoundaryEdge { vertices: [id(nx, j), id(nx, j + 1)], label: side::RIGHT });
    }
    for i in (0..nx).rev() {
        boundary.push(BoundaryEdge { vertices: [id(i + 1, ny), id(i, ny)], label: side::TOP });
    }
    for j in (0..ny).rev() {
        boundary.push(BoundaryEdge { vertices: [id(0, j + 1), id(0, j)], label: side::LEFT });
    }
    let regions = vec![0; triangles.len()];
    Mesh::new(vertices, triangles, regions, boundary, None)
}

/// Per-triangle and per-edge size measures.
#[derive(Clone, Debug)]
pub struct MeshMetrics {
    /// Longest edge of each triangle.
    pub h: Vec<f64>,
    /// Inradius `2|K| / perimeter`.
    pub rho: Vec<f64>,
    pub area: Vec<f64>,
    /// Length of each edge, indexed like [`Mesh::edges`].
    pub edge_length: Vec<f64>,
}

pub fn mesh_metrics(mesh: &Mesh) -> MeshMetrics {
    let n = mesh.n_triangles();
    let mut h = Vec::with_capacity(n);
    let mut rho = Vec::with_capacity(n);
    let mut area = Vec::with_capacity(n);
    for t in 0..n {
        let [p, q, r] = mesh.corners(t);
        let (a, b, c) = (dist(q, r), dist(r, p), dist(p, q));
        let k = signed_area(p, q, r);
        h.push(a.max(b).max(c));
        rho.push(2.0 * k / (a + b + c));
        area.push(k);
    }
    let edge_length = mesh
        .edges
        .iter()
        .map(|e| dist(mesh.vertices[e.vertices[0]], mesh.vertices[e.vertices[1]]))
        .collect();
    MeshMetrics { h, rho, area, edge_length }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(p: [Point; 3]) -> Mesh {
        let boundary = (0..3)
            .map(|k| BoundaryEdge { vertices: [k, (k + 1) % 3], label: 1 })
            .collect();
        Mesh::new(p.to_vec(), vec![[0, 1, 2]], vec![0], boundary, None).unwrap()
    }

    #[test]
    fn uniform_counts() {
        let m = uniform_mesh(1, 1, Rect::unit_square()).unwrap();
        assert_eq!((m.n_vertices(), m.n_triangles()), (4, 2));
        let m = uniform_mesh(20, 20, Rect::unit_square()).unwrap();
        assert_eq!(m.n_triangles(), 800);
        let m = uniform_mesh(120, 60, Rect::new(0.0, 0.0, 2.0, 1.0)).unwrap();
        assert_eq!(m.n_triangles(), 14400);
        assert_eq!(m.n_vertices(), 121 * 61);
        assert!(m.verify_adjacency());
        assert_eq!(m.boundary_labels(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn uniform_rejects_degenerate_input() {
        assert!(uniform_mesh(0, 3, Rect::unit_square()).is_err());
        assert!(matches!(
            uniform_mesh(2, 2, Rect::new(0.0, 0.0, 0.0, 1.0)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn metrics_of_reference_triangle() {
        let m = single([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let mm = mesh_metrics(&m);
        assert!((mm.h[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((mm.rho[0] - 1.0 / (2.0 + 2f64.sqrt())).abs() < 1e-15);
        assert!((mm.area[0] - 0.5).abs() < 1e-15);
        let unit = m.edges().iter().position(|e| e.vertices == [0, 1]).unwrap();
        assert_eq!(mm.edge_length[unit], 1.0);
    }

    #[test]
    fn equilateral_diameter() {
        let m = single([[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]]);
        assert!((mesh_metrics(&m).h[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_clockwise_triangles() {
        let boundary = (0..3)
            .map(|k| BoundaryEdge { vertices: [k, (k + 1) % 3], label: 1 })
            .collect();
        let r = Mesh::new(
            vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]],
            vec![[0, 1, 2]],
            vec![0],
            boundary,
            None,
        );
        assert!(r.is_err());
    }

    #[test]
    fn rejects_unlabelled_boundary() {
        let r = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![0],
            vec![BoundaryEdge { vertices: [0, 1], label: 1 }],
            None,
        );
        assert!(r.is_err());
    }

    #[test]
    fn adjacency_is_symmetric() {
        let m = uniform_mesh(3, 2, Rect::unit_square()).unwrap();
        let interior = m.edges().iter().filter(|e| e.is_interior()).count();
        // Euler relation for a simply connected triangulation
        assert_eq!(m.edges().len(), m.n_vertices() + m.n_triangles() - 1);
        assert_eq!(m.edges().len() - interior, m.boundary_edges().len());
        assert!(m.verify_adjacency());
    }

    #[test]
    fn diagonal_is_the_refinement_edge() {
        let m = uniform_mesh(2, 2, Rect::unit_square()).unwrap();
        for (t, tri) in m.triangles().iter().enumerate() {
            let k = m.refinement_edges()[t] as usize;
            let (a, b) = (m.vertices()[tri[(k + 1) % 3]], m.vertices()[tri[(k + 2) % 3]]);
            assert!((dist(a, b) - 0.5 * 2f64.sqrt()).abs() < 1e-15);
        }
    }
}

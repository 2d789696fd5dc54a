//! Newest-vertex bisection with conformity closure.
//!
//! One call to [`Mesh::refine`] runs two bisection generations: the marked
//! triangles are bisected, then their children are bisected again, so a
//! marked triangle is replaced by (at least) four descendants and refining
//! every triangle quadruples the mesh. Each generation marks the refinement
//! edges of the selected triangles and closes the marking: any triangle with a
//! marked edge also marks its own refinement edge. Splitting a triangle
//! bisects its refinement edge and recurses into the children, whose
//! refinement edges are the parent's remaining edges.

use std::collections::{HashMap, VecDeque};

use super::{edge_key, BoundaryEdge, EdgeNeighbors, Mesh};
use crate::error::{Error, Result};

/// Default cap on the number of triangles a refinement may produce.
pub const DEFAULT_TRIANGLE_BUDGET: usize = 20_000_000;

impl Mesh {
    /// Refines the marked triangles; see the module docs.
    pub fn refine(&self, marked: &[usize]) -> Result<Mesh> {
        self.refine_with_budget(marked, DEFAULT_TRIANGLE_BUDGET)
    }

    pub fn refine_with_budget(&self, marked: &[usize], budget: usize) -> Result<Mesh> {
        let mut flags = vec![false; self.n_triangles()];
        for &t in marked {
            if t >= flags.len() {
                return Err(Error::InvalidInput(format!(
                    "marked triangle {t} out of range (mesh has {})",
                    flags.len()
                )));
            }
            flags[t] = true;
        }
        if !flags.iter().any(|&f| f) {
            return Ok(self.clone());
        }
        let (first, parent) = bisect_generation(self, &flags, budget)?;
        let flags: Vec<bool> = parent.iter().map(|&p| flags[p]).collect();
        let (second, _) = bisect_generation(&first, &flags, budget)?;
        Ok(second)
    }

    /// Refines every triangle.
    pub fn refine_uniform(&self) -> Result<Mesh> {
        self.refine_uniform_with_budget(DEFAULT_TRIANGLE_BUDGET)
    }

    pub fn refine_uniform_with_budget(&self, budget: usize) -> Result<Mesh> {
        let all: Vec<usize> = (0..self.n_triangles()).collect();
        self.refine_with_budget(&all, budget)
    }
}

/// One bisection generation. Returns the new mesh and, for every new
/// triangle, the index of the triangle it descends from.
fn bisect_generation(mesh: &Mesh, selected: &[bool], budget: usize) -> Result<(Mesh, Vec<usize>)> {
    let n_edges = mesh.edges.len();
    let mut marked = vec![false; n_edges];
    let mut queue = VecDeque::new();
    for (t, &s) in selected.iter().enumerate() {
        if s {
            let e = mesh.tri_edges[t][mesh.refinement_edge[t] as usize];
            if !marked[e] {
                marked[e] = true;
                queue.push_back(e);
            }
        }
    }
    // Closure: a triangle touching a marked edge must bisect its refinement edge.
    while let Some(e) = queue.pop_front() {
        let tris = match mesh.edges[e].neighbors {
            EdgeNeighbors::Interior(a, b) => [Some(a), Some(b)],
            EdgeNeighbors::Boundary { triangle, .. } => [Some(triangle), None],
        };
        for t in tris.into_iter().flatten() {
            let r = mesh.tri_edges[t][mesh.refinement_edge[t] as usize];
            if !marked[r] {
                marked[r] = true;
                queue.push_back(r);
            }
        }
    }

    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    for (e, edge) in mesh.edges.iter().enumerate() {
        if marked[e] {
            let [a, b] = edge.vertices;
            let (p, q) = (vertices[a], vertices[b]);
            vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            midpoint.insert((a, b), vertices.len() - 1);
        }
    }

    let mut triangles = Vec::with_capacity(mesh.n_triangles() + 2 * midpoint.len());
    let mut refinement = Vec::with_capacity(triangles.capacity());
    let mut regions = Vec::with_capacity(triangles.capacity());
    let mut parent = Vec::with_capacity(triangles.capacity());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let before = triangles.len();
        split(*tri, mesh.refinement_edge[t], &midpoint, &mut triangles, &mut refinement);
        for _ in before..triangles.len() {
            regions.push(mesh.tri_region[t]);
            parent.push(t);
        }
        if triangles.len() > budget {
            return Err(Error::RefinementOverflow { produced: triangles.len(), budget });
        }
    }

    let mut boundary = Vec::with_capacity(mesh.boundary_edges.len());
    for be in &mesh.boundary_edges {
        let [a, b] = be.vertices;
        match midpoint.get(&edge_key(a, b)) {
            Some(&m) => {
                boundary.push(BoundaryEdge { vertices: [a, m], label: be.label });
                boundary.push(BoundaryEdge { vertices: [m, b], label: be.label });
            }
            None => boundary.push(be.clone()),
        }
    }

    let refined = Mesh::new(vertices, triangles, regions, boundary, Some(refinement))?;
    Ok((refined, parent))
}

fn split(
    tri: [usize; 3],
    r: u8,
    midpoint: &HashMap<(usize, usize), usize>,
    out: &mut Vec<[usize; 3]>,
    refinement: &mut Vec<u8>,
) {
    let r = r as usize;
    let (a, b, c) = (tri[r], tri[(r + 1) % 3], tri[(r + 2) % 3]);
    match midpoint.get(&edge_key(b, c)) {
        Some(&m) => {
            // The new vertex is the newest vertex of both children.
            split([a, b, m], 2, midpoint, out, refinement);
            split([a, m, c], 1, midpoint, out, refinement);
        }
        None => {
            out.push(tri);
            refinement.push(r as u8);
        }
    }
}

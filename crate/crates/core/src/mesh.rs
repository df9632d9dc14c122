//! Structured triangulations of axis-aligned rectangles with full edge topology.
//!
//! Every rectangle of an `nx × ny` grid is split along the diagonal running from
//! its lower-left to its upper-right corner, so all diagonals are parallel.
//! Edges carry the adjacency and orientation data needed by interior-penalty
//! assembly: the "minus" cell, the optional "plus" cell and a unit normal that
//! points from minus to plus (or out of the domain on the boundary).

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Which side of an edge the second cell lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeNeighbor {
    Interior(usize),
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeInfo {
    pub endpoints: [usize; 2],
    pub length: f64,
    pub normal: [f64; 2],
    pub cell_minus: usize,
    pub cell_plus: EdgeNeighbor,
}

impl EdgeInfo {
    pub fn is_boundary(&self) -> bool {
        matches!(self.cell_plus, EdgeNeighbor::Boundary)
    }
}

/// Grid metadata kept so point location is O(1) on structured meshes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridInfo {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub cells: Vec<[usize; 3]>,
    pub edges: Vec<EdgeInfo>,
    /// Local edge `k` of a cell joins local vertices `k` and `(k + 1) % 3`.
    pub cell_edges: Vec<[usize; 3]>,
    pub h_max: f64,
    pub grid: Option<GridInfo>,
}

/// Build the diagonal-split triangulation of `(0, lx) × (0, ly)`.
pub fn build_rect_mesh(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<TriMesh> {
    if !(lx > 0.0 && lx.is_finite() && ly > 0.0 && ly.is_finite()) {
        return Err(Error::InvalidMesh(format!(
            "domain lengths must be positive, got lx = {lx}, ly = {ly}"
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidMesh(format!(
            "cell counts must be at least 1, got nx = {nx}, ny = {ny}"
        )));
    }
    let dx = lx / nx as f64;
    let dy = ly / ny as f64;
    let vid = |i: usize, j: usize| j * (nx + 1) + i;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // Pin the far boundary exactly to the requested length.
            let x = if i == nx { lx } else { i as f64 * dx };
            let y = if j == ny { ly } else { j as f64 * dy };
            vertices.push([x, y]);
        }
    }

    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let v00 = vid(i, j);
            let v10 = vid(i + 1, j);
            let v01 = vid(i, j + 1);
            let v11 = vid(i + 1, j + 1);
            cells.push([v00, v10, v11]);
            cells.push([v00, v11, v01]);
        }
    }

    let mut mesh = from_cells(vertices, cells)?;
    mesh.grid = Some(GridInfo { lx, ly, nx, ny });
    Ok(mesh)
}

/// Derive edge topology for an arbitrary CCW triangulation.
pub fn from_cells(vertices: Vec<Point>, cells: Vec<[usize; 3]>) -> Result<TriMesh> {
    for (c, cell) in cells.iter().enumerate() {
        if cell.iter().any(|&v| v >= vertices.len()) {
            return Err(Error::InvalidMesh(format!("cell {c} references a missing vertex")));
        }
        if signed_area(&vertices, cell) <= 0.0 {
            return Err(Error::InvalidMesh(format!("cell {c} is not counterclockwise")));
        }
    }

    let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(cells.len() * 2);
    let mut raw: Vec<([usize; 2], usize, Option<usize>)> = Vec::with_capacity(cells.len() * 2);
    let mut cell_edges = vec![[0usize; 3]; cells.len()];
    for (c, cell) in cells.iter().enumerate() {
        for k in 0..3 {
            let a = cell[k];
            let b = cell[(k + 1) % 3];
            let key = (a.min(b), a.max(b));
            let e = *lookup.entry(key).or_insert_with(|| {
                raw.push(([a, b], c, None));
                raw.len() - 1
            });
            if raw[e].1 != c {
                if raw[e].2.is_some() {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({a}, {b}) is shared by more than two cells"
                    )));
                }
                raw[e].2 = Some(c);
            }
            cell_edges[c][k] = e;
        }
    }

    let mut edges = Vec::with_capacity(raw.len());
    for (endpoints, minus, plus) in raw {
        let pa = vertices[endpoints[0]];
        let pb = vertices[endpoints[1]];
        let t = [pb[0] - pa[0], pb[1] - pa[1]];
        let length = t[0].hypot(t[1]);
        let mut normal = [t[1] / length, -t[0] / length];
        // Orient away from the interior of the minus cell.
        let opposite = cells[minus]
            .iter()
            .copied()
            .find(|v| !endpoints.contains(v))
            .expect("triangle has a vertex off every edge");
        let po = vertices[opposite];
        let to_opposite = [po[0] - pa[0], po[1] - pa[1]];
        if normal[0] * to_opposite[0] + normal[1] * to_opposite[1] > 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        edges.push(EdgeInfo {
            endpoints,
            length,
            normal,
            cell_minus: minus,
            cell_plus: plus.map_or(EdgeNeighbor::Boundary, EdgeNeighbor::Interior),
        });
    }

    let h_max = cells
        .iter()
        .map(|cell| {
            (0..3)
                .map(|k| dist(vertices[cell[k]], vertices[cell[(k + 1) % 3]]))
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);

    Ok(TriMesh { vertices, cells, edges, cell_edges, h_max, grid: None })
}

/// Swap the minus/plus cells of an interior edge and negate its normal.
pub fn flip_edge_orientation(mesh: &TriMesh, edge: usize) -> Result<TriMesh> {
    let info = mesh
        .edges
        .get(edge)
        .ok_or_else(|| Error::InvalidMesh(format!("edge {edge} out of range")))?;
    let EdgeNeighbor::Interior(plus) = info.cell_plus else {
        return Err(Error::InvalidMesh(format!("edge {edge} is a boundary edge")));
    };
    let mut out = mesh.clone();
    let e = &mut out.edges[edge];
    e.cell_plus = EdgeNeighbor::Interior(e.cell_minus);
    e.cell_minus = plus;
    e.normal = [-e.normal[0], -e.normal[1]];
    Ok(out)
}

pub fn signed_area(vertices: &[Point], cell: &[usize; 3]) -> f64 {
    let [a, b, c] = cell.map(|v| vertices[v]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

impl TriMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        signed_area(&self.vertices, &self.cells[cell])
    }

    pub fn area(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_area(c)).sum()
    }

    pub fn centroid(&self, cell: usize) -> Point {
        let [a, b, c] = self.cells[cell].map(|v| self.vertices[v]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn edge_midpoint(&self, edge: usize) -> Point {
        let [a, b] = self.edges[edge].endpoints.map(|v| self.vertices[v]);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// Barycentric coordinates of `p` with respect to `cell`.
    pub fn barycentric(&self, cell: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.cells[cell].map(|v| self.vertices[v]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Find a cell containing `p`, allowing `tol` slack in barycentric coordinates.
    pub fn locate(&self, p: Point, tol: f64) -> Option<usize> {
        let inside = |c: usize| self.barycentric(c, p).iter().all(|&l| l >= -tol);
        if let Some(g) = self.grid {
            let fx = p[0] / g.lx * g.nx as f64;
            let fy = p[1] / g.ly * g.ny as f64;
            if fx.is_finite() && fy.is_finite() {
                let i = (fx.floor().max(0.0) as usize).min(g.nx - 1);
                let j = (fy.floor().max(0.0) as usize).min(g.ny - 1);
                let base = 2 * (j * g.nx + i);
                for c in [base, base + 1] {
                    if c < self.n_cells() && inside(c) {
                        return Some(c);
                    }
                }
            }
        }
        (0..self.n_cells()).find(|&c| inside(c))
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
        a[0] * b[0] + a[1] * b[1]
    }

    fn check_invariants(m: &TriMesh, lx: f64, ly: f64) {
        for c in 0..m.n_cells() {
            assert!(m.cell_area(c) > 0.0);
        }
        assert!((m.area() - lx * ly).abs() <= 1e-12 * lx * ly);
        assert_eq!(m.n_vertices() as i64 - m.n_edges() as i64 + m.n_cells() as i64 + 1, 2);
        let center = [lx / 2.0, ly / 2.0];
        for (k, e) in m.edges.iter().enumerate() {
            let [a, b] = e.endpoints.map(|v| m.vertices[v]);
            let d = (b[0] - a[0]).hypot(b[1] - a[1]);
            assert!((e.length - d).abs() <= 1e-14 * d);
            assert!((e.normal[0].hypot(e.normal[1]) - 1.0).abs() < 1e-14);
            let mid = m.edge_midpoint(k);
            match e.cell_plus {
                EdgeNeighbor::Interior(p) => {
                    assert!(e.cell_minus < p);
                    let cm = m.centroid(e.cell_minus);
                    let cp = m.centroid(p);
                    assert!(dot(e.normal, [cp[0] - cm[0], cp[1] - cm[1]]) > 0.0);
                }
                EdgeNeighbor::Boundary => {
                    assert!(dot(e.normal, [mid[0] - center[0], mid[1] - center[1]]) > 0.0);
                }
            }
        }
    }

    #[test]
    fn single_square() {
        let m = build_rect_mesh(1.0, 1.0, 1, 1).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_cells(), 2);
        assert_eq!(m.n_edges(), 5);
        assert_eq!(m.edges.iter().filter(|e| !e.is_boundary()).count(), 1);
        assert!((m.h_max - 2f64.sqrt()).abs() < 1e-15);
        check_invariants(&m, 1.0, 1.0);
    }

    #[test]
    fn two_by_two_counts() {
        let m = build_rect_mesh(1.0, 1.0, 2, 2).unwrap();
        assert_eq!((m.n_vertices(), m.n_cells(), m.n_edges()), (9, 8, 16));
        check_invariants(&m, 1.0, 1.0);
    }

    #[test]
    fn counts_by_enumeration() {
        for (nx, ny) in [(1, 3), (4, 2), (5, 7), (8, 8)] {
            let m = build_rect_mesh(2.0, 3.0, nx, ny).unwrap();
            assert_eq!(m.n_vertices(), (nx + 1) * (ny + 1));
            assert_eq!(m.n_cells(), 2 * nx * ny);
            assert_eq!(m.n_edges(), 3 * nx * ny + nx + ny);
            check_invariants(&m, 2.0, 3.0);
        }
    }

    #[test]
    fn benchmark_scale() {
        let m = build_rect_mesh(32.0, 32.0, 256, 256).unwrap();
        assert!((m.h_max - 32.0 / 256.0 * 2f64.sqrt()).abs() < 1e-14);
        assert!((m.area() - 1024.0).abs() <= 1e-12 * 1024.0);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(build_rect_mesh(0.0, 1.0, 1, 1).is_err());
        assert!(build_rect_mesh(1.0, -1.0, 1, 1).is_err());
        assert!(build_rect_mesh(1.0, 1.0, 0, 1).is_err());
        assert!(build_rect_mesh(1.0, 1.0, 1, 0).is_err());
    }

    #[test]
    fn flip_is_an_involution() {
        let m = build_rect_mesh(1.0, 1.0, 3, 2).unwrap();
        let e = m.edges.iter().position(|e| !e.is_boundary()).unwrap();
        let once = flip_edge_orientation(&m, e).unwrap();
        assert_ne!(once, m);
        assert_eq!(flip_edge_orientation(&once, e).unwrap(), m);
    }

    #[test]
    fn flip_rejects_boundary_edges() {
        let m = build_rect_mesh(1.0, 1.0, 2, 2).unwrap();
        let e = m.edges.iter().position(|e| e.is_boundary()).unwrap();
        assert!(flip_edge_orientation(&m, e).is_err());
        assert!(flip_edge_orientation(&m, m.n_edges()).is_err());
    }

    #[test]
    fn locate_points() {
        let m = build_rect_mesh(3.0, 2.0, 3, 4).unwrap();
        for p in [[0.0, 0.0], [3.0, 2.0], [1.2, 0.7], [2.99, 0.01], [0.5, 1.999]] {
            let c = m.locate(p, 1e-12).unwrap();
            assert!(m.barycentric(c, p).iter().all(|&l| l >= -1e-12));
        }
        assert!(m.locate([3.5, 1.0], 1e-12).is_none());
    }
}

//! Continuous P1 and P2 Lagrange spaces on a [`TriMesh`].
//!
//! Reference element: vertices `(0,0)`, `(1,0)`, `(0,1)`. P2 adds the midpoints
//! of local edges `(v0,v1)`, `(v1,v2)`, `(v2,v0)` in that order, matching
//! [`TriMesh::cell_edges`]. Global numbering puts vertex dofs first, then one
//! midpoint dof per mesh edge in edge order.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};
use crate::quadrature::QuadRule;

pub type Mat2 = [[f64; 2]; 2];

/// Value, gradient and Hessian of one basis function at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BasisJet {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: Mat2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degree {
    P1,
    P2,
}

impl Degree {
    pub fn local_dofs(self) -> usize {
        match self {
            Degree::P1 => 3,
            Degree::P2 => 6,
        }
    }
}

/// Linear Lagrange basis on the reference triangle.
pub fn ref_basis_p1(xi: [f64; 2]) -> [BasisJet; 3] {
    let [x, y] = xi;
    let z = [[0.0; 2]; 2];
    [
        BasisJet { value: 1.0 - x - y, grad: [-1.0, -1.0], hess: z },
        BasisJet { value: x, grad: [1.0, 0.0], hess: z },
        BasisJet { value: y, grad: [0.0, 1.0], hess: z },
    ]
}

/// Quadratic Lagrange basis on the reference triangle.
pub fn ref_basis_p2(xi: [f64; 2]) -> [BasisJet; 6] {
    let [x, y] = xi;
    let l0 = 1.0 - x - y;
    [
        BasisJet {
            value: l0 * (2.0 * l0 - 1.0),
            grad: [1.0 - 4.0 * l0, 1.0 - 4.0 * l0],
            hess: [[4.0, 4.0], [4.0, 4.0]],
        },
        BasisJet {
            value: x * (2.0 * x - 1.0),
            grad: [4.0 * x - 1.0, 0.0],
            hess: [[4.0, 0.0], [0.0, 0.0]],
        },
        BasisJet {
            value: y * (2.0 * y - 1.0),
            grad: [0.0, 4.0 * y - 1.0],
            hess: [[0.0, 0.0], [0.0, 4.0]],
        },
        BasisJet {
            value: 4.0 * l0 * x,
            grad: [4.0 * (l0 - x), -4.0 * x],
            hess: [[-8.0, -4.0], [-4.0, 0.0]],
        },
        BasisJet {
            value: 4.0 * x * y,
            grad: [4.0 * y, 4.0 * x],
            hess: [[0.0, 4.0], [4.0, 0.0]],
        },
        BasisJet {
            value: 4.0 * y * l0,
            grad: [-4.0 * y, 4.0 * (l0 - y)],
            hess: [[0.0, -4.0], [-4.0, -8.0]],
        },
    ]
}

fn ref_basis_into(degree: Degree, xi: [f64; 2], out: &mut [BasisJet]) {
    match degree {
        Degree::P1 => out.copy_from_slice(&ref_basis_p1(xi)),
        Degree::P2 => out.copy_from_slice(&ref_basis_p2(xi)),
    }
}

/// Affine map from the reference triangle onto a mesh cell.
#[derive(Debug, Clone, Copy)]
pub struct CellMap {
    pub origin: Point,
    /// Columns are `v1 - v0` and `v2 - v0`.
    pub jac: Mat2,
    pub inv: Mat2,
    pub det: f64,
}

impl CellMap {
    pub fn new(mesh: &TriMesh, cell: usize) -> Result<Self> {
        let [a, b, c] = mesh.cells[cell].map(|v| mesh.vertices[v]);
        let jac = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let scale = jac.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        if det.abs() <= 1e-14 * scale * scale {
            return Err(Error::DegenerateCell(cell));
        }
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        Ok(Self { origin: a, jac, inv, det })
    }

    pub fn to_physical(&self, xi: [f64; 2]) -> Point {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, p: Point) -> [f64; 2] {
        let d = [p[0] - self.origin[0], p[1] - self.origin[1]];
        [
            self.inv[0][0] * d[0] + self.inv[0][1] * d[1],
            self.inv[1][0] * d[0] + self.inv[1][1] * d[1],
        ]
    }

    /// Push a reference jet forward: `∇ = J⁻ᵀ ∇̂`, `∇² = J⁻ᵀ ∇̂² J⁻¹`.
    pub fn push_forward(&self, r: &BasisJet) -> BasisJet {
        let m = &self.inv;
        let grad = [
            m[0][0] * r.grad[0] + m[1][0] * r.grad[1],
            m[0][1] * r.grad[0] + m[1][1] * r.grad[1],
        ];
        let mut hess = [[0.0; 2]; 2];
        for (i, row) in hess.iter_mut().enumerate() {
            for (j, h) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        s += m[k][i] * r.hess[k][l] * m[l][j];
                    }
                }
                *h = s;
            }
        }
        BasisJet { value: r.value, grad, hess }
    }
}

#[derive(Debug, Clone)]
pub struct FeSpace {
    pub mesh: Arc<TriMesh>,
    pub degree: Degree,
    pub dof_coords: Vec<Point>,
    /// Flattened per-cell dof lists with stride `degree.local_dofs()`.
    cell_dofs: Vec<usize>,
    pub n_dofs: usize,
}

impl FeSpace {
    pub fn p1(mesh: Arc<TriMesh>) -> Self {
        let cell_dofs = mesh.cells.iter().flatten().copied().collect();
        Self {
            dof_coords: mesh.vertices.clone(),
            n_dofs: mesh.n_vertices(),
            cell_dofs,
            degree: Degree::P1,
            mesh,
        }
    }

    pub fn p2(mesh: Arc<TriMesh>) -> Self {
        let nv = mesh.n_vertices();
        let mut dof_coords = mesh.vertices.clone();
        dof_coords.extend((0..mesh.n_edges()).map(|e| mesh.edge_midpoint(e)));
        let mut cell_dofs = Vec::with_capacity(6 * mesh.n_cells());
        for (cell, edges) in mesh.cells.iter().zip(&mesh.cell_edges) {
            cell_dofs.extend_from_slice(cell);
            cell_dofs.extend(edges.iter().map(|e| nv + e));
        }
        Self {
            n_dofs: dof_coords.len(),
            dof_coords,
            cell_dofs,
            degree: Degree::P2,
            mesh,
        }
    }

    pub fn new(mesh: Arc<TriMesh>, degree: Degree) -> Self {
        match degree {
            Degree::P1 => Self::p1(mesh),
            Degree::P2 => Self::p2(mesh),
        }
    }

    pub fn local_dofs(&self) -> usize {
        self.degree.local_dofs()
    }

    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let n = self.local_dofs();
        &self.cell_dofs[cell * n..(cell + 1) * n]
    }

    pub fn same_mesh(&self, other: &FeSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
            || (self.mesh.vertices == other.mesh.vertices && self.mesh.cells == other.mesh.cells)
    }

    /// Physical basis jets of `cell` at reference point `xi`.
    pub fn eval_ref(&self, map: &CellMap, xi: [f64; 2], out: &mut [BasisJet]) {
        debug_assert_eq!(out.len(), self.local_dofs());
        ref_basis_into(self.degree, xi, out);
        for jet in out.iter_mut() {
            *jet = map.push_forward(jet);
        }
    }

    /// Nodal interpolant of a scalar function.
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.dof_coords.iter().map(|&p| f(p)).collect()
    }

    fn check_len(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.n_dofs {
            return Err(Error::SizeMismatch { expected: self.n_dofs, got: coeffs.len() });
        }
        Ok(())
    }

    /// Value, gradient and Hessian of the discrete field at a physical point.
    pub fn evaluate_jet(&self, coeffs: &[f64], p: Point) -> Result<BasisJet> {
        self.check_len(coeffs)?;
        let cell = self.mesh.locate(p, 1e-10).ok_or(Error::PointOutside(p))?;
        Ok(self.evaluate_jet_in(coeffs, cell, p))
    }

    /// Like [`Self::evaluate_jet`] with the containing cell already known.
    pub fn evaluate_jet_in(&self, coeffs: &[f64], cell: usize, p: Point) -> BasisJet {
        let map = CellMap::new(&self.mesh, cell).expect("mesh cells are non-degenerate");
        let mut jets = [BasisJet::default(); 6];
        let jets = &mut jets[..self.local_dofs()];
        self.eval_ref(&map, map.to_reference(p), jets);
        let mut out = BasisJet::default();
        for (jet, &d) in jets.iter().zip(self.cell_dofs(cell)) {
            let c = coeffs[d];
            out.value += c * jet.value;
            for i in 0..2 {
                out.grad[i] += c * jet.grad[i];
                for j in 0..2 {
                    out.hess[i][j] += c * jet.hess[i][j];
                }
            }
        }
        out
    }

    pub fn evaluate_field(&self, coeffs: &[f64], p: Point) -> Result<f64> {
        self.evaluate_jet(coeffs, p).map(|j| j.value)
    }

    pub fn evaluate_gradient(&self, coeffs: &[f64], p: Point) -> Result<[f64; 2]> {
        self.evaluate_jet(coeffs, p).map(|j| j.grad)
    }
}

/// Basis data of one cell at every point of a quadrature rule.
#[derive(Debug, Clone, Default)]
pub struct BasisEval {
    pub n_basis: usize,
    pub points: Vec<Point>,
    /// Physical weights (reference weight times `|det J|`).
    pub weights: Vec<f64>,
    /// Point-major: entry `q * n_basis + i`.
    pub jets: Vec<BasisJet>,
}

impl BasisEval {
    pub fn n_points(&self) -> usize {
        self.weights.len()
    }

    pub fn at(&self, q: usize) -> &[BasisJet] {
        &self.jets[q * self.n_basis..(q + 1) * self.n_basis]
    }
}

/// Reusable cell tabulation for one space and one rule.
pub struct Tabulator<'a> {
    space: &'a FeSpace,
    rule: &'a QuadRule,
    reference: Vec<BasisJet>,
    eval: BasisEval,
}

impl<'a> Tabulator<'a> {
    pub fn new(space: &'a FeSpace, rule: &'a QuadRule) -> Self {
        let nb = space.local_dofs();
        let mut reference = vec![BasisJet::default(); rule.len() * nb];
        for (q, &xi) in rule.points.iter().enumerate() {
            ref_basis_into(space.degree, xi, &mut reference[q * nb..(q + 1) * nb]);
        }
        let eval = BasisEval {
            n_basis: nb,
            points: vec![[0.0; 2]; rule.len()],
            weights: vec![0.0; rule.len()],
            jets: vec![BasisJet::default(); rule.len() * nb],
        };
        Self { space, rule, reference, eval }
    }

    pub fn tabulate(&mut self, cell: usize) -> Result<&BasisEval> {
        let map = CellMap::new(&self.space.mesh, cell)?;
        let area = map.det.abs();
        for (q, &xi) in self.rule.points.iter().enumerate() {
            self.eval.points[q] = map.to_physical(xi);
            self.eval.weights[q] = self.rule.weights[q] * area;
        }
        for (dst, src) in self.eval.jets.iter_mut().zip(&self.reference) {
            *dst = map.push_forward(src);
        }
        Ok(&self.eval)
    }
}

/// One-shot tabulation of `cell` at the points of `rule`.
pub fn tabulate(space: &FeSpace, cell: usize, rule: &QuadRule) -> Result<BasisEval> {
    let mut t = Tabulator::new(space, rule);
    t.tabulate(cell).cloned()
}

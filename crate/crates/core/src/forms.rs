//! Global assembly of every operator the scheme needs.
//!
//! The interior-penalty form is
//!
//! ```text
//! a(w, v) = Σ_K ∫_K ∇²w : ∇²v
//!         + Σ_e ∫_e {{∂²w/∂n²}} [[∂v/∂n]] + {{∂²v/∂n²}} [[∂w/∂n]]
//!         + Σ_e (α/|e|) ∫_e [[∂w/∂n]] [[∂v/∂n]]
//! ```
//!
//! with the sums running over all edges. On an interior edge with normal `n`
//! pointing from `K-` to `K+`: `[[∂v/∂n]] = n·(∇v₊ − ∇v₋)` and
//! `{{∂²v/∂n²}} = ½(nᵀ∇²v₋n + nᵀ∇²v₊n)`. On a boundary edge with outward `n`:
//! `[[∂v/∂n]] = −n·∇v` and `{{∂²v/∂n²}} = nᵀ∇²v n`.

use crate::error::{Error, Result};
use crate::fespace::{BasisJet, CellMap, FeSpace, Mat2, Tabulator};
use crate::mesh::{EdgeNeighbor, Point};
use crate::quadrature::{cell_quadrature, edge_quadrature, QuadRule};
use crate::sparse::{SparseMatrix, TripletBuilder};

/// Cell rule degree used unless overridden.
pub const DEFAULT_CELL_DEGREE: usize = 6;
/// Edge integrands are at most quadratic for P2; degree 5 leaves margin.
pub const DEFAULT_EDGE_DEGREE: usize = 5;

/// A twice-differentiable function given by value, gradient and Hessian.
pub trait SmoothField {
    fn jet(&self, p: Point) -> BasisJet;

    fn value(&self, p: Point) -> f64 {
        self.jet(p).value
    }
}

impl<F: Fn(Point) -> BasisJet> SmoothField for F {
    fn jet(&self, p: Point) -> BasisJet {
        self(p)
    }
}

#[derive(Debug, Clone)]
pub struct Quadratures {
    pub cell: QuadRule,
    pub edge: QuadRule,
}

impl Quadratures {
    pub fn new(cell_degree: usize, edge_degree: usize) -> Result<Self> {
        Ok(Self { cell: cell_quadrature(cell_degree)?, edge: edge_quadrature(edge_degree)? })
    }
}

impl Default for Quadratures {
    fn default() -> Self {
        Self::new(DEFAULT_CELL_DEGREE, DEFAULT_EDGE_DEGREE).expect("default rules exist")
    }
}

fn check_len(space: &FeSpace, v: &[f64]) -> Result<()> {
    if v.len() != space.n_dofs {
        return Err(Error::SizeMismatch { expected: space.n_dofs, got: v.len() });
    }
    Ok(())
}

fn hess_contract(a: &Mat2, b: &Mat2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

fn normal_second(h: &Mat2, n: [f64; 2]) -> f64 {
    n[0] * (h[0][0] * n[0] + h[0][1] * n[1]) + n[1] * (h[1][0] * n[0] + h[1][1] * n[1])
}

fn normal_first(g: [f64; 2], n: [f64; 2]) -> f64 {
    g[0] * n[0] + g[1] * n[1]
}

/// `M[i][j] = ∫ χ_i ψ_j` with rows from `rows` and columns from `cols`.
pub fn assemble_mass(rows: &FeSpace, cols: &FeSpace, q: &Quadratures) -> Result<SparseMatrix> {
    if !rows.same_mesh(cols) {
        return Err(Error::MeshMismatch);
    }
    let (nr, nc) = (rows.local_dofs(), cols.local_dofs());
    let mut tr = Tabulator::new(rows, &q.cell);
    let mut tc = Tabulator::new(cols, &q.cell);
    let n_cells = rows.mesh.n_cells();
    let mut out = TripletBuilder::with_capacity(rows.n_dofs, cols.n_dofs, n_cells * nr * nc);
    let mut local = vec![0.0; nr * nc];
    for cell in 0..n_cells {
        let er = tr.tabulate(cell)?;
        let ec = tc.tabulate(cell)?;
        local.iter_mut().for_each(|v| *v = 0.0);
        for qp in 0..er.n_points() {
            let w = er.weights[qp];
            for (a, ja) in er.at(qp).iter().enumerate() {
                for (b, jb) in ec.at(qp).iter().enumerate() {
                    local[a * nc + b] += w * ja.value * jb.value;
                }
            }
        }
        out.add_block(rows.cell_dofs(cell), cols.cell_dofs(cell), &local);
    }
    Ok(out.build())
}

/// `K[i][j] = ∫ ∇χ_i · ∇χ_j`.
pub fn assemble_stiffness(space: &FeSpace, q: &Quadratures) -> Result<SparseMatrix> {
    let nb = space.local_dofs();
    let mut tab = Tabulator::new(space, &q.cell);
    let n_cells = space.mesh.n_cells();
    let mut out = TripletBuilder::with_capacity(space.n_dofs, space.n_dofs, n_cells * nb * nb);
    let mut local = vec![0.0; nb * nb];
    for cell in 0..n_cells {
        let e = tab.tabulate(cell)?;
        local.iter_mut().for_each(|v| *v = 0.0);
        for qp in 0..e.n_points() {
            let w = e.weights[qp];
            let jets = e.at(qp);
            for (a, ja) in jets.iter().enumerate() {
                for (b, jb) in jets.iter().enumerate() {
                    local[a * nb + b] += w * (ja.grad[0] * jb.grad[0] + ja.grad[1] * jb.grad[1]);
                }
            }
        }
        let dofs = space.cell_dofs(cell);
        out.add_block(dofs, dofs, &local);
    }
    Ok(out.build())
}

/// `b[i] = ∫ f χ_i`.
pub fn assemble_load(space: &FeSpace, f: impl Fn(Point) -> f64, q: &Quadratures) -> Result<Vec<f64>> {
    let mut tab = Tabulator::new(space, &q.cell);
    let mut b = vec![0.0; space.n_dofs];
    for cell in 0..space.mesh.n_cells() {
        let e = tab.tabulate(cell)?;
        let dofs = space.cell_dofs(cell);
        for qp in 0..e.n_points() {
            let wf = e.weights[qp] * f(e.points[qp]);
            for (jet, &d) in e.at(qp).iter().zip(dofs) {
                b[d] += wf * jet.value;
            }
        }
    }
    Ok(b)
}

/// Normal-derivative traces of the local basis functions on one edge.
///
/// Slots `0..6` belong to `K-`; on interior edges slots `6..12` belong to
/// `K+`. A global dof shared by both cells appears in two slots, each carrying
/// the restriction of the basis function to one side.
#[derive(Debug, Clone)]
pub struct EdgeTrace {
    pub edge: usize,
    pub normal: [f64; 2],
    pub length: f64,
    pub dofs: Vec<usize>,
    pub points: Vec<Point>,
    /// Physical weights (reference weight times `|e|`).
    pub weights: Vec<f64>,
    /// `[[∂χ_s/∂n]]` at point `q`, entry `q * n_slots + s`.
    pub jump: Vec<f64>,
    /// `{{∂²χ_s/∂n²}}` at point `q`.
    pub avg: Vec<f64>,
}

impl EdgeTrace {
    pub fn n_slots(&self) -> usize {
        self.dofs.len()
    }

    pub fn n_points(&self) -> usize {
        self.weights.len()
    }

    pub fn is_boundary(&self) -> bool {
        self.dofs.len() == 6
    }

    /// `([[∂v/∂n]], {{∂²v/∂n²}})` of a discrete field at point `q`.
    pub fn field_traces(&self, q: usize, coeffs: &[f64]) -> (f64, f64) {
        let ns = self.n_slots();
        let mut jump = 0.0;
        let mut avg = 0.0;
        for (s, &d) in self.dofs.iter().enumerate() {
            jump += coeffs[d] * self.jump[q * ns + s];
            avg += coeffs[d] * self.avg[q * ns + s];
        }
        (jump, avg)
    }
}

pub fn edge_traces(space: &FeSpace, edge: usize, rule: &QuadRule) -> Result<EdgeTrace> {
    let mesh = &space.mesh;
    let info = mesh
        .edges
        .get(edge)
        .ok_or_else(|| Error::InvalidArgument(format!("edge {edge} out of range")))?;
    let n = info.normal;
    let [pa, pb] = info.endpoints.map(|v| mesh.vertices[v]);
    let nb = space.local_dofs();

    let mut sides: Vec<(usize, f64)> = vec![(info.cell_minus, -1.0)];
    if let EdgeNeighbor::Interior(plus) = info.cell_plus {
        sides.push((plus, 1.0));
    }
    let boundary = sides.len() == 1;
    let n_slots = nb * sides.len();

    let mut dofs = Vec::with_capacity(n_slots);
    let mut maps = Vec::with_capacity(sides.len());
    for &(cell, _) in &sides {
        dofs.extend_from_slice(space.cell_dofs(cell));
        maps.push(CellMap::new(mesh, cell)?);
    }

    let nq = rule.len();
    let mut points = Vec::with_capacity(nq);
    let mut weights = Vec::with_capacity(nq);
    let mut jump = vec![0.0; nq * n_slots];
    let mut avg = vec![0.0; nq * n_slots];
    let mut jets = vec![BasisJet::default(); nb];
    for (qp, (xi, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let t = xi[0];
        let p = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
        points.push(p);
        weights.push(w * info.length);
        for (side, (&(_, sign), map)) in sides.iter().zip(&maps).enumerate() {
            space.eval_ref(map, map.to_reference(p), &mut jets);
            for (a, jet) in jets.iter().enumerate() {
                let s = side * nb + a;
                let dn = normal_first(jet.grad, n);
                let dnn = normal_second(&jet.hess, n);
                if boundary {
                    jump[qp * n_slots + s] = -dn;
                    avg[qp * n_slots + s] = dnn;
                } else {
                    jump[qp * n_slots + s] = sign * dn;
                    avg[qp * n_slots + s] = 0.5 * dnn;
                }
            }
        }
    }
    Ok(EdgeTrace { edge, normal: n, length: info.length, dofs, points, weights, jump, avg })
}

fn check_penalty(alpha: f64) -> Result<()> {
    if !(alpha >= 1.0) {
        return Err(Error::PenaltyTooSmall(alpha));
    }
    Ok(())
}

/// The interior-penalty matrix `A[i][j] = a(χ_j, χ_i)`.
pub fn assemble_aip(space: &FeSpace, alpha: f64, q: &Quadratures) -> Result<SparseMatrix> {
    check_penalty(alpha)?;
    let mesh = &space.mesh;
    let nb = space.local_dofs();
    let mut out = TripletBuilder::with_capacity(
        space.n_dofs,
        space.n_dofs,
        mesh.n_cells() * nb * nb + mesh.n_edges() * 4 * nb * nb,
    );

    let mut tab = Tabulator::new(space, &q.cell);
    let mut local = vec![0.0; nb * nb];
    for cell in 0..mesh.n_cells() {
        let e = tab.tabulate(cell)?;
        local.iter_mut().for_each(|v| *v = 0.0);
        for qp in 0..e.n_points() {
            let w = e.weights[qp];
            let jets = e.at(qp);
            for (a, ja) in jets.iter().enumerate() {
                for (b, jb) in jets.iter().enumerate() {
                    local[a * nb + b] += w * hess_contract(&ja.hess, &jb.hess);
                }
            }
        }
        let dofs = space.cell_dofs(cell);
        out.add_block(dofs, dofs, &local);
    }

    let mut local = Vec::new();
    for edge in 0..mesh.n_edges() {
        let tr = edge_traces(space, edge, &q.edge)?;
        let ns = tr.n_slots();
        let penalty = alpha / tr.length;
        local.clear();
        local.resize(ns * ns, 0.0);
        for qp in 0..tr.n_points() {
            let w = tr.weights[qp];
            let jump = &tr.jump[qp * ns..(qp + 1) * ns];
            let avg = &tr.avg[qp * ns..(qp + 1) * ns];
            for s in 0..ns {
                for t in 0..ns {
                    local[s * ns + t] +=
                        w * (avg[t] * jump[s] + avg[s] * jump[t] + penalty * jump[s] * jump[t]);
                }
            }
        }
        out.add_block(&tr.dofs, &tr.dofs, &local);
    }
    Ok(out.build())
}

/// `g[j] = a(f, χ_j)` for a smooth function `f`.
///
/// Interior jumps of `∂f/∂n` vanish; on the boundary `[[∂f/∂n]] = −n·∇f`.
pub fn aip_action_smooth(space: &FeSpace, alpha: f64, f: &dyn SmoothField, q: &Quadratures) -> Result<Vec<f64>> {
    check_penalty(alpha)?;
    let mesh = &space.mesh;
    let mut g = vec![0.0; space.n_dofs];

    let mut tab = Tabulator::new(space, &q.cell);
    for cell in 0..mesh.n_cells() {
        let e = tab.tabulate(cell)?;
        let dofs = space.cell_dofs(cell);
        for qp in 0..e.n_points() {
            let hf = f.jet(e.points[qp]).hess;
            let w = e.weights[qp];
            for (jet, &d) in e.at(qp).iter().zip(dofs) {
                g[d] += w * hess_contract(&hf, &jet.hess);
            }
        }
    }

    for edge in 0..mesh.n_edges() {
        let tr = edge_traces(space, edge, &q.edge)?;
        let ns = tr.n_slots();
        let penalty = alpha / tr.length;
        for qp in 0..tr.n_points() {
            let fj = f.jet(tr.points[qp]);
            let avg_f = normal_second(&fj.hess, tr.normal);
            let jump_f = if tr.is_boundary() { -normal_first(fj.grad, tr.normal) } else { 0.0 };
            let w = tr.weights[qp];
            for s in 0..ns {
                let js = tr.jump[qp * ns + s];
                let as_ = tr.avg[qp * ns + s];
                g[tr.dofs[s]] += w * (avg_f * js + as_ * jump_f + penalty * jump_f * js);
            }
        }
    }
    Ok(g)
}

/// `b[i] = ∫ φ³ χ_i`.
pub fn assemble_cubic_residual(space: &FeSpace, phi: &[f64], q: &Quadratures) -> Result<Vec<f64>> {
    check_len(space, phi)?;
    let mut b = vec![0.0; space.n_dofs];
    cubic_pass(space, phi, q, Some(&mut b), None)?;
    Ok(b)
}

/// `W[i][j] = ∫ 3φ² χ_i χ_j`.
pub fn assemble_cubic_jacobian(space: &FeSpace, phi: &[f64], q: &Quadratures) -> Result<SparseMatrix> {
    check_len(space, phi)?;
    let nb = space.local_dofs();
    let mut out = TripletBuilder::with_capacity(space.n_dofs, space.n_dofs, space.mesh.n_cells() * nb * nb);
    cubic_pass(space, phi, q, None, Some(CubicJacobianSink::Triplets(&mut out)))?;
    Ok(out.build())
}

/// Fill the residual and the Jacobian values in one sweep. `jacobian` must
/// already hold the cell-coupling pattern of `space` (e.g. a mass matrix).
pub fn assemble_cubic_into(
    space: &FeSpace,
    phi: &[f64],
    q: &Quadratures,
    residual: &mut [f64],
    jacobian: &mut SparseMatrix,
) -> Result<()> {
    check_len(space, phi)?;
    check_len(space, residual)?;
    residual.iter_mut().for_each(|v| *v = 0.0);
    jacobian.values_mut().iter_mut().for_each(|v| *v = 0.0);
    cubic_pass(space, phi, q, Some(residual), Some(CubicJacobianSink::Pattern(jacobian)))
}

enum CubicJacobianSink<'a> {
    Triplets(&'a mut TripletBuilder),
    Pattern(&'a mut SparseMatrix),
}

fn cubic_pass(
    space: &FeSpace,
    phi: &[f64],
    q: &Quadratures,
    mut residual: Option<&mut [f64]>,
    mut jacobian: Option<CubicJacobianSink<'_>>,
) -> Result<()> {
    let nb = space.local_dofs();
    let mut tab = Tabulator::new(space, &q.cell);
    let mut local = vec![0.0; nb * nb];
    for cell in 0..space.mesh.n_cells() {
        let e = tab.tabulate(cell)?;
        let dofs = space.cell_dofs(cell);
        local.iter_mut().for_each(|v| *v = 0.0);
        for qp in 0..e.n_points() {
            let jets = e.at(qp);
            let u: f64 = jets.iter().zip(dofs).map(|(j, &d)| j.value * phi[d]).sum();
            let w = e.weights[qp];
            if let Some(b) = residual.as_deref_mut() {
                let wu3 = w * u * u * u;
                for (j, &d) in jets.iter().zip(dofs) {
                    b[d] += wu3 * j.value;
                }
            }
            if jacobian.is_some() {
                let w3u2 = 3.0 * w * u * u;
                for (a, ja) in jets.iter().enumerate() {
                    for (b, jb) in jets.iter().enumerate() {
                        local[a * nb + b] += w3u2 * ja.value * jb.value;
                    }
                }
            }
        }
        match jacobian.as_mut() {
            Some(CubicJacobianSink::Triplets(t)) => t.add_block(dofs, dofs, &local),
            Some(CubicJacobianSink::Pattern(m)) => {
                for (a, &r) in dofs.iter().enumerate() {
                    for (b, &c) in dofs.iter().enumerate() {
                        let k = m.position(r, c).ok_or_else(|| {
                            Error::InvalidArgument(format!("jacobian pattern lacks entry ({r}, {c})"))
                        })?;
                        m.values_mut()[k] += local[a * nb + b];
                    }
                }
            }
            None => {}
        }
    }
    Ok(())
}

/// `Σ_K Σ_q w_q f(x_q, jets)` where `jets[k]` is the jet of `fields[k]` at `x_q`.
pub fn integrate_fields(
    space: &FeSpace,
    fields: &[&[f64]],
    rule: &QuadRule,
    mut f: impl FnMut(Point, &[BasisJet]) -> f64,
) -> Result<f64> {
    for v in fields {
        check_len(space, v)?;
    }
    let mut tab = Tabulator::new(space, rule);
    let mut vals = vec![BasisJet::default(); fields.len()];
    let mut total = 0.0;
    for cell in 0..space.mesh.n_cells() {
        let e = tab.tabulate(cell)?;
        let dofs = space.cell_dofs(cell);
        for qp in 0..e.n_points() {
            for (out, field) in vals.iter_mut().zip(fields) {
                *out = BasisJet::default();
                for (jet, &d) in e.at(qp).iter().zip(dofs) {
                    let c = field[d];
                    out.value += c * jet.value;
                    for i in 0..2 {
                        out.grad[i] += c * jet.grad[i];
                        for j in 0..2 {
                            out.hess[i][j] += c * jet.hess[i][j];
                        }
                    }
                }
            }
            total += e.weights[qp] * f(e.points[qp], &vals);
        }
    }
    Ok(total)
}

//! Energy, mesh-dependent norms, the per-step energy identity, the discrete
//! inverse Laplacian and the convex functional whose minimizer is one step of
//! the scheme.

use crate::error::{Error, Result};
use crate::fespace::{FeSpace, Mat2, Tabulator};
use crate::forms::{assemble_mass, assemble_stiffness, edge_traces, integrate_fields, Quadratures, SmoothField};
use crate::operators::Operators;
use crate::sparse::{dot, LuSolver, SparseMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct EnergyRecord {
    pub step: usize,
    pub time: f64,
    pub total: f64,
    /// `¼‖φ‖⁴_{L⁴}`
    pub quartic: f64,
    /// `(1−ε)/2 ‖φ‖²`
    pub quadratic: f64,
    /// `−‖∇φ‖²`
    pub gradient: f64,
    /// `½ a(φ, φ)`
    pub aip_half: f64,
    pub mass: f64,
}

/// `(∫ φ⁴, ∫ φ²)` by cell quadrature.
fn power_integrals(space: &FeSpace, phi: &[f64], q: &Quadratures) -> Result<(f64, f64)> {
    let quart = integrate_fields(space, &[phi], &q.cell, |_, j| j[0].value.powi(4))?;
    let sq = integrate_fields(space, &[phi], &q.cell, |_, j| j[0].value * j[0].value)?;
    Ok((quart, sq))
}

/// `F(φ) = ¼‖φ‖⁴ + (1−ε)/2‖φ‖² − ‖∇φ‖² + ½a(φ,φ)`.
pub fn energy_f(ops: &Operators, phi: &[f64], eps: f64) -> Result<EnergyRecord> {
    ops.check_phi(phi)?;
    let (quart, sq) = power_integrals(&ops.z, phi, &ops.quad)?;
    let quartic = 0.25 * quart;
    let quadratic = 0.5 * (1.0 - eps) * sq;
    // Both forms annihilate constants; dropping the mean avoids cancellation.
    let mass = ops.mass(phi);
    let c = mass / ops.area;
    let fluct: Vec<f64> = phi.iter().map(|v| v - c).collect();
    let gradient = -ops.k_z.quad_form(&fluct);
    let aip_half = 0.5 * ops.a.quad_form(&fluct);
    Ok(EnergyRecord {
        step: 0,
        time: 0.0,
        total: quartic + quadratic + gradient + aip_half,
        quartic,
        quadratic,
        gradient,
        aip_half,
        mass,
    })
}

fn frobenius_sq(h: &Mat2) -> f64 {
    h[0][0] * h[0][0] + h[0][1] * h[0][1] + h[1][0] * h[1][0] + h[1][1] * h[1][1]
}

/// Matrix of `‖v‖²₂,ₕ = Σ_K |v|²_{H²(K)} + Σ_e (α/|e|) ‖[[∂v/∂n]]‖²_{L²(e)}`.
pub fn assemble_norm_2h(space: &FeSpace, alpha: f64, q: &Quadratures) -> Result<SparseMatrix> {
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
                    let mut c = 0.0;
                    for i in 0..2 {
                        for j in 0..2 {
                            c += ja.hess[i][j] * jb.hess[i][j];
                        }
                    }
                    local[a * nb + b] += w * c;
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
            let w = tr.weights[qp] * penalty;
            let jump = &tr.jump[qp * ns..(qp + 1) * ns];
            for s in 0..ns {
                for t in 0..ns {
                    local[s * ns + t] += w * jump[s] * jump[t];
                }
            }
        }
        out.add_block(&tr.dofs, &tr.dofs, &local);
    }
    Ok(out.build())
}

/// `‖v‖₂,ₕ` of a discrete field.
pub fn norm_2h(space: &FeSpace, v: &[f64], alpha: f64, q: &Quadratures) -> Result<f64> {
    if v.len() != space.n_dofs {
        return Err(Error::SizeMismatch { expected: space.n_dofs, got: v.len() });
    }
    Ok(assemble_norm_2h(space, alpha, q)?.quad_form(v).max(0.0).sqrt())
}

/// `‖v − f‖₂,ₕ` for a discrete `v` and a smooth `f`, whose normal derivative
/// jumps only across the boundary.
pub fn norm_2h_error(space: &FeSpace, v: &[f64], f: &dyn SmoothField, alpha: f64, q: &Quadratures) -> Result<f64> {
    let cells = integrate_fields(space, &[v], &q.cell, |p, j| {
        let hf = f.jet(p).hess;
        let mut d = j[0].hess;
        for i in 0..2 {
            for k in 0..2 {
                d[i][k] -= hf[i][k];
            }
        }
        frobenius_sq(&d)
    })?;
    let mut edges = 0.0;
    for edge in 0..space.mesh.n_edges() {
        let tr = edge_traces(space, edge, &q.edge)?;
        for qp in 0..tr.n_points() {
            let (mut jump, _) = tr.field_traces(qp, v);
            if tr.is_boundary() {
                let g = f.jet(tr.points[qp]).grad;
                jump += g[0] * tr.normal[0] + g[1] * tr.normal[1];
            }
            edges += alpha / tr.length * tr.weights[qp] * jump * jump;
        }
    }
    Ok((cells + edges).max(0.0).sqrt())
}

/// Absolute defect of the per-step energy identity
///
/// ```text
/// (F(φ) − F(φ_old))/τ + ‖∇μ‖² + τ[ (1−ε)/2‖δφ‖² + ‖∇δφ‖² + ¼‖δ(φ²)‖²
///                                  + ½‖φ δφ‖² + ½a(δφ, δφ) ] = 0
/// ```
///
/// with `δv = (v − v_old)/τ`. Every term is evaluated directly from the fields.
pub fn energy_law_residual(
    ops: &Operators,
    phi_old: &[f64],
    phi: &[f64],
    mu: &[f64],
    tau: f64,
    eps: f64,
) -> Result<f64> {
    ops.check_phi(phi_old)?;
    ops.check_phi(phi)?;
    ops.check_mu(mu)?;
    let f_new = energy_f(ops, phi, eps)?.total;
    let f_old = energy_f(ops, phi_old, eps)?.total;
    let d: Vec<f64> = phi.iter().zip(phi_old).map(|(a, b)| (a - b) / tau).collect();
    let grad_mu = ops.k_v.quad_form(mu);
    let l2_d = ops.m_z.quad_form(&d);
    let grad_d = ops.k_z.quad_form(&d);
    let aip_d = ops.a.quad_form(&d);
    let fields = [phi, phi_old];
    let sq_diff = integrate_fields(&ops.z, &fields, &ops.quad.cell, |_, j| {
        let (u, uo) = (j[0].value, j[1].value);
        ((u * u - uo * uo) / tau).powi(2)
    })?;
    let prod = integrate_fields(&ops.z, &fields, &ops.quad.cell, |_, j| {
        let (u, uo) = (j[0].value, j[1].value);
        (u * (u - uo) / tau).powi(2)
    })?;
    let lhs = (f_new - f_old) / tau
        + grad_mu
        + tau * (0.5 * (1.0 - eps) * l2_d + grad_d + 0.25 * sq_diff + 0.5 * prod + 0.5 * aip_d);
    Ok(lhs.abs())
}

/// Which space the discrete inverse Laplacian maps into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverseLaplacianKind {
    /// `T: Z̊ → Z̊`, `(∇Tζ, ∇χ) = (ζ, χ)` for all `χ ∈ Z`.
    P2,
    /// `T̃: Z̊ → V̊`, `(∇T̃ζ, ∇ν) = (ζ, ν)` for all `ν ∈ V`.
    Mixed,
}

/// Mean-constrained Poisson solve through a bordered system
/// `[[K, m], [mᵀ, 0]]` with `m_j = ∫ ψ_j`.
pub struct InverseLaplacian {
    kind: InverseLaplacianKind,
    lu: LuSolver,
    /// Right-hand side operator: `M_Z` or `M_ZVᵀ`.
    rhs: SparseMatrix,
    /// Pairing of the output with a `Z` function: `M_Z` or `M_ZV`.
    pairing: SparseMatrix,
    mass_z: Vec<f64>,
    l2_z: SparseMatrix,
    area: f64,
    n_out: usize,
}

impl InverseLaplacian {
    pub fn new(ops: &Operators, kind: InverseLaplacianKind) -> Result<Self> {
        let (k, m, rhs, pairing) = match kind {
            InverseLaplacianKind::P2 => (&ops.k_z, &ops.mass_z, ops.m_z.clone(), ops.m_z.clone()),
            InverseLaplacianKind::Mixed => (&ops.k_v, &ops.mass_v, ops.m_zv.transpose(), ops.m_zv.clone()),
        };
        let n = k.nrows();
        let mut t = k.triplets();
        for (j, &mj) in m.iter().enumerate() {
            t.push((j, n, mj));
            t.push((n, j, mj));
        }
        let bordered = SparseMatrix::from_triplets(n + 1, n + 1, t);
        let mut lu = LuSolver::new();
        lu.factor(&bordered)?;
        Ok(Self {
            kind,
            lu,
            rhs,
            pairing,
            mass_z: ops.mass_z.clone(),
            l2_z: ops.m_z.clone(),
            area: ops.area,
            n_out: n,
        })
    }

    pub fn kind(&self) -> InverseLaplacianKind {
        self.kind
    }

    fn check_zero_mean(&self, zeta: &[f64]) -> Result<()> {
        if zeta.len() != self.mass_z.len() {
            return Err(Error::SizeMismatch { expected: self.mass_z.len(), got: zeta.len() });
        }
        let mean = dot(&self.mass_z, zeta);
        let scale = (self.l2_z.quad_form(zeta).max(0.0) * self.area).sqrt();
        if mean.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NonZeroMean(mean));
        }
        Ok(())
    }

    /// Coefficients of `Tζ` (zero mean).
    pub fn apply(&self, zeta: &[f64]) -> Result<Vec<f64>> {
        self.check_zero_mean(zeta)?;
        let mut b = self.rhs.mul_vec(zeta);
        b.push(0.0);
        let mut x = self.lu.solve(&b)?;
        x.truncate(self.n_out);
        Ok(x)
    }

    /// `‖ζ‖²₋₁,ₕ = (ζ, Tζ)`.
    pub fn norm_sq(&self, zeta: &[f64]) -> Result<f64> {
        let t = self.apply(zeta)?;
        Ok(self.pairing.bilinear(zeta, &t))
    }
}

/// `T_h ζ` in the P2 space.
pub fn inverse_laplacian_h(ops: &Operators, zeta: &[f64]) -> Result<Vec<f64>> {
    InverseLaplacian::new(ops, InverseLaplacianKind::P2)?.apply(zeta)
}

/// `‖ζ‖₋₁,ₕ` with the P2 inverse Laplacian.
pub fn norm_minus1_h(ops: &Operators, zeta: &[f64]) -> Result<f64> {
    Ok(InverseLaplacian::new(ops, InverseLaplacianKind::P2)?.norm_sq(zeta)?.max(0.0).sqrt())
}

/// Scheme parameters the functional depends on.
#[derive(Debug, Clone, Copy)]
pub struct GParams {
    pub tau: f64,
    pub eps: f64,
    /// Conserved average `φ̄₀`.
    pub mean: f64,
}

/// The convex functional
///
/// ```text
/// G(φ) = (τ/2)‖(φ − φ_old)/τ‖²₋₁ + ½a(φ, φ) + ¼‖φ + φ̄₀‖⁴ + (1−ε)/2‖φ + φ̄₀‖²
///        − 2(∇φ_old, ∇φ)
/// ```
///
/// over zero-mean `φ`. `inv` fixes the `‖·‖₋₁` in use; the scheme's
/// minimizer corresponds to [`InverseLaplacianKind::Mixed`].
pub fn g_functional(
    ops: &Operators,
    inv: &InverseLaplacian,
    candidate: &[f64],
    phi_old: &[f64],
    p: GParams,
) -> Result<f64> {
    ops.check_phi(candidate)?;
    ops.check_phi(phi_old)?;
    let d: Vec<f64> = candidate.iter().zip(phi_old).map(|(a, b)| (a - b) / p.tau).collect();
    let neg = inv.norm_sq(&d)?;
    inv.check_zero_mean(candidate)?;
    let shifted: Vec<f64> = candidate.iter().map(|v| v + p.mean).collect();
    let (quart, sq) = power_integrals(&ops.z, &shifted, &ops.quad)?;
    Ok(0.5 * p.tau * neg + 0.5 * ops.a.quad_form(candidate) + 0.25 * quart + 0.5 * (1.0 - p.eps) * sq
        - 2.0 * ops.k_z.bilinear(phi_old, candidate))
}

/// Chemical potential belonging to a zero-mean minimizer of [`g_functional`]:
/// `μ = −T̃((φ − φ_old)/τ) + c`, with `c|Ω| = ∫ φ³ + (1−ε)φ` for the full
/// `φ = candidate + φ̄₀`.
pub fn recover_mu(
    ops: &Operators,
    inv: &InverseLaplacian,
    candidate: &[f64],
    phi_old: &[f64],
    p: GParams,
) -> Result<Vec<f64>> {
    if inv.kind() != InverseLaplacianKind::Mixed {
        return Err(Error::InvalidArgument("μ lives in the P1 space; use the mixed inverse Laplacian".into()));
    }
    let d: Vec<f64> = candidate.iter().zip(phi_old).map(|(a, b)| (a - b) / p.tau).collect();
    let t = inv.apply(&d)?;
    let full: Vec<f64> = candidate.iter().map(|v| v + p.mean).collect();
    let cubic = integrate_fields(&ops.z, &[&full], &ops.quad.cell, |_, j| j[0].value.powi(3))?;
    let c = (cubic + (1.0 - p.eps) * ops.mass(&full)) / ops.area;
    Ok(t.iter().map(|v| c - v).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub err_2h: f64,
    pub err_l2: f64,
    /// Full `H¹` norm, `(‖e‖² + ‖∇e‖²)^½`.
    pub err_h1: f64,
}

/// Represent a coarse field exactly in a nested fine space of the same degree.
pub fn prolongate(coarse: &FeSpace, coeffs: &[f64], fine: &FeSpace) -> Result<Vec<f64>> {
    if coarse.degree != fine.degree {
        return Err(Error::InvalidArgument("spaces must have the same degree".into()));
    }
    if coeffs.len() != coarse.n_dofs {
        return Err(Error::SizeMismatch { expected: coarse.n_dofs, got: coeffs.len() });
    }
    let fm = &fine.mesh;
    let cm = &coarse.mesh;
    let tol = 1e-9;
    let mut out = vec![f64::NAN; fine.n_dofs];
    for cell in 0..fm.n_cells() {
        let c = fm.centroid(cell);
        let host = cm
            .locate(c, tol)
            .ok_or_else(|| Error::NonNested(format!("fine cell {cell} lies outside the coarse mesh")))?;
        for &v in &fm.cells[cell] {
            if cm.barycentric(host, fm.vertices[v]).iter().any(|&l| l < -tol) {
                return Err(Error::NonNested(format!("fine cell {cell} straddles coarse cells")));
            }
        }
        for &d in fine.cell_dofs(cell) {
            if out[d].is_nan() {
                out[d] = coarse.evaluate_jet_in(coeffs, host, fine.dof_coords[d]).value;
            }
        }
    }
    Ok(out)
}

/// Errors of a coarse solution against a reference on a nested fine mesh,
/// measured on the fine mesh.
pub fn error_norms(
    coarse: &FeSpace,
    coarse_coeffs: &[f64],
    fine: &FeSpace,
    fine_coeffs: &[f64],
    alpha: f64,
    q: &Quadratures,
) -> Result<ErrorNorms> {
    if fine_coeffs.len() != fine.n_dofs {
        return Err(Error::SizeMismatch { expected: fine.n_dofs, got: fine_coeffs.len() });
    }
    let p = prolongate(coarse, coarse_coeffs, fine)?;
    let e: Vec<f64> = p.iter().zip(fine_coeffs).map(|(a, b)| a - b).collect();
    let l2 = assemble_mass(fine, fine, q)?.quad_form(&e).max(0.0);
    let semi = assemble_stiffness(fine, q)?.quad_form(&e).max(0.0);
    let err_2h = assemble_norm_2h(fine, alpha, q)?.quad_form(&e).max(0.0).sqrt();
    Ok(ErrorNorms { err_2h, err_l2: l2.sqrt(), err_h1: (l2 + semi).sqrt() })
}

/// `a(v, v) / ‖v‖²₂,ₕ`; `None` when the norm vanishes.
pub fn rayleigh_quotient(a: &SparseMatrix, norm: &SparseMatrix, v: &[f64]) -> Option<f64> {
    let d = norm.quad_form(v);
    (d > 0.0).then(|| a.quad_form(v) / d)
}

/// `(min, max)` of [`rayleigh_quotient`] over the given vectors.
pub fn rayleigh_bounds<'a>(
    a: &SparseMatrix,
    norm: &SparseMatrix,
    samples: impl IntoIterator<Item = &'a [f64]>,
) -> (f64, f64) {
    samples
        .into_iter()
        .filter_map(|v| rayleigh_quotient(a, norm, v))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)))
}

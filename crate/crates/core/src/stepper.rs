//! Time stepping: elliptic projection of the initial data and one Newton
//! solve of the coupled `(φ, μ)` system per step.

use std::sync::Arc;

use crate::diagnostics::{energy_f, energy_law_residual};
use crate::error::{Error, Result};
use crate::forms::{aip_action_smooth, assemble_cubic_into, assemble_load, SmoothField};
use crate::operators::Operators;
use crate::sparse::{norm2, solve, LdltSolver, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SchemeParams {
    pub tau: f64,
    pub eps: f64,
    pub alpha: f64,
    pub newton_tol_rel: f64,
    pub newton_tol_abs: f64,
    pub newton_max_iter: usize,
}

impl SchemeParams {
    pub fn new(tau: f64, eps: f64, alpha: f64) -> Self {
        Self { tau, eps, alpha, newton_tol_rel: 1e-10, newton_tol_abs: 1e-12, newton_max_iter: 50 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.eps < 1.0) {
            return Err(Error::InvalidArgument(format!("eps must be below 1, got {}", self.eps)));
        }
        if !(self.alpha >= 1.0) {
            return Err(Error::PenaltyTooSmall(self.alpha));
        }
        if !(self.newton_tol_rel >= 0.0 && self.newton_tol_abs >= 0.0) || self.newton_max_iter == 0 {
            return Err(Error::InvalidArgument("Newton tolerances must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub phi: Vec<f64>,
    pub mu: Vec<f64>,
    pub time: f64,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub newton_iters: usize,
    pub final_residual: f64,
    pub residual_history: Vec<f64>,
    pub energy_before: f64,
    pub energy_after: f64,
    pub energy_law_residual: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub phi: Vec<f64>,
    pub mu: Vec<f64>,
    pub iterations: usize,
    /// Residual norm before each iteration and after the last one.
    pub history: Vec<f64>,
}

/// Solve `[A + (1−ε)M] p = a(f, ·) + (1−ε)(f, ·)` for the projection of `f`.
pub fn ritz_project_initial(ops: &Operators, ic: &dyn SmoothField, eps: f64) -> Result<Vec<f64>> {
    if !(eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps must be below 1, got {eps}")));
    }
    let lhs = ops.a.add_scaled(1.0 - eps, &ops.m_z);
    let mut rhs = aip_action_smooth(&ops.z, ops.alpha, ic, &ops.quad)?;
    let load = assemble_load(&ops.z, |p| ic.value(p), &ops.quad)?;
    for (r, l) in rhs.iter_mut().zip(&load) {
        *r += (1.0 - eps) * l;
    }
    solve(&lhs, &rhs)
}

/// Newton solver for one step with the constant blocks preassembled.
///
/// Unknowns are ordered `[φ; μ]`. The residual is
///
/// ```text
/// r_φ = Aφ + c(φ) + (1−ε)M_Z φ − 2K_Z φ_old − M_ZV μ
/// r_μ = −M_ZVᵀ(φ − φ_old) − τK_V μ
/// ```
///
/// with `c(φ)_i = ∫φ³χ_i`, whose Jacobian is symmetric.
pub struct Stepper {
    ops: Arc<Operators>,
    params: SchemeParams,
    base: SparseMatrix,
    jac: SparseMatrix,
    /// Position in `jac` of every stored entry of `M_Z`, in CSR order.
    w_pos: Vec<usize>,
    w: SparseMatrix,
    ldlt: LdltSolver,
    /// `|J|` without the cubic part, for the rounding level of the residual.
    abs_base: SparseMatrix,
    abs_k_z: SparseMatrix,
}

impl Stepper {
    pub fn new(ops: Arc<Operators>, params: SchemeParams) -> Result<Self> {
        params.validate()?;
        if (params.alpha - ops.alpha).abs() > 0.0 {
            return Err(Error::InvalidArgument(format!(
                "operators were assembled with alpha = {}, scheme uses {}",
                ops.alpha, params.alpha
            )));
        }
        let top_left = ops.a.add_scaled(1.0 - params.eps, &ops.m_z);
        let base = SparseMatrix::block2x2(
            &top_left,
            &ops.m_zv.scaled(-1.0),
            &ops.m_zv.transpose().scaled(-1.0),
            &ops.k_v.scaled(-params.tau),
        );
        let mut w_pos = Vec::with_capacity(ops.m_z.nnz());
        for r in 0..ops.m_z.nrows() {
            for &c in ops.m_z.row(r).0 {
                let k = base
                    .position(r, c)
                    .ok_or_else(|| Error::InvalidArgument(format!("system pattern lacks ({r}, {c})")))?;
                w_pos.push(k);
            }
        }
        Ok(Self {
            abs_base: base.abs(),
            abs_k_z: ops.k_z.abs(),
            w: ops.m_z.clone(),
            jac: base.clone(),
            base,
            w_pos,
            ldlt: LdltSolver::new(),
            params,
            ops,
        })
    }

    pub fn ops(&self) -> &Arc<Operators> {
        &self.ops
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    /// Stacked residual at `(φ, μ)`; refreshes the cubic Jacobian.
    fn residual(&mut self, phi_old: &[f64], phi: &[f64], mu: &[f64]) -> Result<Vec<f64>> {
        let ops = &self.ops;
        let (nz, nv) = (ops.n_phi(), ops.n_mu());
        let mut r = vec![0.0; nz + nv];
        assemble_cubic_into(&ops.z, phi, &ops.quad, &mut r[..nz], &mut self.w)?;
        let mut tmp = vec![0.0; nz];
        ops.a.mul_vec_into(phi, &mut tmp);
        let m_phi = ops.m_z.mul_vec(phi);
        let k_old = ops.k_z.mul_vec(phi_old);
        let m_mu = ops.m_zv.mul_vec(mu);
        let s = 1.0 - self.params.eps;
        for i in 0..nz {
            r[i] += tmp[i] + s * m_phi[i] - 2.0 * k_old[i] - m_mu[i];
        }
        let dphi: Vec<f64> = phi.iter().zip(phi_old).map(|(a, b)| a - b).collect();
        let mut t = vec![0.0; nv];
        for row in 0..nz {
            let (cols, vals) = ops.m_zv.row(row);
            for (&c, &v) in cols.iter().zip(vals) {
                t[c] += v * dphi[row];
            }
        }
        let kmu = ops.k_v.mul_vec(mu);
        for j in 0..nv {
            r[nz + j] = -t[j] - self.params.tau * kmu[j];
        }
        Ok(r)
    }

    /// Bound on the rounding error committed when evaluating the residual;
    /// residuals below it are indistinguishable from zero.
    fn rounding_floor(&self, phi_old: &[f64], phi: &[f64], mu: &[f64]) -> f64 {
        let nz = phi.len();
        let mut x: Vec<f64> = phi.iter().map(|v| v.abs()).collect();
        x.extend(mu.iter().map(|v| v.abs()));
        let mut y = self.abs_base.mul_vec(&x);
        let k_old = self.abs_k_z.mul_vec(&phi_old.iter().map(|v| v.abs()).collect::<Vec<_>>());
        for (yi, ki) in y[..nz].iter_mut().zip(&k_old) {
            *yi += 2.0 * ki;
        }
        f64::EPSILON * norm2(&y)
    }

    fn factor_jacobian(&mut self) -> Result<()> {
        self.jac.values_mut().copy_from_slice(self.base.values());
        let vals = self.jac.values_mut();
        for (&k, &w) in self.w_pos.iter().zip(self.w.values()) {
            vals[k] += w;
        }
        self.ldlt.factor(&self.jac)
    }

    /// Newton iteration from `(guess_phi, guess_mu)` for the step leaving `phi_old`.
    pub fn newton_solve(&mut self, phi_old: &[f64], guess_phi: &[f64], guess_mu: &[f64]) -> Result<NewtonOutcome> {
        self.ops.check_phi(phi_old)?;
        self.ops.check_phi(guess_phi)?;
        self.ops.check_mu(guess_mu)?;
        let nz = self.ops.n_phi();
        let p = self.params;
        let mut phi = guess_phi.to_vec();
        let mut mu = guess_mu.to_vec();
        let mut r = self.residual(phi_old, &phi, &mu)?;
        let mut rn = norm2(&r);
        let tol = p.newton_tol_abs.max(p.newton_tol_rel * rn);
        let mut history = vec![rn];
        let mut increases = 0;
        let mut damped = false;
        for it in 0..=p.newton_max_iter {
            if rn <= tol || rn <= self.rounding_floor(phi_old, &phi, &mu) {
                return Ok(NewtonOutcome { phi, mu, iterations: it, history });
            }
            if it == p.newton_max_iter || !rn.is_finite() {
                break;
            }
            self.factor_jacobian()?;
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let delta = self.ldlt.solve(&neg)?;
            let mut lambda = 1.0;
            let (mut trial_phi, mut trial_mu, mut trial_r, mut trial_n);
            loop {
                trial_phi = phi.iter().zip(&delta[..nz]).map(|(a, d)| a + lambda * d).collect::<Vec<_>>();
                trial_mu = mu.iter().zip(&delta[nz..]).map(|(a, d)| a + lambda * d).collect::<Vec<_>>();
                trial_r = self.residual(phi_old, &trial_phi, &trial_mu)?;
                trial_n = norm2(&trial_r);
                if !damped || trial_n < rn || lambda < 1e-6 {
                    break;
                }
                lambda *= 0.5;
            }
            increases = if trial_n > rn { increases + 1 } else { 0 };
            if increases >= 2 {
                damped = true;
            }
            phi = trial_phi;
            mu = trial_mu;
            r = trial_r;
            rn = trial_n;
            history.push(rn);
        }
        Err(Error::NewtonDiverged { iterations: history.len() - 1, history })
    }

    /// Advance one step; the previous `μ` seeds Newton.
    pub fn step(&mut self, state: &SimState) -> Result<(SimState, StepStats)> {
        let p = self.params;
        let out = self.newton_solve(&state.phi, &state.phi, &state.mu)?;
        let energy_before = energy_f(&self.ops, &state.phi, p.eps)?.total;
        let energy_after = energy_f(&self.ops, &out.phi, p.eps)?.total;
        let law = energy_law_residual(&self.ops, &state.phi, &out.phi, &out.mu, p.tau, p.eps)?;
        let stats = StepStats {
            newton_iters: out.iterations,
            final_residual: *out.history.last().unwrap(),
            residual_history: out.history,
            energy_before,
            energy_after,
            energy_law_residual: law,
            mass: self.ops.mass(&out.phi),
        };
        let next = SimState { phi: out.phi, mu: out.mu, time: state.time + p.tau, step: state.step + 1 };
        Ok((next, stats))
    }

    /// Initial state: projected `φ`, zero `μ`.
    pub fn initial_state(&self, ic: &dyn SmoothField) -> Result<SimState> {
        let phi = ritz_project_initial(&self.ops, ic, self.params.eps)?;
        Ok(SimState { phi, mu: vec![0.0; self.ops.n_mu()], time: 0.0, step: 0 })
    }

    /// Take `n_steps` steps, checking the conservation and dissipation
    /// invariants after each. `observe` sees every accepted state.
    pub fn run(
        &mut self,
        initial: SimState,
        n_steps: usize,
        mut observe: impl FnMut(&SimState, &StepStats) -> Result<()>,
    ) -> Result<SimState> {
        let mass0 = self.ops.mass(&initial.phi);
        let scale = mass_scale(&self.ops, &initial.phi, mass0);
        let mut state = initial;
        for _ in 0..n_steps {
            let step = state.step + 1;
            let at = |e: Error| Error::AtStep { step, source: Box::new(e) };
            let (next, stats) = self.step(&state).map_err(at)?;
            check_invariants(&stats, mass0, scale).map_err(at)?;
            observe(&next, &stats).map_err(at)?;
            state = next;
        }
        Ok(state)
    }
}

/// Reference magnitude for relative mass drift; falls back to the `L²`
/// size of the data when the mean vanishes.
pub fn mass_scale(ops: &Operators, phi: &[f64], mass0: f64) -> f64 {
    let l2 = (ops.m_z.quad_form(phi).max(0.0) * ops.area).sqrt();
    mass0.abs().max(1e-8 * l2).max(f64::MIN_POSITIVE)
}

pub const MASS_TOL: f64 = 1e-10;
pub const ENERGY_TOL: f64 = 1e-9;
pub const ENERGY_LAW_TOL: f64 = 1e-8;

pub fn check_invariants(stats: &StepStats, mass0: f64, scale: f64) -> Result<()> {
    let drift = (stats.mass - mass0).abs() / scale;
    if drift > MASS_TOL {
        return Err(Error::Invariant(format!("relative mass drift {drift:e}")));
    }
    let slack = ENERGY_TOL * stats.energy_before.abs().max(1.0);
    if stats.energy_after > stats.energy_before + slack {
        return Err(Error::Invariant(format!(
            "energy increased from {} to {}",
            stats.energy_before, stats.energy_after
        )));
    }
    let law_tol = ENERGY_LAW_TOL * stats.energy_after.abs().max(1.0);
    if stats.energy_law_residual > law_tol {
        return Err(Error::Invariant(format!("energy identity defect {:e}", stats.energy_law_residual)));
    }
    Ok(())
}

use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::config::{IcPreset, RunConfig};
use super::output::{write_vtk_file, RateTable, StepRow, TimeseriesWriter};
use crate::diagnostics::{energy_f, error_norms};
use crate::error::{Error, Result};
use crate::forms::Quadratures;
use crate::ic::{Benchmark, ConstantField};
use crate::mesh::build_rect_mesh;
use crate::operators::Operators;
use crate::stepper::{mass_scale, SimState, Stepper};

/// Assembled operators and the initial state described by a configuration.
pub struct Setup {
    pub stepper: Stepper,
    pub initial: SimState,
    pub n_steps: usize,
}

pub fn setup(config: &RunConfig) -> Result<Setup> {
    config.validate()?;
    let params = config.scheme_params()?;
    let mesh = Arc::new(build_rect_mesh(config.lx, config.ly, config.nx, config.ny)?);
    let quad = Quadratures::new(config.cell_degree(), config.edge_degree())?;
    let ops = Arc::new(Operators::new(mesh, config.alpha, quad)?);
    let stepper = Stepper::new(ops.clone(), params)?;
    let initial = match &config.ic {
        IcPreset::Constant { value } => stepper.initial_state(&ConstantField(*value))?,
        IcPreset::Benchmark {} => stepper.initial_state(&Benchmark)?,
        IcPreset::GrainGrowth { .. } => {
            let field = config.grain_field()?.expect("grain preset");
            stepper.initial_state(&field)?
        }
        IcPreset::Custom { coefficients } => {
            ops.check_phi(coefficients).map_err(|e| Error::Config(e.to_string()))?;
            SimState { phi: coefficients.clone(), mu: vec![0.0; ops.n_mu()], time: 0.0, step: 0 }
        }
    };
    Ok(Setup { stepper, initial, n_steps: config.n_steps()? })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub steps: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub max_mass_drift: f64,
    pub max_energy_law_residual: f64,
    pub max_newton_iters: usize,
    pub snapshots: Vec<PathBuf>,
    pub final_state: SimState,
}

fn snapshot(dir: &Path, setup_ops: &Operators, state: &SimState, snapshots: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(format!("snapshot_{:06}.vtk", state.step));
    let title = format!("pfc step {} time {}", state.step, state.time);
    write_vtk_file(&path, &setup_ops.z, &setup_ops.v, &state.phi, &state.mu, &title)?;
    snapshots.push(path);
    Ok(())
}

/// Run one configuration, writing `config.json`, `timeseries.csv` and VTK
/// snapshots into `out_dir`.
pub fn run_experiment(config: &RunConfig, out_dir: &Path) -> Result<RunSummary> {
    let Setup { mut stepper, initial, n_steps } = setup(config)?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("config.json"), config.to_json())?;
    let ops = stepper.ops().clone();
    let eps = config.eps;

    let mut csv = TimeseriesWriter::create(&out_dir.join("timeseries.csv"))?;
    let e0 = energy_f(&ops, &initial.phi, eps)?;
    csv.write(&StepRow { energy: e0, newton_iters: 0, newton_residual: 0.0, energy_law_residual: 0.0 })?;
    let mut snapshots = Vec::new();
    snapshot(out_dir, &ops, &initial, &mut snapshots)?;

    let mass0 = e0.mass;
    let scale = mass_scale(&ops, &initial.phi, mass0);
    let mut max_drift: f64 = 0.0;
    let mut max_law: f64 = 0.0;
    let mut max_iters = 0;
    let every = config.snapshot_every;
    let result = stepper.run(initial, n_steps, |state, stats| {
        let mut e = energy_f(&ops, &state.phi, eps)?;
        e.step = state.step;
        e.time = state.time;
        max_drift = max_drift.max((stats.mass - mass0).abs() / scale);
        max_law = max_law.max(stats.energy_law_residual);
        max_iters = max_iters.max(stats.newton_iters);
        csv.write(&StepRow {
            energy: e,
            newton_iters: stats.newton_iters,
            newton_residual: stats.final_residual,
            energy_law_residual: stats.energy_law_residual,
        })?;
        if (every > 0 && state.step % every == 0) || state.step == n_steps {
            snapshot(out_dir, &ops, state, &mut snapshots)?;
        }
        Ok(())
    });
    csv.flush()?;
    let final_state = result?;
    Ok(RunSummary {
        output_dir: out_dir.to_path_buf(),
        steps: n_steps,
        initial_energy: e0.total,
        final_energy: energy_f(&ops, &final_state.phi, eps)?.total,
        max_mass_drift: max_drift,
        max_energy_law_residual: max_law,
        max_newton_iters: max_iters,
        snapshots,
        final_state,
    })
}

/// Final state of a configuration without any file output.
pub fn final_state(config: &RunConfig) -> Result<(Arc<Operators>, SimState)> {
    let Setup { mut stepper, initial, n_steps } = setup(config)?;
    let state = stepper.run(initial, n_steps, |_, _| Ok(()))?;
    Ok((stepper.ops().clone(), state))
}

/// Run every level and a reference at twice the finest level; measure
/// `‖e_φ‖₂,ₕ` and `‖e_μ‖_{H¹}` against the reference on its mesh.
pub fn run_convergence_study(config: &RunConfig, levels: &[usize]) -> Result<RateTable> {
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("levels must be nonempty and strictly increasing".into()));
    }
    if config.tau_factor.is_none() {
        return Err(Error::Config("a convergence study needs `tau_factor`".into()));
    }
    let reference = 2 * levels[levels.len() - 1];
    if let Some(&bad) = levels.iter().find(|&&n| reference % n != 0) {
        return Err(Error::Config(format!("level {bad} does not divide the reference level {reference}")));
    }
    if let Some(&bad) = levels.iter().chain([&reference]).find(|&&n| (n * config.ny) % config.nx != 0) {
        return Err(Error::Config(format!("level {bad} does not keep the aspect ratio nx:ny")));
    }
    let at = |n: usize| {
        let mut c = config.clone();
        c.nx = n;
        c.ny = n * config.ny / config.nx;
        c
    };
    let (ref_ops, ref_state) = final_state(&at(reference))?;
    let mut errors = Vec::with_capacity(levels.len());
    for &n in levels {
        let cfg = at(n);
        let (ops, state) = final_state(&cfg)?;
        let q = &ref_ops.quad;
        let ephi = error_norms(&ops.z, &state.phi, &ref_ops.z, &ref_state.phi, config.alpha, q)?;
        let emu = error_norms(&ops.v, &state.mu, &ref_ops.v, &ref_state.mu, config.alpha, q)?;
        errors.push((n, cfg.h(), ephi.err_2h, emu.err_h1));
    }
    Ok(RateTable::from_errors(&errors))
}

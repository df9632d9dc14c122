use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{DEFAULT_CELL_DEGREE, DEFAULT_EDGE_DEGREE};
use crate::ic::{Crystallite, GrainField, GRAIN_AMPLITUDE, GRAIN_MEAN, GRAIN_WAVENUMBER};
use crate::stepper::SchemeParams;

/// Initial condition selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IcPreset {
    Constant {
        value: f64,
    },
    Benchmark {},
    GrainGrowth {
        #[serde(default = "default_grain_mean")]
        mean: f64,
        #[serde(default = "default_grain_amplitude")]
        amplitude: f64,
        #[serde(default = "default_grain_wavenumber")]
        wavenumber: f64,
        /// Width of the blend ramp at the patch edge; defaults to a quarter radius, at most 4.
        #[serde(default)]
        ramp_width: Option<f64>,
        /// Defaults to three patches at fixed fractions of the domain.
        #[serde(default)]
        crystallites: Option<Vec<Crystallite>>,
    },
    /// P2 coefficients on the configured mesh, used as `φ⁰` without projection.
    Custom {
        coefficients: Vec<f64>,
    },
}

fn default_grain_mean() -> f64 {
    GRAIN_MEAN
}
fn default_grain_amplitude() -> f64 {
    GRAIN_AMPLITUDE
}
fn default_grain_wavenumber() -> f64 {
    GRAIN_WAVENUMBER
}

fn default_tol_rel() -> f64 {
    1e-10
}
fn default_tol_abs() -> f64 {
    1e-12
}
fn default_max_iter() -> usize {
    50
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_snapshot_every() -> usize {
    0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub eps: f64,
    pub alpha: f64,
    /// Absolute time step. Exactly one of `tau` and `tau_factor` must be set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Time step as a multiple of `h = lx / nx`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_factor: Option<f64>,
    pub t_final: f64,
    pub ic: IcPreset,
    #[serde(default = "default_tol_rel")]
    pub newton_tol_rel: f64,
    #[serde(default = "default_tol_abs")]
    pub newton_tol_abs: f64,
    #[serde(default = "default_max_iter")]
    pub newton_max_iter: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Snapshot cadence in steps; `0` writes only the first and last state.
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    /// Cell quadrature degree override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_degree: Option<usize>,
}

/// Name of the environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "PFC_OUTPUT_ROOT";

impl RunConfig {
    /// The benchmark on `(0, 32)²` with `ε = 0.025`, `α = 20`, `τ = 0.05h`.
    pub fn benchmark(n: usize, t_final: f64) -> Self {
        Self {
            lx: 32.0,
            ly: 32.0,
            nx: n,
            ny: n,
            eps: 0.025,
            alpha: 20.0,
            tau: None,
            tau_factor: Some(0.05),
            t_final,
            ic: IcPreset::Benchmark {},
            newton_tol_rel: default_tol_rel(),
            newton_tol_abs: default_tol_abs(),
            newton_max_iter: default_max_iter(),
            output_dir: PathBuf::from("benchmark"),
            snapshot_every: 0,
            quadrature_degree: None,
        }
    }

    /// Grain growth on `(0, 201)²` with `ε = 0.25`, `α = 20`, `τ = 1`.
    pub fn grain_growth(n: usize, t_final: f64) -> Self {
        Self {
            lx: 201.0,
            ly: 201.0,
            nx: n,
            ny: n,
            eps: 0.25,
            alpha: 20.0,
            tau: Some(1.0),
            tau_factor: None,
            t_final,
            ic: IcPreset::GrainGrowth {
                mean: GRAIN_MEAN,
                amplitude: GRAIN_AMPLITUDE,
                wavenumber: GRAIN_WAVENUMBER,
                ramp_width: None,
                crystallites: None,
            },
            newton_tol_rel: default_tol_rel(),
            newton_tol_abs: default_tol_abs(),
            newton_max_iter: default_max_iter(),
            output_dir: PathBuf::from("grain_growth"),
            snapshot_every: 100,
            quadrature_degree: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Nominal mesh size `lx / nx`.
    pub fn h(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn resolved_tau(&self) -> Result<f64> {
        let tau = match (self.tau, self.tau_factor) {
            (Some(t), None) => t,
            (None, Some(f)) => f * self.h(),
            _ => return Err(Error::Config("set exactly one of `tau` and `tau_factor`".into())),
        };
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {tau}")));
        }
        Ok(tau)
    }

    /// Number of steps `T / τ`, which must be an integer up to rounding.
    pub fn n_steps(&self) -> Result<usize> {
        let tau = self.resolved_tau()?;
        let ratio = self.t_final / tau;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-6 * ratio.max(1.0) {
            return Err(Error::Config(format!(
                "t_final = {} is not a positive multiple of tau = {tau}",
                self.t_final
            )));
        }
        Ok(n as usize)
    }

    pub fn scheme_params(&self) -> Result<SchemeParams> {
        let p = SchemeParams {
            tau: self.resolved_tau()?,
            eps: self.eps,
            alpha: self.alpha,
            newton_tol_rel: self.newton_tol_rel,
            newton_tol_abs: self.newton_tol_abs,
            newton_max_iter: self.newton_max_iter,
        };
        p.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(p)
    }

    pub fn cell_degree(&self) -> usize {
        self.quadrature_degree.unwrap_or(DEFAULT_CELL_DEGREE)
    }

    pub fn edge_degree(&self) -> usize {
        DEFAULT_EDGE_DEGREE
    }

    /// Grain field described by the preset, if it is the grain preset.
    pub fn grain_field(&self) -> Result<Option<GrainField>> {
        let IcPreset::GrainGrowth { mean, amplitude, wavenumber, ramp_width, crystallites } = &self.ic else {
            return Ok(None);
        };
        let default = GrainField::three_grains(self.lx.min(self.ly));
        let crystallites: Vec<Crystallite> = crystallites.clone().unwrap_or(default.crystallites);
        let ramp = ramp_width.unwrap_or(default.ramp_width);
        GrainField::new(*mean, *amplitude, *wavenumber, ramp, crystallites)
            .map(Some)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lx > 0.0 && self.ly > 0.0) {
            return bad(format!("domain must have positive size, got {} x {}", self.lx, self.ly));
        }
        if self.nx == 0 || self.ny == 0 {
            return bad("nx and ny must be positive".into());
        }
        if !(self.eps < 1.0) {
            return bad(format!("eps must be below 1, got {}", self.eps));
        }
        if !(self.alpha >= 1.0) {
            return bad(format!("alpha must be at least 1, got {}", self.alpha));
        }
        if !(self.t_final > 0.0) {
            return bad(format!("t_final must be positive, got {}", self.t_final));
        }
        self.scheme_params()?;
        self.n_steps()?;
        if let Some(d) = self.quadrature_degree {
            if !(4..=crate::quadrature::MAX_DEGREE).contains(&d) {
                return bad(format!("quadrature_degree must lie in 4..={}", crate::quadrature::MAX_DEGREE));
            }
        }
        match &self.ic {
            IcPreset::Custom { coefficients } => {
                let n = (2 * self.nx + 1) * (2 * self.ny + 1);
                if coefficients.len() != n {
                    return bad(format!("custom initial data needs {n} coefficients, got {}", coefficients.len()));
                }
            }
            IcPreset::GrainGrowth { .. } => {
                self.grain_field()?;
            }
            IcPreset::Constant { value } if !value.is_finite() => return bad("constant must be finite".into()),
            _ => {}
        }
        Ok(())
    }

    /// Run directory: relative paths are resolved against `$PFC_OUTPUT_ROOT` when set.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_VAR) {
            Some(root) if self.output_dir.is_relative() => PathBuf::from(root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }
}

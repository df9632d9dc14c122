//! Initial data as smooth fields with analytic gradients and Hessians, as
//! required by the elliptic projection of the initial condition.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fespace::{BasisJet, Mat2};
use crate::forms::SmoothField;
use crate::mesh::Point;

/// `(f, f', f'')` of a one-dimensional factor.
type Jet1 = (f64, f64, f64);

/// Jet of `k · f(x) · g(y)`.
fn separable(k: f64, f: Jet1, g: Jet1) -> BasisJet {
    BasisJet {
        value: k * f.0 * g.0,
        grad: [k * f.1 * g.0, k * f.0 * g.1],
        hess: [[k * f.2 * g.0, k * f.1 * g.1], [k * f.1 * g.1, k * f.0 * g.2]],
    }
}

fn add(a: BasisJet, b: BasisJet) -> BasisJet {
    let mut out = a;
    out.value += b.value;
    for i in 0..2 {
        out.grad[i] += b.grad[i];
        for j in 0..2 {
            out.hess[i][j] += b.hess[i][j];
        }
    }
    out
}

fn cos_jet(w: f64, s: f64) -> Jet1 {
    (s.cos(), -w * s.sin(), -w * w * s.cos())
}

fn sin_jet(w: f64, s: f64) -> Jet1 {
    (s.sin(), w * s.cos(), -w * w * s.sin())
}

/// `cos²(w·u)` where `s = w·u`.
fn cos2_jet(w: f64, s: f64) -> Jet1 {
    (s.cos().powi(2), -w * (2.0 * s).sin(), -2.0 * w * w * (2.0 * s).cos())
}

/// `sin²(w·u)` where `s = w·u`.
fn sin2_jet(w: f64, s: f64) -> Jet1 {
    (s.sin().powi(2), w * (2.0 * s).sin(), 2.0 * w * w * (2.0 * s).cos())
}

/// Benchmark density on `(0, 32)²`:
///
/// ```text
/// φ = 0.07 − 0.02 cos(2π(x−12)/32) sin(2π(y−1)/32)
///          + 0.02 cos²(π(x+10)/32) cos²(π(y+3)/32)
///          − 0.01 sin²(4πx/32) sin²(4π(y−6)/32)
/// ```
pub fn ic_benchmark(p: Point) -> BasisJet {
    let [x, y] = p;
    let a = 2.0 * PI / 32.0;
    let b = PI / 32.0;
    let c = 4.0 * PI / 32.0;
    let mut out = BasisJet { value: 0.07, ..Default::default() };
    out = add(out, separable(-0.02, cos_jet(a, a * (x - 12.0)), sin_jet(a, a * (y - 1.0))));
    out = add(out, separable(0.02, cos2_jet(b, b * (x + 10.0)), cos2_jet(b, b * (y + 3.0))));
    out = add(out, separable(-0.01, sin2_jet(c, c * x), sin2_jet(c, c * (y - 6.0))));
    out
}

/// Exact domain average of [`ic_benchmark`] over `(0, 32)²`.
pub const BENCHMARK_MEAN: f64 = 0.0725;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantField(pub f64);

impl SmoothField for ConstantField {
    fn jet(&self, _p: Point) -> BasisJet {
        BasisJet { value: self.0, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Benchmark;

impl SmoothField for Benchmark {
    fn jet(&self, p: Point) -> BasisJet {
        ic_benchmark(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Crystallite {
    pub center: [f64; 2],
    pub radius: f64,
    /// Lattice rotation in radians.
    pub angle: f64,
}

/// One-mode hexagonal lattice patches in a constant background.
///
/// Inside a patch the field is `φ̄ + A[cos(q x̃) cos(q ỹ/√3) − ½ cos(2q ỹ/√3)]`
/// in patch-rotated coordinates; a quintic smoothstep of width `ramp_width`
/// fades the lattice out towards the patch edge.
#[derive(Debug, Clone, PartialEq)]
pub struct GrainField {
    pub mean: f64,
    pub amplitude: f64,
    pub wavenumber: f64,
    pub ramp_width: f64,
    pub crystallites: Vec<Crystallite>,
}

pub const GRAIN_MEAN: f64 = 0.285;
pub const GRAIN_AMPLITUDE: f64 = 0.446;
/// `√3/2`: the three reciprocal vectors then have the unit length that
/// minimizes the linear part of the energy.
pub const GRAIN_WAVENUMBER: f64 = 0.866_025_403_784_438_6;

impl GrainField {
    pub fn new(
        mean: f64,
        amplitude: f64,
        wavenumber: f64,
        ramp_width: f64,
        crystallites: Vec<Crystallite>,
    ) -> Result<Self> {
        if !(ramp_width > 0.0) {
            return Err(Error::InvalidArgument("ramp width must be positive".into()));
        }
        for (i, a) in crystallites.iter().enumerate() {
            if !(a.radius > 0.0) || ramp_width > a.radius {
                return Err(Error::InvalidArgument(format!(
                    "crystallite {i}: radius {} must be positive and at least the ramp width {ramp_width}",
                    a.radius
                )));
            }
            for (j, b) in crystallites.iter().enumerate().skip(i + 1) {
                let d = (a.center[0] - b.center[0]).hypot(a.center[1] - b.center[1]);
                if d < a.radius + b.radius {
                    return Err(Error::InvalidArgument(format!("crystallites {i} and {j} overlap")));
                }
            }
        }
        Ok(Self { mean, amplitude, wavenumber, ramp_width, crystallites })
    }

    /// Three differently oriented patches laid out in a square of side `l`.
    pub fn three_grains(l: f64) -> Self {
        let radius = 0.1 * l;
        let crystallites = vec![
            Crystallite { center: [0.25 * l, 0.25 * l], radius, angle: 0.0 },
            Crystallite { center: [0.75 * l, 0.4 * l], radius, angle: PI / 9.0 },
            Crystallite { center: [0.4 * l, 0.75 * l], radius, angle: 2.0 * PI / 9.0 },
        ];
        Self::new(GRAIN_MEAN, GRAIN_AMPLITUDE, GRAIN_WAVENUMBER, (0.25 * radius).min(4.0), crystallites)
            .expect("default layout is valid")
    }

    /// Lattice pattern in rotated coordinates, pushed back to physical ones.
    fn pattern(&self, c: &Crystallite, d: [f64; 2]) -> BasisJet {
        let q = self.wavenumber;
        let s = q / 3f64.sqrt();
        let (sn, cs) = c.angle.sin_cos();
        let xt = cs * d[0] + sn * d[1];
        let yt = -sn * d[0] + cs * d[1];
        let (cx, sx) = ((q * xt).cos(), (q * xt).sin());
        let (cy, sy) = ((s * yt).cos(), (s * yt).sin());
        let value = cx * cy - 0.5 * (2.0 * s * yt).cos();
        let g = [-q * sx * cy, -s * cx * sy + s * (2.0 * s * yt).sin()];
        let h: Mat2 = [
            [-q * q * cx * cy, q * s * sx * sy],
            [q * s * sx * sy, -s * s * cx * cy + 2.0 * s * s * (2.0 * s * yt).cos()],
        ];
        // x̃ = R d with R = [[cs, sn], [-sn, cs]]; ∇ = Rᵀ∇̃, ∇² = Rᵀ ∇̃² R.
        let r = [[cs, sn], [-sn, cs]];
        let grad = [r[0][0] * g[0] + r[1][0] * g[1], r[0][1] * g[0] + r[1][1] * g[1]];
        let mut hess = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        acc += r[k][i] * h[k][l] * r[l][j];
                    }
                }
                hess[i][j] = acc;
            }
        }
        BasisJet { value, grad, hess }
    }

    /// Radial blend weight and its jet; `None` outside the patch.
    fn weight(&self, c: &Crystallite, d: [f64; 2]) -> Option<BasisJet> {
        let r = d[0].hypot(d[1]);
        if r >= c.radius {
            return None;
        }
        let inner = c.radius - self.ramp_width;
        if r <= inner {
            return Some(BasisJet { value: 1.0, ..Default::default() });
        }
        let dw = self.ramp_width;
        let t = (c.radius - r) / dw;
        let w = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
        let w_t = 30.0 * t * t * (1.0 - t) * (1.0 - t);
        let w_tt = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
        let w_r = -w_t / dw;
        let w_rr = w_tt / (dw * dw);
        let e = [d[0] / r, d[1] / r];
        let mut hess = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let delta = if i == j { 1.0 } else { 0.0 };
                hess[i][j] = w_rr * e[i] * e[j] + w_r * (delta - e[i] * e[j]) / r;
            }
        }
        Some(BasisJet { value: w, grad: [w_r * e[0], w_r * e[1]], hess })
    }
}

impl SmoothField for GrainField {
    fn jet(&self, p: Point) -> BasisJet {
        let mut out = BasisJet { value: self.mean, ..Default::default() };
        for c in &self.crystallites {
            let d = [p[0] - c.center[0], p[1] - c.center[1]];
            let Some(w) = self.weight(c, d) else { continue };
            let pat = self.pattern(c, d);
            let a = self.amplitude;
            out.value += a * w.value * pat.value;
            for i in 0..2 {
                out.grad[i] += a * (w.value * pat.grad[i] + pat.value * w.grad[i]);
                for j in 0..2 {
                    out.hess[i][j] += a
                        * (w.value * pat.hess[i][j]
                            + w.grad[i] * pat.grad[j]
                            + pat.grad[i] * w.grad[j]
                            + pat.value * w.hess[i][j]);
                }
            }
        }
        out
    }
}

/// Convenience wrapper matching the free-function form of the other presets.
pub fn ic_grain_growth(p: Point, field: &GrainField) -> BasisJet {
    field.jet(p)
}

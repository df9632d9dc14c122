//! Gauss rules on `[0, 1]` and collapsed (Duffy) Gauss rules on the reference
//! triangle `{x, y >= 0, x + y <= 1}`.

use crate::error::{Error, Result};

/// Highest polynomial degree a cell or edge rule is generated for.
pub const MAX_DEGREE: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    /// Reference coordinates: `[t, 0]` for edge rules, `[x, y]` for cell rules.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss rule on `[0, 1]` exact for polynomials of degree `min_degree`.
pub fn edge_quadrature(min_degree: usize) -> Result<QuadRule> {
    if min_degree > MAX_DEGREE {
        return Err(Error::UnsupportedQuadrature(min_degree));
    }
    let n = min_degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    Ok(QuadRule {
        points: x.iter().map(|&t| [0.5 * (t + 1.0), 0.0]).collect(),
        weights: w.iter().map(|&w| 0.5 * w).collect(),
        degree: 2 * n - 1,
    })
}

/// Collapsed Gauss rule on the reference triangle, exact to `min_degree`.
///
/// Uses `x = u`, `y = (1 - u) v` with Jacobian `1 - u`; a degree-`d` integrand
/// becomes degree `d + 1` in `u` and `d` in `v`.
pub fn cell_quadrature(min_degree: usize) -> Result<QuadRule> {
    if min_degree > MAX_DEGREE {
        return Err(Error::UnsupportedQuadrature(min_degree));
    }
    let n = (min_degree + 2).div_ceil(2);
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (xu, wu) in x.iter().zip(&w) {
        let u = 0.5 * (xu + 1.0);
        for (xv, wv) in x.iter().zip(&w) {
            let v = 0.5 * (xv + 1.0);
            points.push([u, (1.0 - u) * v]);
            weights.push(0.25 * wu * wv * (1.0 - u));
        }
    }
    Ok(QuadRule { points, weights, degree: 2 * n - 2 })
}

//! Gauss-Legendre quadrature on the reference interval [0, 1].

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::legendre::legendre_derivs;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// Highest polynomial degree integrated exactly.
    pub exactness: usize,
}

/// `m`-point Gauss-Legendre rule on [0, 1], exact to degree `2m - 1`.
pub fn gauss_rule(m: usize) -> Result<QuadratureRule> {
    if m == 0 {
        return invalid("a Gauss rule needs at least one point");
    }
    let mut points = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        // Newton iteration from the usual Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let p = legendre_derivs(m, x)[m];
            let dx = p[0] / p[1];
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let dp = legendre_derivs(m, x)[m][1];
        let w = 1.0 / ((1.0 - x * x) * dp * dp);
        // map from [-1, 1] to [0, 1]; Newton from cos(..) yields descending roots
        points[i] = 0.5 * (1.0 - x);
        points[m - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        points[m / 2] = 0.5;
    }
    Ok(QuadratureRule {
        points,
        weights,
        exactness: 2 * m - 1,
    })
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Physical points and weights on `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = b - a;
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (a + h * t, h * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

//! Model problems `-u'' = f` with homogeneous Dirichlet data: smooth
//! manufactured solutions and point sources `c₀ δ_x̄ + c₁ δ'_x̄` tested
//! against the averaging reconstruction.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::dgspace::{project_l2, Broken, Combination, DgFunction, DgSpace};
use crate::error::{invalid, Error, Result};
use crate::forms::{assemble_ip, assemble_ip_banded, norms_of, norms_of_scaled, PenaltyParams};
use crate::mesh::Mesh1D;
use crate::reconstruct::{AveragingOperator, C1Space};

/// Quadrature boost used for loads and error norms.
const BOOST: usize = 6;

/// `[u, u', u'']` at a point.
pub type SmoothFn = Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

#[derive(Clone)]
pub enum ProblemSpec {
    /// Manufactured solution `u`; the load is `-u''`.
    Smooth { name: String, u: SmoothFn },
    /// `f = c₀ δ_x̄ + c₁ δ'_x̄`.
    PointSource { xbar: f64, c0: f64, c1: f64 },
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Smooth { name, .. } => f.debug_struct("Smooth").field("name", name).finish(),
            Self::PointSource { xbar, c0, c1 } => f
                .debug_struct("PointSource")
                .field("xbar", xbar)
                .field("c0", c0)
                .field("c1", c1)
                .finish(),
        }
    }
}

impl ProblemSpec {
    /// `u = sin(π (x - a) / L)` on `(a, b)`.
    pub fn sine(domain: (f64, f64)) -> Self {
        let (a, b) = domain;
        let w = PI / (b - a);
        Self::Smooth {
            name: "sine".into(),
            u: Arc::new(move |x| {
                let t = w * (x - a);
                [t.sin(), w * t.cos(), -w * w * t.sin()]
            }),
        }
    }

    pub fn point_source(xbar: f64, c0: f64, c1: f64) -> Self {
        Self::PointSource { xbar, c0, c1 }
    }

    /// Unit Dirac mass at `x̄`.
    pub fn delta(xbar: f64) -> Self {
        Self::point_source(xbar, 1.0, 0.0)
    }

    /// Unit Dirac derivative at `x̄`.
    pub fn delta_prime(xbar: f64) -> Self {
        Self::point_source(xbar, 0.0, 1.0)
    }
}

/// Closed-form solution, smooth away from its breakpoints.
#[derive(Clone)]
pub struct ExactSolution {
    breakpoints: Vec<f64>,
    f: SmoothFn,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactSolution")
            .field("breakpoints", &self.breakpoints)
            .finish_non_exhaustive()
    }
}

impl ExactSolution {
    /// `r`-th derivative at `x`; at a breakpoint the left piece is used.
    pub fn eval(&self, x: f64, r: usize) -> f64 {
        (self.f)(x)[r]
    }

    /// One-sided limits `(left, right)` of the `r`-th derivative.
    pub fn one_sided(&self, x: f64, r: usize) -> (f64, f64) {
        let eps = 1e-13 * (1.0 + x.abs());
        if self.breakpoints.iter().any(|b| (b - x).abs() < eps) {
            (self.eval(x, r), (self.f)(x + eps)[r])
        } else {
            let v = self.eval(x, r);
            (v, v)
        }
    }
}

impl Broken for ExactSolution {
    fn eval_on(&self, _e: usize, x: f64, r: usize) -> f64 {
        self.eval(x, r)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

/// For a point source: `c₀ G(·, x̄) - c₁ ∂_y G(·, y)|_{y = x̄}` with the
/// Dirichlet Green's function `G` of `-d²/dx²` on `domain`.
pub fn exact_solution(spec: &ProblemSpec, domain: (f64, f64)) -> ExactSolution {
    match spec {
        ProblemSpec::Smooth { u, .. } => ExactSolution {
            breakpoints: Vec::new(),
            f: u.clone(),
        },
        &ProblemSpec::PointSource { xbar, c0, c1 } => {
            let (a, b) = domain;
            let l = b - a;
            ExactSolution {
                breakpoints: vec![xbar],
                f: Arc::new(move |x| {
                    if x <= xbar {
                        let slope = (c0 * (b - xbar) + c1) / l;
                        [slope * (x - a), slope, 0.0]
                    } else {
                        let slope = (-c0 * (xbar - a) + c1) / l;
                        [slope * (x - b), slope, 0.0]
                    }
                }),
            }
        }
    }
}

fn check_off_skeleton(mesh: &Mesh1D, xbar: f64) -> Result<()> {
    let (a, b) = mesh.domain();
    if !(xbar > a && xbar < b) {
        return invalid(format!("source location {xbar} must lie inside ({a}, {b})"));
    }
    let loc = mesh.locate(xbar)?;
    if loc.vertex_distance <= 1e-12 * mesh.length() {
        return Err(Error::SkeletonCollision {
            x: xbar,
            vertex: loc.nearest_vertex,
            distance: loc.vertex_distance,
        });
    }
    Ok(())
}

/// `ℓ(φ_i) = c₀ E²(φ_i)(x̄) - c₁ E²(φ_i)'(x̄)`.
pub fn point_source_load(space: &DgSpace, c1space: &C1Space, xbar: f64, c0: f64, c1: f64) -> Result<DVector<f64>> {
    check_off_skeleton(space.mesh(), xbar)?;
    let e2 = AveragingOperator::new(space, c1space)?;
    let e = space.mesh().locate(xbar)?.element;
    let psi = c1space.local_basis_at(e, xbar);
    let mut w = DVector::zeros(c1space.dim());
    for (a, g) in c1space.element_dofs(e).iter().enumerate() {
        if let Some(g) = g {
            w[*g] += c0 * psi[a][0] - c1 * psi[a][1];
        }
    }
    Ok(e2.matrix().tr_mul_vec(&w))
}

/// A computed approximation with the time spent in assembly and solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u_h: DgFunction,
    pub solve_seconds: f64,
}

pub fn solve(spec: &ProblemSpec, mesh: &Mesh1D, k: usize, params: PenaltyParams) -> Result<Solution> {
    let start = Instant::now();
    let space = DgSpace::new(mesh.clone(), k)?;
    let rhs = match spec {
        ProblemSpec::Smooth { u, .. } => {
            let u = u.clone();
            project_l2(move |x| -u(x)[2], &space, BOOST, &[]).into_coeffs()
        }
        &ProblemSpec::PointSource { xbar, c0, c1 } => {
            check_off_skeleton(mesh, xbar)?;
            if k == 0 {
                return invalid("point sources need k >= 1");
            }
            point_source_load(&space, &C1Space::new(mesh.clone(), k)?, xbar, c0, c1)?
        }
    };
    let factor = assemble_ip_banded(&space, params).cholesky().map_err(|_| {
        // only reached on failure, so the dense eigenvalue problem is affordable
        let lambda_min = assemble_ip(&space, params)
            .coercivity_constant()
            .unwrap_or(f64::NAN);
        Error::CoercivityFailure {
            sigma0: params.sigma0,
            lambda_min,
        }
    })?;
    let coeffs = factor.solve(&rhs);
    Ok(Solution {
        u_h: space.function(coeffs)?,
        solve_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Errors of one approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub n_elements: usize,
    pub h_min: f64,
    pub h_max: f64,
    pub dofs: usize,
    pub err_znorm: f64,
    pub err_enorm: f64,
    pub err_eenorm: f64,
    pub err_l2: f64,
    /// `znorm(e) + enorm(h e) + eenorm(h² e)`.
    pub err_scaled: f64,
    pub solve_seconds: f64,
}

pub fn measure_errors(u_h: &DgFunction, exact: &ExactSolution) -> ErrorRecord {
    let space = u_h.space();
    let mesh = space.mesh();
    let e = Combination::difference(exact, u_h);
    let n0 = norms_of(&e, space, BOOST);
    let n1 = norms_of_scaled(&e, space, 1, BOOST);
    let n2 = norms_of_scaled(&e, space, 2, BOOST);
    ErrorRecord {
        n_elements: mesh.num_elements(),
        h_min: mesh.h_min(),
        h_max: mesh.h_max(),
        dofs: space.total_dofs(),
        err_znorm: n0.znorm,
        err_enorm: n0.enorm,
        err_eenorm: n0.eenorm,
        err_l2: n0.l2,
        err_scaled: n0.znorm + n1.enorm + n2.eenorm,
        solve_seconds: 0.0,
    }
}

/// Solves and measures on uniform meshes with `counts` elements; levels
/// run in parallel and come back in input order.
pub fn convergence_study(
    spec: &ProblemSpec,
    counts: &[usize],
    domain: (f64, f64),
    k: usize,
    params: PenaltyParams,
) -> Result<Vec<ErrorRecord>> {
    let exact = exact_solution(spec, domain);
    counts
        .par_iter()
        .map(|&n| {
            let mesh = Mesh1D::uniform(n, domain)?;
            let sol = solve(spec, &mesh, k, params)?;
            Ok(ErrorRecord {
                solve_seconds: sol.solve_seconds,
                ..measure_errors(&sol.u_h, &exact)
            })
        })
        .collect()
}

//! Interior penalty bilinear form and the mesh-dependent norms.
//!
//! Faces are points in 1D, so every face integral is a point evaluation at a
//! vertex. With `[.]`/`{.}` the jump/average at a node and `h_e` the node
//! size, for `u, v` in the broken space:
//!
//! ```text
//! A_h(u, v) = Σ_K ∫ u'v' - Σ_all ([u]{v'} + [v]{u'}) + Σ_all σ₀/h_e [u][v]
//!             + Σ_interior σ₁ h_e [u'][v']
//! |||w|||₀² = ‖w‖² + Σ_all h_e³ {w'}² + Σ_all h_e [w]²
//! |||w|||₁² = Σ_K ‖w'‖² + Σ_all h_e⁻¹ [w]²
//! |||w|||₂² = Σ_K ‖w''‖² + Σ_interior h_e⁻¹ [w']² + Σ_all h_e⁻³ [w]²
//! ```
//!
//! Matrices follow the convention `A[(i, j)] = A_h(phi_j, phi_i)`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dgspace::{trace_of, Broken, DgFunction, DgSpace};
use crate::error::{invalid, Error, Result};
use crate::linalg::{pencil_eigenvalues, write_matrix_market, BandedSym, MatrixSink};
use crate::mesh::NodeKind;
use crate::quadrature::{gauss_rule, QuadratureRule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct PenaltyParams {
    pub sigma0: f64,
    pub sigma1: f64,
}

impl PenaltyParams {
    pub fn new(sigma0: f64, sigma1: f64) -> Result<Self> {
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return invalid(format!("sigma0 must be positive, got {sigma0}"));
        }
        if !(sigma1 >= 0.0 && sigma1.is_finite()) {
            return invalid(format!("sigma1 must be nonnegative, got {sigma1}"));
        }
        Ok(Self { sigma0, sigma1 })
    }

    /// `σ₀ = 10 k²`, `σ₁ = 1`.
    pub fn default_for(degree: usize) -> Self {
        let k = degree.max(1) as f64;
        Self {
            sigma0: 10.0 * k * k,
            sigma1: 1.0,
        }
    }
}

/// Trace functionals of one basis function at one node.
#[derive(Debug, Clone, Copy)]
struct NodeTrace {
    dof: usize,
    jump: f64,
    avg: f64,
    grad_jump: f64,
    grad_avg: f64,
}

fn node_traces(space: &DgSpace, node: usize) -> Vec<NodeTrace> {
    let mesh = space.mesh();
    let nd = mesh.node(node);
    let x = mesh.vertices()[node];
    let mut out = Vec::with_capacity(2 * space.dofs_per_element());
    let interior = nd.kind == NodeKind::Interior;
    let mut push = |e: usize, sign: f64| {
        for (j, b) in space.basis_at(e, x).iter().enumerate() {
            let (avg, grad_avg) = if interior {
                (0.5 * b[0], 0.5 * b[1])
            } else {
                (b[0], b[1])
            };
            out.push(NodeTrace {
                dof: space.dof(e, j),
                jump: sign * b[0],
                avg,
                grad_jump: sign * b[1],
                grad_avg,
            });
        }
    };
    if let Some(e) = nd.left {
        push(e, 1.0);
    }
    if let Some(e) = nd.right {
        push(e, -1.0);
    }
    out
}

/// Which algebraic rewriting of `A_h` to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Gradient form with symmetric consistency terms.
    Primal,
    /// Element-wise integrated by parts: `-Δ_h u v` plus `[u']{v}` terms.
    IntegratedByParts,
}

/// Scatters `A_h` on `space` into `sink` using the selected route.
pub fn assemble_ip_into(
    space: &DgSpace,
    params: PenaltyParams,
    route: Route,
    rule: &QuadratureRule,
    sink: &mut impl MatrixSink,
) {
    let mesh = space.mesh();
    let nloc = space.dofs_per_element();
    for e in 0..mesh.num_elements() {
        let (l, r) = mesh.element(e);
        let mut local = DMatrix::<f64>::zeros(nloc, nloc);
        for (x, w) in rule.mapped(l, r) {
            let b = space.basis_at(e, x);
            for i in 0..nloc {
                for j in 0..nloc {
                    local[(i, j)] += match route {
                        Route::Primal => w * b[j][1] * b[i][1],
                        Route::IntegratedByParts => -w * b[j][2] * b[i][0],
                    };
                }
            }
        }
        for i in 0..nloc {
            for j in 0..nloc {
                sink.add(space.dof(e, i), space.dof(e, j), local[(i, j)]);
            }
        }
    }
    for node in mesh.nodes() {
        let he = node.h_e;
        let interior = node.kind == NodeKind::Interior;
        let tr = node_traces(space, node.index);
        for ti in &tr {
            for tj in &tr {
                // trial tj, test ti
                let mut v = -tj.jump * ti.grad_avg + params.sigma0 / he * tj.jump * ti.jump;
                match route {
                    Route::Primal => v -= ti.jump * tj.grad_avg,
                    Route::IntegratedByParts if interior => v += tj.grad_jump * ti.avg,
                    Route::IntegratedByParts => {}
                }
                if interior {
                    v += params.sigma1 * he * tj.grad_jump * ti.grad_jump;
                }
                sink.add(ti.dof, tj.dof, v);
            }
        }
    }
}

/// Mesh-dependent norm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    /// L²-like norm `|||.|||₀`.
    Zero,
    /// H¹-like norm `|||.|||₁`.
    One,
    /// H²-like norm `|||.|||₂`.
    Two,
}

fn assemble_norm_into(space: &DgSpace, norm: Norm, rule: &QuadratureRule, m: &mut DMatrix<f64>) {
    let mesh = space.mesh();
    let nloc = space.dofs_per_element();
    let order = match norm {
        Norm::Zero => 0,
        Norm::One => 1,
        Norm::Two => 2,
    };
    for e in 0..mesh.num_elements() {
        let (l, r) = mesh.element(e);
        for (x, w) in rule.mapped(l, r) {
            let b = space.basis_at(e, x);
            for i in 0..nloc {
                for j in 0..nloc {
                    m[(space.dof(e, i), space.dof(e, j))] += w * b[i][order] * b[j][order];
                }
            }
        }
    }
    for node in mesh.nodes() {
        let he = node.h_e;
        let interior = node.kind == NodeKind::Interior;
        let tr = node_traces(space, node.index);
        for ti in &tr {
            for tj in &tr {
                let v = match norm {
                    Norm::Zero => he.powi(3) * ti.grad_avg * tj.grad_avg + he * ti.jump * tj.jump,
                    Norm::One => ti.jump * tj.jump / he,
                    Norm::Two => {
                        let g = if interior {
                            ti.grad_jump * tj.grad_jump / he
                        } else {
                            0.0
                        };
                        g + ti.jump * tj.jump / he.powi(3)
                    }
                };
                m[(ti.dof, tj.dof)] += v;
            }
        }
    }
}

/// Gram matrices `(M0, M1, M2)` of the three mesh-dependent norms.
pub fn assemble_norm_grams(space: &DgSpace) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = space.total_dofs();
    let rule = space.default_rule();
    let [m0, m1, m2] = [Norm::Zero, Norm::One, Norm::Two].map(|norm| {
        let mut m = DMatrix::zeros(n, n);
        assemble_norm_into(space, norm, &rule, &mut m);
        m
    });
    (m0, m1, m2)
}

/// Gram matrix of the broken `H^r` seminorm, `Σ_K ∫ phi_i^(r) phi_j^(r)`.
pub fn broken_seminorm_gram(space: &DgSpace, r: usize) -> DMatrix<f64> {
    assert!(r <= 2);
    let n = space.total_dofs();
    let nloc = space.dofs_per_element();
    let rule = space.default_rule();
    let mut m = DMatrix::zeros(n, n);
    for e in 0..space.mesh().num_elements() {
        let (l, rr) = space.mesh().element(e);
        for (x, w) in rule.mapped(l, rr) {
            let b = space.basis_at(e, x);
            for i in 0..nloc {
                for j in 0..nloc {
                    m[(space.dof(e, i), space.dof(e, j))] += w * b[i][r] * b[j][r];
                }
            }
        }
    }
    m
}

/// IP matrices from both routes plus the norm Gram matrices.
#[derive(Debug, Clone)]
pub struct AssembledForms {
    pub space: DgSpace,
    pub params: PenaltyParams,
    pub quadrature: QuadratureRule,
    pub a_primal: DMatrix<f64>,
    pub a_ibp: DMatrix<f64>,
    pub m0: DMatrix<f64>,
    pub m1: DMatrix<f64>,
    pub m2: DMatrix<f64>,
}

pub fn assemble_ip(space: &DgSpace, params: PenaltyParams) -> AssembledForms {
    let n = space.total_dofs();
    let rule = space.default_rule();
    let mut a_primal = DMatrix::zeros(n, n);
    let mut a_ibp = DMatrix::zeros(n, n);
    assemble_ip_into(space, params, Route::Primal, &rule, &mut a_primal);
    assemble_ip_into(space, params, Route::IntegratedByParts, &rule, &mut a_ibp);
    let (m0, m1, m2) = assemble_norm_grams(space);
    AssembledForms {
        space: space.clone(),
        params,
        quadrature: rule,
        a_primal,
        a_ibp,
        m0,
        m1,
        m2,
    }
}

/// `A_h` in symmetric band storage, for direct solves on large meshes.
pub fn assemble_ip_banded(space: &DgSpace, params: PenaltyParams) -> BandedSym {
    let bw = 2 * space.dofs_per_element() - 1;
    let mut a = BandedSym::zeros(space.total_dofs(), bw);
    assemble_ip_into(space, params, Route::Primal, &space.default_rule(), &mut a);
    a
}

impl AssembledForms {
    /// `A_h(u, v)`.
    pub fn a_h(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.a_primal * u))
    }

    pub fn gram(&self, norm: Norm) -> &DMatrix<f64> {
        match norm {
            Norm::Zero => &self.m0,
            Norm::One => &self.m1,
            Norm::Two => &self.m2,
        }
    }

    pub fn norm_of(&self, norm: Norm, u: &DVector<f64>) -> f64 {
        u.dot(&(self.gram(norm) * u)).max(0.0).sqrt()
    }

    /// Largest entrywise difference between the two assembly routes.
    pub fn route_discrepancy(&self) -> f64 {
        (&self.a_primal - &self.a_ibp).amax()
    }

    /// Smallest eigenvalue of the pencil `(sym A, M1)`.
    pub fn coercivity_constant(&self) -> Result<f64> {
        Ok(pencil_eigenvalues(&self.a_primal, &self.m1)?[0])
    }

    /// Writes all five matrices as MatrixMarket files into `dir`.
    pub fn dump_matrix_market(&self, dir: &Path, prefix: &str) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, m) in [
            ("a_primal", &self.a_primal),
            ("a_ibp", &self.a_ibp),
            ("m0", &self.m0),
            ("m1", &self.m1),
            ("m2", &self.m2),
        ] {
            let f = std::fs::File::create(dir.join(format!("{prefix}{name}.mtx")))?;
            write_matrix_market(m, std::io::BufWriter::new(f))?;
        }
        Ok(())
    }
}

/// Certifies `A_h(v, v) >= λ_min |||v|||₁²` with `λ_min > 0`.
pub fn check_coercivity(forms: &AssembledForms) -> Result<f64> {
    let lambda_min = forms.coercivity_constant()?;
    if lambda_min > 0.0 {
        Ok(lambda_min)
    } else {
        Err(Error::CoercivityFailure {
            sigma0: forms.params.sigma0,
            lambda_min,
        })
    }
}

/// The three mesh-dependent norms of a broken function, plus its L² norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormTriple {
    pub znorm: f64,
    pub enorm: f64,
    pub eenorm: f64,
    pub l2: f64,
    /// Set when bisecting the quadrature cells changes the element
    /// integrals noticeably, which points at an undeclared kink or jump.
    pub quadrature_warning: bool,
}

/// Norms of `f` on the mesh of `space`; see [`norms_of_scaled`].
pub fn norms_of(f: &dyn Broken, space: &DgSpace, boost: usize) -> NormTriple {
    norms_of_scaled(f, space, 0, boost)
}

/// Norms of `h^p f`, with `h` the piecewise constant meshsize function
/// (`h_K` inside elements, `h_e` at nodes). Element integrals use
/// `k + 3 + boost` Gauss points per cell, cells split at `f`'s breakpoints.
pub fn norms_of_scaled(f: &dyn Broken, space: &DgSpace, power: i32, boost: usize) -> NormTriple {
    let mesh = space.mesh();
    let rule = gauss_rule(space.degree() + 3 + boost).expect("positive point count");
    let bps = f.breakpoints();
    let mut vol = [0.0f64; 3];
    let mut check = [0.0f64; 2];
    for e in 0..mesh.num_elements() {
        let s = mesh.element_size(e).powi(power);
        let s2 = s * s;
        for (a, b) in space.cells(e, &bps) {
            for (x, w) in rule.mapped(a, b) {
                for (r, acc) in vol.iter_mut().enumerate() {
                    *acc += w * s2 * f.eval_on(e, x, r).powi(2);
                }
            }
            let mid = 0.5 * (a + b);
            for (c0, c1) in [(a, mid), (mid, b)] {
                for (x, w) in rule.mapped(c0, c1) {
                    for (r, acc) in check.iter_mut().enumerate() {
                        *acc += w * s2 * f.eval_on(e, x, r).powi(2);
                    }
                }
            }
        }
    }
    let floor = 1e-24 * mesh.length();
    let quadrature_warning = (0..2).any(|r| (vol[r] - check[r]).abs() > 1e-6 * vol[r].abs() + floor);

    let (mut z, mut one, mut two) = (vol[0], vol[1], vol[2]);
    for node in mesh.nodes() {
        let he = node.h_e;
        let s2 = he.powi(2 * power);
        let t = trace_of(f, mesh, node.index);
        z += s2 * (he.powi(3) * t.grad_average.powi(2) + he * t.jump.powi(2));
        one += s2 * t.jump.powi(2) / he;
        two += s2 * t.jump.powi(2) / he.powi(3);
        if node.kind == NodeKind::Interior {
            two += s2 * t.grad_jump.powi(2) / he;
        }
    }
    NormTriple {
        znorm: z.sqrt(),
        enorm: one.sqrt(),
        eenorm: two.sqrt(),
        l2: vol[0].sqrt(),
        quadrature_warning,
    }
}

/// `b_i = ∫ f phi_i` with `k + 3 + boost` Gauss points per element.
pub fn load_vector_smooth(f: impl Fn(f64) -> f64, space: &DgSpace, boost: usize) -> DVector<f64> {
    crate::dgspace::project_l2(f, space, boost, &[]).into_coeffs()
}

/// Convenience: norms of a DG function via its Gram matrices.
pub fn gram_norms(forms: &AssembledForms, u: &DgFunction) -> (f64, f64, f64) {
    let c = u.coeffs();
    (
        forms.norm_of(Norm::Zero, c),
        forms.norm_of(Norm::One, c),
        forms.norm_of(Norm::Two, c),
    )
}

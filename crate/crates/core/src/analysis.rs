//! Discrete inf-sup constants, the proof-construction check, Ritz stability
//! experiments and experimental orders of convergence.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::dgspace::{DgFunction, DgSpace};
use crate::error::{invalid, Error, Result};
use crate::forms::{assemble_ip, AssembledForms, PenaltyParams};
use crate::linalg::{cholesky_spd, lower_solve, symmetrize};
use crate::mesh::Mesh1D;
use crate::reconstruct::{operator_matrices, C1Space, OperatorMatrices};

pub const DEFAULT_RANK_CUTOFF: f64 = 1e-10;

fn require_k2(k: usize) -> Result<()> {
    if k < 2 {
        return invalid(format!(
            "k = {k}: the inf-sup theory assumes polynomial degree k >= 2"
        ));
    }
    Ok(())
}

/// Extreme whitened singular values of a bilinear form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfSup {
    /// `σ_min`, or 0 when the test space is smaller than the trial space.
    pub gamma: f64,
    /// `σ_max`, the continuity constant in the same norm pair.
    pub sigma_max: f64,
    pub trial_dim: usize,
    pub test_dim: usize,
}

/// `inf_w sup_v a(w, v) / (|v|_test |w|_trial)` for `a` stored with test
/// functions along rows, via the singular values of `L_test⁻¹ a L_trial⁻ᵀ`.
pub fn infsup_constant(a: &DMatrix<f64>, m_trial: &DMatrix<f64>, m_test: &DMatrix<f64>) -> Result<InfSup> {
    let (test_dim, trial_dim) = a.shape();
    if m_trial.shape() != (trial_dim, trial_dim) || m_test.shape() != (test_dim, test_dim) {
        return invalid(format!(
            "form is {test_dim}x{trial_dim} but Grams are {:?} (trial) and {:?} (test)",
            m_trial.shape(),
            m_test.shape()
        ));
    }
    let l_test = cholesky_spd(m_test, "test Gram")?.unpack();
    let l_trial = cholesky_spd(m_trial, "trial Gram")?.unpack();
    let x = lower_solve(&l_test, a);
    let bt = lower_solve(&l_trial, &x.transpose());
    let sv = bt.singular_values();
    let sigma_max = sv.max();
    let gamma = if test_dim < trial_dim { 0.0 } else { sv.min().max(0.0) };
    Ok(InfSup {
        gamma,
        sigma_max,
        trial_dim,
        test_dim,
    })
}

/// Which argument of `A_h` carries the supremum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    /// Sup over the second argument of the form.
    AsDisplayed,
    /// Sup over the first argument.
    Swapped,
}

/// Reduced orthonormal basis of `W(h) = V_h + S` in the znorm.
#[derive(Debug, Clone)]
pub struct WhSpace {
    /// `big` coordinates of the merged generating set `[V_h basis, S basis]`.
    pub merged: DMatrix<f64>,
    /// znorm Gram of the merged set.
    pub gram: DMatrix<f64>,
    /// Reduced basis in merged coordinates, one column per basis function.
    pub basis: DMatrix<f64>,
    pub cutoff: f64,
    pub effective_dim: usize,
    /// Eigenvalues of the Jacobi-scaled Gram, descending.
    pub eigenvalues: Vec<f64>,
}

impl WhSpace {
    pub fn from_operators(ops: &OperatorMatrices, cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0 && cutoff < 1.0) {
            return invalid(format!("rank cutoff {cutoff} must lie in (0, 1)"));
        }
        let (nb, nv, ns) = (ops.big.total_dofs(), ops.space.total_dofs(), ops.c1.dim());
        let mut merged = DMatrix::zeros(nb, nv + ns);
        merged.columns_mut(0, nv).copy_from(&ops.embed_v);
        merged.columns_mut(nv, ns).copy_from(&ops.embed_s);
        let gram = symmetrize(&(merged.transpose() * &ops.big_forms.m0 * &merged));
        let d = DVector::from_iterator(gram.nrows(), gram.diagonal().iter().map(|g| 1.0 / g.sqrt()));
        let scaled = DMatrix::from_fn(gram.nrows(), gram.ncols(), |i, j| d[i] * gram[(i, j)] * d[j]);
        let eig = SymmetricEigen::new(scaled);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let lmax = eigenvalues[0];
        let keep: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&i| eig.eigenvalues[i] > cutoff * lmax)
            .collect();
        let mut basis = DMatrix::zeros(nv + ns, keep.len());
        for (c, &i) in keep.iter().enumerate() {
            let s = 1.0 / eig.eigenvalues[i].sqrt();
            for r in 0..nv + ns {
                basis[(r, c)] = d[r] * eig.eigenvectors[(r, i)] * s;
            }
        }
        Ok(Self {
            merged,
            gram,
            effective_dim: keep.len(),
            basis,
            cutoff,
            eigenvalues,
        })
    }

    /// `Qᵀ G Q`; the identity up to rounding.
    pub fn reduced_gram(&self) -> DMatrix<f64> {
        self.basis.transpose() * &self.gram * &self.basis
    }
}

/// `W(h)` for `space + c1` with the given relative rank cutoff.
pub fn build_wh_space(space: &DgSpace, c1: &C1Space, cutoff: f64) -> Result<WhSpace> {
    let ops = operator_matrices(space, c1, PenaltyParams::default_for(space.degree()))?;
    WhSpace::from_operators(&ops, cutoff)
}

/// Inf-sup over `V_h`: trial in znorm, test in eenorm.
pub fn infsup_v(forms: &AssembledForms, orientation: Orientation) -> Result<InfSup> {
    require_k2(forms.space.degree())?;
    match orientation {
        Orientation::AsDisplayed => infsup_constant(&forms.a_primal, &forms.m0, &forms.m2),
        Orientation::Swapped => infsup_constant(&forms.a_primal.transpose(), &forms.m2, &forms.m0),
    }
}

/// Inf-sup over `V_h × W(h)`: trial `V_h` in eenorm, test `W(h)` in znorm.
pub fn infsup_w(ops: &OperatorMatrices, wh: &WhSpace, orientation: Orientation) -> Result<InfSup> {
    require_k2(ops.space.degree())?;
    let nv = ops.space.total_dofs();
    let mut stacked = DMatrix::zeros(wh.merged.ncols(), nv);
    stacked.rows_mut(0, nv).copy_from(&ops.a_vv);
    stacked.rows_mut(nv, ops.c1.dim()).copy_from(&ops.a_sv);
    let reduced = wh.basis.transpose() * stacked;
    let m2_v = symmetrize(&(ops.embed_v.transpose() * &ops.big_forms.m2 * &ops.embed_v));
    let id = DMatrix::identity(wh.effective_dim, wh.effective_dim);
    match orientation {
        Orientation::AsDisplayed => infsup_constant(&reduced, &m2_v, &id),
        Orientation::Swapped => infsup_constant(&reduced.transpose(), &id, &m2_v),
    }
}

/// Everything the per-level experiments need.
#[derive(Debug, Clone)]
pub struct LevelContext {
    pub forms: AssembledForms,
    pub ops: OperatorMatrices,
}

impl LevelContext {
    pub fn new(mesh: Mesh1D, k: usize, params: PenaltyParams) -> Result<Self> {
        require_k2(k)?;
        let space = DgSpace::new(mesh.clone(), k)?;
        let c1 = C1Space::new(mesh, k)?;
        Ok(Self {
            forms: assemble_ip(&space, params),
            ops: operator_matrices(&space, &c1, params)?,
        })
    }

    pub fn space(&self) -> &DgSpace {
        &self.forms.space
    }

    pub fn mesh(&self) -> &Mesh1D {
        self.forms.space.mesh()
    }
}

/// One row of an inf-sup sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfSupLevel {
    pub n_elements: usize,
    pub h_max: f64,
    #[serde(rename = "gamma_V")]
    pub gamma_v: f64,
    #[serde(rename = "gamma_W")]
    pub gamma_w: f64,
    pub lambda_coercivity: f64,
    pub sigma_max_continuity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfSupReport {
    pub k: usize,
    pub sigma0: f64,
    pub sigma1: f64,
    pub pairing_v: &'static str,
    pub pairing_w: &'static str,
    pub levels: Vec<InfSupLevel>,
}

impl InfSupReport {
    pub fn gamma_ratio(&self, pick: impl Fn(&InfSupLevel) -> f64) -> f64 {
        let g: Vec<f64> = self.levels.iter().map(pick).collect();
        max_over_min(&g)
    }
}

pub fn infsup_level(mesh: Mesh1D, k: usize, params: PenaltyParams) -> Result<InfSupLevel> {
    let ctx = LevelContext::new(mesh, k, params)?;
    let v = infsup_v(&ctx.forms, Orientation::AsDisplayed)?;
    let wh = WhSpace::from_operators(&ctx.ops, DEFAULT_RANK_CUTOFF)?;
    let w = infsup_w(&ctx.ops, &wh, Orientation::AsDisplayed)?;
    Ok(InfSupLevel {
        n_elements: ctx.mesh().num_elements(),
        h_max: ctx.mesh().h_max(),
        gamma_v: v.gamma,
        gamma_w: w.gamma,
        lambda_coercivity: ctx.forms.coercivity_constant()?,
        sigma_max_continuity: v.sigma_max,
    })
}

/// Inf-sup constants on uniform meshes of `domain`, levels in parallel.
pub fn infsup_sweep(counts: &[usize], domain: (f64, f64), k: usize, params: PenaltyParams) -> Result<InfSupReport> {
    require_k2(k)?;
    let levels = counts
        .par_iter()
        .map(|&n| infsup_level(Mesh1D::uniform(n, domain)?, k, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(InfSupReport {
        k,
        sigma0: params.sigma0,
        sigma1: params.sigma1,
        pairing_v: "trial V_h in znorm, test V_h in eenorm",
        pairing_w: "trial V_h in eenorm, test W(h) in znorm",
        levels,
    })
}

/// Ratios from the inf-sup proof over `W(h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProofRatios {
    /// `A_h(w, ṽ) / (h_min² eenorm(w)²)`.
    pub lower: f64,
    /// `‖ṽ‖ / (h_max² eenorm(w))`.
    pub upper: f64,
}

/// `α = 1 / max(σ₀², σ₁²)`.
pub fn default_alpha(params: PenaltyParams) -> f64 {
    1.0 / params.sigma0.powi(2).max(params.sigma1.powi(2))
}

/// Builds `ṽ = w - R w - α h² Δ_h w` and returns the two proof ratios.
pub fn proof_construction_check(w: &DgFunction, ops: &OperatorMatrices, alpha: Option<f64>) -> Result<ProofRatios> {
    require_k2(ops.space.degree())?;
    if w.space() != &ops.space {
        return invalid("w_h does not belong to the operators' broken space");
    }
    let alpha = alpha.unwrap_or_else(|| default_alpha(ops.big_forms.params));
    let c = w.coeffs();
    let wb = &ops.embed_v * c;
    let ee2 = wb.dot(&(&ops.big_forms.m2 * &wb));
    if !(ee2 > 0.0) {
        return invalid("eenorm(w_h) vanishes");
    }
    let mesh = ops.space.mesh();
    let nloc = ops.space.dofs_per_element();
    let mut lap = w.broken_laplacian().into_coeffs();
    for e in 0..mesh.num_elements() {
        let h2 = mesh.element_size(e).powi(2);
        lap.rows_mut(e * nloc, nloc).iter_mut().for_each(|v| *v *= h2);
    }
    let v1 = c - lap * alpha;
    let rw = &ops.ritz * c;
    let a_w_v = v1.dot(&(&ops.a_vv * c)) - rw.dot(&(&ops.a_sv * c));
    let v_tilde = ops.lift(&v1, &rw);
    Ok(ProofRatios {
        lower: a_w_v / (mesh.h_min().powi(2) * ee2),
        upper: v_tilde.norm() / (mesh.h_max().powi(2) * ee2.sqrt()),
    })
}

/// `A_h`-orthogonal projection of `ŵ ∈ S` (given by its dofs) into `V_h`.
pub fn ritz_projection(ops: &OperatorMatrices, s: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = coercive_factor(ops)?;
    Ok(chol.solve(&(ops.a_sv.transpose() * s)))
}

fn coercive_factor(ops: &OperatorMatrices) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    cholesky_spd(&ops.a_vv, "A_h on V_h").map_err(|_| Error::CoercivityFailure {
        sigma0: ops.big_forms.params.sigma0,
        lambda_min: SymmetricEigen::new(symmetrize(&ops.a_vv)).eigenvalues.min(),
    })
}

/// `max ‖R_proj ŵ‖ / ‖ŵ‖` over the samples (dofs of `S`).
pub fn ritz_projection_stability(samples: &[DVector<f64>], ops: &OperatorMatrices) -> Result<f64> {
    let chol = coercive_factor(ops)?;
    let mut worst: f64 = 0.0;
    for s in samples {
        let c = chol.solve(&(ops.a_sv.transpose() * s));
        let den = (&ops.embed_s * s).norm();
        if den > 0.0 {
            worst = worst.max(c.norm() / den);
        }
    }
    Ok(worst)
}

/// Observed constants in the reconstruction bounds for one `u_h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReconstructionRatios {
    /// `enorm(E² u - u)` over the jump functional on all nodes.
    pub averaging_all: f64,
    /// Same numerator, jump functional on interior nodes only.
    pub averaging_interior: f64,
    /// `|R u - u|_{H^α, broken}` over `(Σ h^{3-2α}[u']² + h^{1-2α}[u]²)^{1/2}`.
    pub ritz: [f64; 3],
    /// `‖(R u)'‖ / enorm(u)`.
    pub ritz_h1: f64,
}

pub fn reconstruction_ratios(ops: &OperatorMatrices, u: &DVector<f64>) -> Result<ReconstructionRatios> {
    let uh = ops.space.function(u.clone())?;
    let mesh = ops.space.mesh();
    let (mut all, mut interior) = (0.0, 0.0);
    let mut ritz_den = [0.0; 3];
    let mut enorm2 = 0.0;
    let vol = ops.seminorm_grams[1].clone();
    for node in mesh.nodes() {
        let t = uh.trace_data(node.index);
        let h = node.h_e;
        let (j0, j1) = (t.jump.powi(2), t.grad_jump.powi(2));
        let term = h * j1 + j0 / h;
        all += term;
        if node.kind == crate::mesh::NodeKind::Interior {
            interior += term;
        }
        for (a, den) in ritz_den.iter_mut().enumerate() {
            let a = a as i32;
            *den += h.powi(3 - 2 * a) * j1 + h.powi(1 - 2 * a) * j0;
        }
        enorm2 += j0 / h;
    }
    let ub = &ops.embed_v * u;
    enorm2 += ub.dot(&(&vol * &ub));

    let e2u = &ops.averaging * u;
    let d_avg = ops.lift(u, &e2u);
    let num_avg = d_avg.dot(&(&ops.big_forms.m1 * &d_avg)).max(0.0).sqrt();
    let ru = &ops.ritz * u;
    let d_ritz = ops.lift(u, &ru);
    let ritz = [0, 1, 2].map(|a| {
        let n = d_ritz.dot(&(&ops.seminorm_grams[a] * &d_ritz)).max(0.0).sqrt();
        n / ritz_den[a].sqrt()
    });
    let h1 = ru.dot(&(&ops.a_ss * &ru)).max(0.0).sqrt();
    Ok(ReconstructionRatios {
        averaging_all: num_avg / all.sqrt(),
        averaging_interior: num_avg / interior.sqrt(),
        ritz,
        ritz_h1: h1 / enorm2.sqrt(),
    })
}

/// Weighted Gram `Σ_nodes w0(h_e) [u]² + w1(h_e) [u']²` of the jump
/// functionals on `space`, over all nodes or interior nodes only.
pub fn jump_gram(space: &DgSpace, w0: impl Fn(f64) -> f64, w1: impl Fn(f64) -> f64, interior_only: bool) -> DMatrix<f64> {
    let mesh = space.mesh();
    let n = space.total_dofs();
    let mut g = DMatrix::zeros(n, n);
    for node in mesh.nodes() {
        if interior_only && node.kind != crate::mesh::NodeKind::Interior {
            continue;
        }
        let x = mesh.vertices()[node.index];
        let (mut jv, mut jd) = (DVector::<f64>::zeros(n), DVector::<f64>::zeros(n));
        for (e, sign) in [(node.left, 1.0), (node.right, -1.0)] {
            let Some(e) = e else { continue };
            for (j, b) in space.basis_at(e, x).iter().enumerate() {
                jv[space.dof(e, j)] += sign * b[0];
                jd[space.dof(e, j)] += sign * b[1];
            }
        }
        g += &jv * jv.transpose() * w0(node.h_e) + &jd * jd.transpose() * w1(node.h_e);
    }
    g
}

/// `sup_u (uᵀ N u / uᵀ D u)^{1/2}` for symmetric positive semidefinite
/// `N`, `D`. Infinite when `N` does not vanish on the kernel of `D`.
pub fn pencil_sup(num: &DMatrix<f64>, den: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(symmetrize(den));
    let lmax = eig.eigenvalues.max();
    let tol = 1e-12 * lmax;
    let (range, kernel): (Vec<usize>, Vec<usize>) = (0..den.nrows()).partition(|&i| eig.eigenvalues[i] > tol);
    let num = symmetrize(num);
    let nscale = num.amax().max(f64::MIN_POSITIVE);
    let leak = kernel.iter().fold(0.0f64, |m, &i| {
        let v = eig.eigenvectors.column(i);
        m.max((&num * v).norm())
    });
    if leak > 1e-8 * nscale {
        return f64::INFINITY;
    }
    let w = DMatrix::from_fn(den.nrows(), range.len(), |r, c| {
        eig.eigenvectors[(r, range[c])] / eig.eigenvalues[range[c]].sqrt()
    });
    let red = w.transpose() * num * &w;
    SymmetricEigen::new(symmetrize(&red)).eigenvalues.max().max(0.0).sqrt()
}

/// Exact worst-case constants of the reconstruction bounds over all of
/// `V_h`: the suprema of the ratios in [`ReconstructionRatios`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub averaging: f64,
    pub ritz: [f64; 3],
    pub ritz_h1: f64,
}

pub fn bound_constants(ops: &OperatorMatrices) -> BoundConstants {
    let space = &ops.space;
    let d_avg = &ops.embed_v - &ops.embed_s * &ops.averaging;
    let d_ritz = &ops.embed_v - &ops.embed_s * &ops.ritz;
    let averaging = pencil_sup(
        &(d_avg.transpose() * &ops.big_forms.m1 * &d_avg),
        &jump_gram(space, |h| 1.0 / h, |h| h, false),
    );
    let ritz = [0, 1, 2].map(|a: i32| {
        pencil_sup(
            &(d_ritz.transpose() * &ops.seminorm_grams[a as usize] * &d_ritz),
            &jump_gram(space, |h| h.powi(1 - 2 * a), |h| h.powi(3 - 2 * a), false),
        )
    });
    let m1 = ops.embed_v.transpose() * &ops.big_forms.m1 * &ops.embed_v;
    let ritz_h1 = pencil_sup(&(ops.ritz.transpose() * &ops.a_ss * &ops.ritz), &m1);
    BoundConstants {
        averaging,
        ritz,
        ritz_h1,
    }
}

/// Largest relative residual `|∫ (u - R u) ṽ''| / (‖u‖ ‖ṽ''‖)` over all
/// basis functions `ṽ` of `S`.
pub fn orthogonality_residual(ops: &OperatorMatrices, laplacians: &DMatrix<f64>, u: &DVector<f64>) -> f64 {
    let d = ops.lift(u, &(&ops.ritz * u));
    let ip = laplacians.transpose() * d;
    let un = u.norm();
    ip.iter()
        .zip(laplacians.column_iter())
        .map(|(v, col)| {
            let den = un * col.norm();
            if den > 0.0 { v.abs() / den } else { 0.0 }
        })
        .fold(0.0, f64::max)
}

/// `count` vectors of standard normal entries from a seeded stream.
pub fn standard_normal_ensemble(dim: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| DVector::from_fn(dim, |_, _| rng.sample(StandardNormal)))
        .collect()
}

/// Seed of the random stream used on a mesh with `n` elements.
pub fn level_seed(seed: u64, n: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (n as u64)
}

/// Least-squares slope of `log(values)` against `log(h)`.
pub fn log_log_slope(h: &[f64], values: &[f64]) -> f64 {
    let n = h.len().min(values.len()) as f64;
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// `max / min` of positive values; infinite when any value is not positive.
pub fn max_over_min(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo > 0.0 { hi / lo } else { f64::INFINITY }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EocRow {
    pub h: f64,
    pub error: f64,
    /// `None` on the first row and where an error is not positive.
    pub eoc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EocTable {
    pub rows: Vec<EocRow>,
}

impl EocTable {
    pub fn last(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.eoc)
    }
}

/// `EOC_i = log(e_{i-1}/e_i) / log(h_{i-1}/h_i)`.
pub fn eoc(rows: &[(f64, f64)]) -> Result<EocTable> {
    if rows.windows(2).any(|w| !(w[1].0 < w[0].0)) {
        return invalid("mesh sizes must be strictly decreasing");
    }
    let out = rows
        .iter()
        .enumerate()
        .map(|(i, &(h, error))| {
            let eoc = (i > 0)
                .then(|| rows[i - 1])
                .filter(|&(_, ep)| ep > 0.0 && error > 0.0)
                .map(|(hp, ep)| (ep / error).ln() / (hp / h).ln());
            EocRow { h, error, eoc }
        })
        .collect();
    Ok(EocTable { rows: out })
}

/// Settings of the property suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckConfig {
    pub k: usize,
    pub params: PenaltyParams,
    pub meshes: Vec<usize>,
    pub domain: (f64, f64),
    pub seed: u64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub property: String,
    pub passed: bool,
    pub observed: f64,
    pub bound: f64,
    pub detail: String,
}

impl PropertyResult {
    fn new(property: &str, passed: bool, observed: f64, bound: f64, detail: String) -> Self {
        Self {
            property: property.into(),
            passed,
            observed,
            bound,
            detail,
        }
    }
}

/// Per-level statistics gathered by the property suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelStats {
    pub n_elements: usize,
    pub h_max: f64,
    pub lambda_min: f64,
    pub orthogonality: f64,
    pub averaging_max: f64,
    pub ritz_max: [f64; 3],
    pub ritz_h1_max: f64,
    pub constants: BoundConstants,
    pub proof_lower_min: f64,
    pub proof_upper_max: f64,
    pub projection_max: f64,
}

pub fn level_stats(mesh: Mesh1D, cfg: &CheckConfig) -> Result<LevelStats> {
    let n = mesh.num_elements();
    let ctx = LevelContext::new(mesh, cfg.k, cfg.params)?;
    let ops = &ctx.ops;
    let lambda_min = ctx.forms.coercivity_constant()?;
    let laps = ops.s_laplacians();
    let seed = level_seed(cfg.seed, n);
    let us = standard_normal_ensemble(ops.space.total_dofs(), cfg.samples, seed);
    let mut st = LevelStats {
        n_elements: n,
        h_max: ctx.mesh().h_max(),
        lambda_min,
        orthogonality: 0.0,
        averaging_max: 0.0,
        ritz_max: [0.0; 3],
        ritz_h1_max: 0.0,
        constants: bound_constants(ops),
        proof_lower_min: f64::INFINITY,
        proof_upper_max: 0.0,
        projection_max: f64::NAN,
    };
    for u in &us {
        st.orthogonality = st.orthogonality.max(orthogonality_residual(ops, &laps, u));
        let r = reconstruction_ratios(ops, u)?;
        st.averaging_max = st.averaging_max.max(r.averaging_all);
        for a in 0..3 {
            st.ritz_max[a] = st.ritz_max[a].max(r.ritz[a]);
        }
        st.ritz_h1_max = st.ritz_h1_max.max(r.ritz_h1);
        let p = proof_construction_check(&ops.space.function(u.clone())?, ops, None)?;
        st.proof_lower_min = st.proof_lower_min.min(p.lower);
        st.proof_upper_max = st.proof_upper_max.max(p.upper);
    }
    if lambda_min > 0.0 {
        let ws = standard_normal_ensemble(ops.c1.dim(), cfg.samples, seed.wrapping_add(1));
        st.projection_max = ritz_projection_stability(&ws, ops)?;
    }
    Ok(st)
}

/// Maximum relative route discrepancy of the IP assembly on `count`
/// randomly perturbed meshes.
pub fn dual_assembly_discrepancy(k: usize, params: PenaltyParams, count: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let n = rng.random_range(2..=40);
        let jitter = rng.random_range(0.0..0.4);
        let mesh = Mesh1D::perturbed(n, (0.0, 1.0), jitter, rng.random())?;
        let forms = assemble_ip(&DgSpace::new(mesh, k)?, params);
        worst = worst.max(forms.route_discrepancy() / forms.a_primal.amax());
    }
    Ok(worst)
}

pub const ORTHOGONALITY_TOL: f64 = 1e-10;
pub const ROUTE_TOL: f64 = 1e-10;
pub const SLOPE_TOL: f64 = 0.2;
pub const STABILITY_FACTOR: f64 = 2.0;

/// Runs the invariant suite on every level of `cfg.meshes`.
pub fn property_suite(cfg: &CheckConfig) -> Result<(Vec<LevelStats>, Vec<PropertyResult>)> {
    require_k2(cfg.k)?;
    let levels = cfg
        .meshes
        .par_iter()
        .map(|&n| level_stats(Mesh1D::uniform(n, cfg.domain)?, cfg))
        .collect::<Result<Vec<_>>>()?;
    let h: Vec<f64> = levels.iter().map(|l| l.h_max).collect();
    let col = |f: &dyn Fn(&LevelStats) -> f64| levels.iter().map(f).collect::<Vec<f64>>();
    let mut out = Vec::new();

    let lam = col(&|l| l.lambda_min);
    let lam_min = lam.iter().copied().fold(f64::INFINITY, f64::min);
    let lam_ratio = max_over_min(&lam);
    out.push(PropertyResult::new(
        "coercivity",
        lam_min > 0.0 && lam_ratio <= STABILITY_FACTOR,
        lam_min,
        0.0,
        format!("min lambda over levels; max/min = {lam_ratio:.6e}"),
    ));

    let route = dual_assembly_discrepancy(cfg.k, cfg.params, 20, cfg.seed)?;
    out.push(PropertyResult::new(
        "dual_assembly",
        route <= ROUTE_TOL,
        route,
        ROUTE_TOL,
        "max |A_primal - A_ibp| / max |A_primal| over 20 perturbed meshes".into(),
    ));

    let orth = col(&|l| l.orthogonality).into_iter().fold(0.0, f64::max);
    out.push(PropertyResult::new(
        "ritz_orthogonality",
        orth <= ORTHOGONALITY_TOL,
        orth,
        ORTHOGONALITY_TOL,
        "max |(u - Ru, v'')| / (|u| |v''|)".into(),
    ));

    let mut slope_check = |name: &str, sup: Vec<f64>, sampled: Vec<f64>| {
        let s = log_log_slope(&h, &sup);
        let top = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        out.push(PropertyResult::new(
            name,
            s.is_finite() && s.abs() <= SLOPE_TOL,
            s,
            SLOPE_TOL,
            format!(
                "log-log slope of the worst-case constant; constant {:.6e}, largest sampled ratio {:.6e}",
                top(&sup),
                top(&sampled)
            ),
        ));
    };
    slope_check("averaging_bound", col(&|l| l.constants.averaging), col(&|l| l.averaging_max));
    for a in 0..3 {
        slope_check(
            &format!("ritz_bound_alpha{a}"),
            col(&|l| l.constants.ritz[a]),
            col(&|l| l.ritz_max[a]),
        );
    }
    slope_check("ritz_h1_stability", col(&|l| l.constants.ritz_h1), col(&|l| l.ritz_h1_max));

    let lower = col(&|l| l.proof_lower_min);
    let lower_min = lower.iter().copied().fold(f64::INFINITY, f64::min);
    let lower_ratio = max_over_min(&lower);
    out.push(PropertyResult::new(
        "proof_lower_ratio",
        lower_min > 0.0 && lower_ratio <= STABILITY_FACTOR,
        lower_min,
        0.0,
        format!("ensemble minimum; max/min over levels = {lower_ratio:.6e}"),
    ));
    let upper = col(&|l| l.proof_upper_max);
    let upper_ratio = max_over_min(&upper);
    out.push(PropertyResult::new(
        "proof_upper_ratio",
        upper_ratio <= STABILITY_FACTOR,
        upper_ratio,
        STABILITY_FACTOR,
        "max/min over levels of the ensemble maximum".into(),
    ));
    let proj = col(&|l| l.projection_max);
    let proj_ratio = max_over_min(&proj);
    out.push(PropertyResult::new(
        "ritz_projection_stability",
        proj_ratio <= STABILITY_FACTOR,
        proj_ratio,
        STABILITY_FACTOR,
        "max/min over levels of the ensemble maximum".into(),
    ));
    Ok((levels, out))
}

//! C¹-conforming reconstructions of broken polynomials.
//!
//! The target space `S` consists of C¹ piecewise polynomials of degree
//! `k + 2` vanishing at both end points. On every element a function of `S`
//! is fixed by its values and derivatives at the two vertices plus its values
//! at the `k - 1` points `x_l + j h / k`, `j = 1..k-1`. Two maps from the
//! broken space into `S` are provided:
//!
//! * [`AveragingOperator`] (`E²`) averages one-sided vertex values and
//!   derivatives and copies interior point values from the owning element;
//! * [`RitzOperator`] (`R`) solves `∫ (R u)' v' = ∫ u_h' v' - Σ_nodes [u_h] v'`
//!   for all `v` in `S`, which makes `u_h - R u_h` orthogonal to `v''`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dgspace::{Broken, DgFunction, DgSpace};
use crate::error::{invalid, Error, Result};
use crate::forms::{assemble_ip, broken_seminorm_gram, AssembledForms, PenaltyParams};
use crate::legendre::legendre_derivs;
use crate::linalg::{BandedCholesky, BandedSym, MatrixSink, SparseRows};
use crate::mesh::Mesh1D;
use crate::quadrature::{gauss_rule, QuadratureRule};

/// What a degree of freedom of `S` measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DofKind {
    Value { vertex: usize },
    Derivative { vertex: usize },
    Interior { element: usize, point: usize },
}

/// C¹ piecewise polynomials of degree `k + 2` with zero boundary values.
#[derive(Debug, Clone, PartialEq)]
pub struct C1Space {
    mesh: Mesh1D,
    k: usize,
    // Legendre coefficients of the reference basis, one column per local dof
    reference: DMatrix<f64>,
    element_dofs: Vec<Vec<Option<usize>>>,
    dof_kinds: Vec<DofKind>,
}

impl C1Space {
    /// Space of degree `k + 2` on `mesh`; `k >= 1`.
    pub fn new(mesh: Mesh1D, k: usize) -> Result<Self> {
        if k == 0 {
            return invalid("the C1 space needs k >= 1 (degree k + 2 >= 3)");
        }
        if k + 2 > crate::dgspace::MAX_DEGREE {
            return invalid(format!("degree {} exceeds the supported maximum", k + 2));
        }
        let reference = local_interpolation_matrix(k)
            .try_inverse()
            .ok_or_else(|| Error::Singular("local Hermite-Birkhoff interpolation".into()))?;

        let n = mesh.num_elements();
        let mut dof_kinds = Vec::with_capacity(2 * n + 2 + (k - 1) * n);
        let mut vertex_dofs: Vec<(Option<usize>, usize)> = Vec::with_capacity(n + 1);
        let mut interior_dofs: Vec<Vec<usize>> = Vec::with_capacity(n);
        let push = |kind: DofKind, kinds: &mut Vec<DofKind>| {
            kinds.push(kind);
            kinds.len() - 1
        };
        // numbering walks left to right so that the stiffness matrix is banded
        let d0 = push(DofKind::Derivative { vertex: 0 }, &mut dof_kinds);
        vertex_dofs.push((None, d0));
        for e in 0..n {
            let pts = (1..k)
                .map(|p| push(DofKind::Interior { element: e, point: p }, &mut dof_kinds))
                .collect();
            interior_dofs.push(pts);
            let v = e + 1;
            let value = (v < n).then(|| push(DofKind::Value { vertex: v }, &mut dof_kinds));
            let deriv = push(DofKind::Derivative { vertex: v }, &mut dof_kinds);
            vertex_dofs.push((value, deriv));
        }
        let element_dofs = (0..n)
            .map(|e| {
                let (lv, ld) = vertex_dofs[e];
                let (rv, rd) = vertex_dofs[e + 1];
                let mut loc = vec![lv, Some(ld)];
                loc.extend(interior_dofs[e].iter().map(|&d| Some(d)));
                loc.push(rv);
                loc.push(Some(rd));
                loc
            })
            .collect();
        Ok(Self {
            mesh,
            k,
            reference,
            element_dofs,
            dof_kinds,
        })
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    /// The broken degree `k` this space reconstructs.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Polynomial degree `k + 2`.
    pub fn degree(&self) -> usize {
        self.k + 2
    }

    pub fn dim(&self) -> usize {
        self.dof_kinds.len()
    }

    pub fn dof_kinds(&self) -> &[DofKind] {
        &self.dof_kinds
    }

    /// Global dof of each local functional on element `e`, `None` where the
    /// boundary value is pinned to zero. Local order: value and derivative
    /// at the left vertex, interior points, value and derivative at the
    /// right vertex.
    pub fn element_dofs(&self, e: usize) -> &[Option<usize>] {
        &self.element_dofs[e]
    }

    pub fn half_bandwidth(&self) -> usize {
        self.element_dofs
            .iter()
            .map(|loc| {
                let ids: Vec<usize> = loc.iter().flatten().copied().collect();
                ids.iter().max().unwrap() - ids.iter().min().unwrap()
            })
            .max()
            .unwrap_or(0)
    }

    /// Interior interpolation points of element `e`.
    pub fn interior_points(&self, e: usize) -> Vec<f64> {
        let (l, r) = self.mesh.element(e);
        (1..self.k)
            .map(|j| l + (r - l) * j as f64 / self.k as f64)
            .collect()
    }

    /// `[psi, psi', psi'']` at `x` for every local basis function of `e`,
    /// in local dof order.
    pub fn local_basis_at(&self, e: usize, x: f64) -> Vec<[f64; 3]> {
        let (l, r) = self.mesh.element(e);
        let h = r - l;
        let p = self.degree();
        let leg = legendre_derivs(p, 2.0 * (x - l) / h - 1.0);
        let s = 2.0 / h;
        let nloc = p + 1;
        (0..nloc)
            .map(|a| {
                let mut v = [0.0; 3];
                for (m, lm) in leg.iter().enumerate() {
                    let c = self.reference[(m, a)];
                    v[0] += c * lm[0];
                    v[1] += c * s * lm[1];
                    v[2] += c * s * s * lm[2];
                }
                // derivative dofs carry physical slopes
                if a == 1 || a == nloc - 1 {
                    v.iter_mut().for_each(|t| *t *= h);
                }
                v
            })
            .collect()
    }

    pub fn function(&self, dofs: DVector<f64>) -> Result<C1Function> {
        if dofs.len() != self.dim() {
            return invalid(format!("expected {} dofs, got {}", self.dim(), dofs.len()));
        }
        Ok(C1Function {
            space: self.clone(),
            dofs,
        })
    }

    /// Dof interpolant of a C¹ function given with its derivative.
    pub fn interpolate(&self, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> C1Function {
        let v = self.mesh.vertices();
        let dofs = self.dof_kinds.iter().map(|kind| match *kind {
            DofKind::Value { vertex } => f(v[vertex]),
            DofKind::Derivative { vertex } => df(v[vertex]),
            DofKind::Interior { element, point } => f(self.interior_points(element)[point - 1]),
        });
        C1Function {
            space: self.clone(),
            dofs: DVector::from_iterator(self.dim(), dofs),
        }
    }

    /// Symmetric band stiffness `∫ psi_a' psi_b'`.
    pub fn stiffness(&self) -> BandedSym {
        let mut k = BandedSym::zeros(self.dim(), self.half_bandwidth());
        let rule = gauss_rule(self.k + 3).expect("positive point count");
        for e in 0..self.mesh.num_elements() {
            let (l, r) = self.mesh.element(e);
            let loc = &self.element_dofs[e];
            for (x, w) in rule.mapped(l, r) {
                let b = self.local_basis_at(e, x);
                for (a, ga) in loc.iter().enumerate() {
                    let Some(ga) = ga else { continue };
                    for (c, gc) in loc.iter().enumerate() {
                        let Some(gc) = gc else { continue };
                        k.add(*ga, *gc, w * b[a][1] * b[c][1]);
                    }
                }
            }
        }
        k
    }

    /// Coefficients of every basis function of `S` in the orthonormal broken
    /// basis of `P_{k+2}(T)`; one column per dof.
    pub fn embedding(&self, big: &DgSpace) -> DMatrix<f64> {
        assert_eq!(big.degree(), self.degree());
        let rule = gauss_rule(self.k + 3).expect("positive point count");
        let mut m = DMatrix::zeros(big.total_dofs(), self.dim());
        for e in 0..self.mesh.num_elements() {
            let (l, r) = self.mesh.element(e);
            for (x, w) in rule.mapped(l, r) {
                let psi = self.local_basis_at(e, x);
                let phi = big.basis_at(e, x);
                for (a, ga) in self.element_dofs[e].iter().enumerate() {
                    let Some(ga) = ga else { continue };
                    for (j, pj) in phi.iter().enumerate() {
                        m[(big.dof(e, j), *ga)] += w * psi[a][0] * pj[0];
                    }
                }
            }
        }
        m
    }
}

/// Rows: local functionals; columns: Legendre polynomials on [-1, 1].
fn local_interpolation_matrix(k: usize) -> DMatrix<f64> {
    let p = k + 2;
    let n = p + 1;
    let mut v = DMatrix::zeros(n, n);
    let mut row = 0;
    let value_row = |t: f64, v: &mut DMatrix<f64>, row: &mut usize| {
        for (m, l) in legendre_derivs(p, 2.0 * t - 1.0).iter().enumerate() {
            v[(*row, m)] = l[0];
        }
        *row += 1;
    };
    let deriv_row = |t: f64, v: &mut DMatrix<f64>, row: &mut usize| {
        for (m, l) in legendre_derivs(p, 2.0 * t - 1.0).iter().enumerate() {
            v[(*row, m)] = 2.0 * l[1];
        }
        *row += 1;
    };
    value_row(0.0, &mut v, &mut row);
    deriv_row(0.0, &mut v, &mut row);
    for j in 1..k {
        value_row(j as f64 / k as f64, &mut v, &mut row);
    }
    value_row(1.0, &mut v, &mut row);
    deriv_row(1.0, &mut v, &mut row);
    v
}

/// Smallest singular value of the reference interpolation matrix; positive
/// iff the local dofs are unisolvent for `P_{k+2}`.
pub fn local_unisolvence(k: usize) -> f64 {
    local_interpolation_matrix(k).singular_values().min()
}

/// Member of [`C1Space`].
#[derive(Debug, Clone, PartialEq)]
pub struct C1Function {
    space: C1Space,
    dofs: DVector<f64>,
}

impl C1Function {
    pub fn space(&self) -> &C1Space {
        &self.space
    }

    pub fn dofs(&self) -> &DVector<f64> {
        &self.dofs
    }

    /// Value (`r = 0`), slope (`r = 1`) or curvature (`r = 2`) at `x`.
    /// Curvature at a vertex is taken from the element to the right, except
    /// at the right end point.
    pub fn evaluate(&self, x: f64, r: usize) -> Result<f64> {
        if r > 2 {
            return invalid(format!("derivative order {r} not supported (max 2)"));
        }
        let e = self.space.mesh.locate(x)?.element;
        Ok(self.eval_on(e, x, r))
    }

    /// `(psi_a, dof)` pairs restricted to element `e`.
    fn local_dofs(&self, e: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.space.element_dofs[e]
            .iter()
            .enumerate()
            .filter_map(|(a, g)| g.map(|g| (a, self.dofs[g])))
    }
}

impl Broken for C1Function {
    fn eval_on(&self, e: usize, x: f64, r: usize) -> f64 {
        let b = self.space.local_basis_at(e, x);
        self.local_dofs(e).map(|(a, c)| c * b[a][r]).sum()
    }
}

/// `c1_evaluate`: point evaluation of a reconstruction.
pub fn c1_evaluate(s: &C1Function, x: f64, r: usize) -> Result<f64> {
    s.evaluate(x, r)
}

fn check_same_mesh(space: &DgSpace, c1: &C1Space) -> Result<()> {
    if space.mesh() != c1.mesh() {
        return invalid("broken space and C1 space live on different meshes");
    }
    Ok(())
}

/// The averaging reconstruction `E²` as a sparse matrix from broken
/// coefficients to dofs of `S`.
#[derive(Debug, Clone)]
pub struct AveragingOperator {
    space: DgSpace,
    c1: C1Space,
    matrix: SparseRows,
}

impl AveragingOperator {
    pub fn new(space: &DgSpace, c1: &C1Space) -> Result<Self> {
        check_same_mesh(space, c1)?;
        let mesh = space.mesh();
        let n = mesh.num_elements();
        let v = mesh.vertices();
        let mut m = SparseRows::new(c1.dim(), space.total_dofs());
        for (row, kind) in c1.dof_kinds().iter().enumerate() {
            let mut add_from = |e: usize, x: f64, r: usize, weight: f64| {
                for (j, b) in space.basis_at(e, x).iter().enumerate() {
                    m.push(row, space.dof(e, j), weight * b[r]);
                }
            };
            match *kind {
                DofKind::Value { vertex } | DofKind::Derivative { vertex } => {
                    let r = usize::from(matches!(kind, DofKind::Derivative { .. }));
                    let neighbours: Vec<usize> = [vertex.checked_sub(1), (vertex < n).then_some(vertex)]
                        .into_iter()
                        .flatten()
                        .collect();
                    let w = 1.0 / neighbours.len() as f64;
                    for e in neighbours {
                        add_from(e, v[vertex], r, w);
                    }
                }
                DofKind::Interior { element, point } => {
                    let x = c1.interior_points(element)[point - 1];
                    add_from(element, x, 0, 1.0);
                }
            }
        }
        Ok(Self {
            space: space.clone(),
            c1: c1.clone(),
            matrix: m,
        })
    }

    pub fn matrix(&self) -> &SparseRows {
        &self.matrix
    }

    pub fn apply(&self, u: &DgFunction) -> Result<C1Function> {
        if u.space() != &self.space {
            return invalid("function does not belong to the operator's broken space");
        }
        self.c1.function(self.matrix.mul_vec(u.coeffs()))
    }
}

/// `E²(u_h)`.
pub fn averaging_reconstruct(u: &DgFunction, c1: &C1Space) -> Result<C1Function> {
    AveragingOperator::new(u.space(), c1)?.apply(u)
}

/// Factorized Ritz problem on `S`.
#[derive(Debug, Clone)]
pub struct RitzOperator {
    c1: C1Space,
    factor: BandedCholesky,
    rule: QuadratureRule,
}

impl RitzOperator {
    pub fn new(c1: &C1Space) -> Result<Self> {
        let factor = c1.stiffness().cholesky().map_err(|(pivot, d)| {
            Error::Singular(format!(
                "C1 stiffness matrix not positive definite at pivot {pivot} ({d:e}); boundary pinning lost?"
            ))
        })?;
        Ok(Self {
            c1: c1.clone(),
            factor,
            rule: gauss_rule(c1.k() + 3).expect("positive point count"),
        })
    }

    pub fn space(&self) -> &C1Space {
        &self.c1
    }

    /// `b_a = ∫ u_h' psi_a' - Σ_nodes [u_h] psi_a'(node)`.
    pub fn rhs(&self, u: &DgFunction) -> Result<DVector<f64>> {
        check_same_mesh(u.space(), &self.c1)?;
        let mesh = self.c1.mesh();
        let mut b = DVector::zeros(self.c1.dim());
        for e in 0..mesh.num_elements() {
            let (l, r) = mesh.element(e);
            let loc = self.c1.element_dofs(e);
            for (x, w) in self.rule.mapped(l, r) {
                let du = u.eval_on(e, x, 1);
                let psi = self.c1.local_basis_at(e, x);
                for (a, g) in loc.iter().enumerate() {
                    if let Some(g) = g {
                        b[*g] += w * du * psi[a][1];
                    }
                }
            }
        }
        // only the derivative dof of a vertex has a nonzero slope there
        for (g, kind) in self.c1.dof_kinds().iter().enumerate() {
            if let DofKind::Derivative { vertex } = *kind {
                b[g] -= u.trace_data(vertex).jump;
            }
        }
        Ok(b)
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(rhs)
    }

    pub fn apply(&self, u: &DgFunction) -> Result<C1Function> {
        let rhs = self.rhs(u)?;
        self.c1.function(self.solve(&rhs))
    }
}

/// `R(u_h)`.
pub fn ritz_reconstruct(u: &DgFunction, c1: &C1Space) -> Result<C1Function> {
    RitzOperator::new(c1)?.apply(u)
}

/// Dense linear maps between `V_h`, `S` and the common broken space
/// `P_{k+2}(T)` in which both live.
#[derive(Debug, Clone)]
pub struct OperatorMatrices {
    pub space: DgSpace,
    pub c1: C1Space,
    /// Broken space of degree `k + 2` containing `V_h + S`.
    pub big: DgSpace,
    /// Forms (IP and norm Grams) on `big`.
    pub big_forms: AssembledForms,
    /// Broken `H^r` seminorm Grams on `big`, `r = 0, 1, 2`.
    pub seminorm_grams: [DMatrix<f64>; 3],
    /// `big` coefficients of the `V_h` basis.
    pub embed_v: DMatrix<f64>,
    /// `big` coefficients of the `S` basis.
    pub embed_s: DMatrix<f64>,
    /// `E²` as a dense `dim S x dim V_h` matrix.
    pub averaging: DMatrix<f64>,
    /// `R` as a dense `dim S x dim V_h` matrix.
    pub ritz: DMatrix<f64>,
    /// `A_h(phi_j, psi_l)` at `(l, j)`.
    pub a_sv: DMatrix<f64>,
    /// `A_h(psi_m, psi_l)` at `(l, m)`; equals the `S` stiffness.
    pub a_ss: DMatrix<f64>,
    /// `A_h` on `V_h`.
    pub a_vv: DMatrix<f64>,
    ritz_factor: RitzOperator,
}

pub fn operator_matrices(
    space: &DgSpace,
    c1: &C1Space,
    params: PenaltyParams,
) -> Result<OperatorMatrices> {
    check_same_mesh(space, c1)?;
    if space.degree() > c1.degree() {
        return invalid("broken degree exceeds the C1 degree");
    }
    let mesh = space.mesh();
    let big = DgSpace::new(mesh.clone(), c1.degree())?;
    let big_forms = assemble_ip(&big, params);
    let seminorm_grams = [0, 1, 2].map(|r| broken_seminorm_gram(&big, r));

    let mut embed_v = DMatrix::zeros(big.total_dofs(), space.total_dofs());
    for e in 0..mesh.num_elements() {
        for j in 0..space.dofs_per_element() {
            embed_v[(big.dof(e, j), space.dof(e, j))] = 1.0;
        }
    }
    let embed_s = c1.embedding(&big);
    let averaging = AveragingOperator::new(space, c1)?.matrix.to_dense();
    let a_big = &big_forms.a_primal;
    let a_sv = embed_s.transpose() * a_big * &embed_v;
    let a_ss = embed_s.transpose() * a_big * &embed_s;
    let a_vv = embed_v.transpose() * a_big * &embed_v;
    let ritz_factor = RitzOperator::new(c1)?;
    let ritz = ritz_factor.factor.solve_matrix(&a_sv);
    Ok(OperatorMatrices {
        space: space.clone(),
        c1: c1.clone(),
        big,
        big_forms,
        seminorm_grams,
        embed_v,
        embed_s,
        averaging,
        ritz,
        a_sv,
        a_ss,
        a_vv,
        ritz_factor,
    })
}

impl OperatorMatrices {
    pub fn ritz_operator(&self) -> &RitzOperator {
        &self.ritz_factor
    }

    /// `big` coefficients of `v - s` for `v` in `V_h` and `s` in `S`.
    pub fn lift(&self, v: &DVector<f64>, s: &DVector<f64>) -> DVector<f64> {
        &self.embed_v * v - &self.embed_s * s
    }

    /// Broken Laplacians of the `S` basis in `big` coordinates.
    pub fn s_laplacians(&self) -> DMatrix<f64> {
        let mesh = self.big.mesh();
        let nb = self.big.dofs_per_element();
        let mut d = DMatrix::zeros(self.big.total_dofs(), self.big.total_dofs());
        for e in 0..mesh.num_elements() {
            let blk = self.big.laplacian_block(e);
            d.view_mut((e * nb, e * nb), (nb, nb)).copy_from(&blk);
        }
        d * &self.embed_s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgspace::project_l2;
    use crate::linalg::symmetrize;

    fn setup(n: usize, k: usize) -> (DgSpace, C1Space) {
        let mesh = Mesh1D::uniform(n, (0.0, 1.0)).unwrap();
        (
            DgSpace::new(mesh.clone(), k).unwrap(),
            C1Space::new(mesh, k).unwrap(),
        )
    }

    fn bubble(s: &DgSpace) -> DgFunction {
        project_l2(|x| x * (1.0 - x), s, 0, &[])
    }

    #[test]
    fn dimension_formula() {
        for k in 1..=5 {
            for n in [1, 2, 7] {
                let (_, c1) = setup(n, k);
                assert_eq!(c1.dim(), 2 * (n - 1) + 2 + (k - 1) * n);
                assert!(c1.half_bandwidth() <= k + 2);
            }
        }
        assert!(C1Space::new(Mesh1D::uniform(2, (0.0, 1.0)).unwrap(), 0).is_err());
    }

    #[test]
    fn local_interpolation_is_unisolvent() {
        for k in 1..=10 {
            assert!(local_unisolvence(k) > 1e-6, "k={k}");
        }
    }

    #[test]
    fn members_are_c1_and_vanish_on_boundary() {
        let mesh = Mesh1D::perturbed(6, (0.0, 1.0), 0.3, 3).unwrap();
        let c1 = C1Space::new(mesh.clone(), 3).unwrap();
        let dofs = DVector::from_fn(c1.dim(), |i, _| ((i * 5 + 1) % 7) as f64 - 3.0);
        let s = c1.function(dofs).unwrap();
        let v = mesh.vertices();
        assert!(s.eval_on(0, v[0], 0).abs() < 1e-11);
        assert!(s.eval_on(5, v[6], 0).abs() < 1e-11);
        for i in 1..6 {
            for r in 0..2 {
                let l = s.eval_on(i - 1, v[i], r);
                let rr = s.eval_on(i, v[i], r);
                assert!((l - rr).abs() <= 1e-11 * (1.0 + l.abs()), "node {i} r={r}");
            }
        }
    }

    #[test]
    fn averaging_reproduces_bubble() {
        let (s, c1) = setup(2, 2);
        let u = bubble(&s);
        let e2 = averaging_reconstruct(&u, &c1).unwrap();
        for &x in &[0.1, 0.3, 0.5, 0.77] {
            assert!((e2.evaluate(x, 0).unwrap() - x * (1.0 - x)).abs() < 1e-12);
        }
        assert!((c1_evaluate(&e2, 0.3, 0).unwrap() - 0.21).abs() < 1e-12);
        assert!(c1_evaluate(&e2, 0.5, 1).unwrap().abs() < 1e-12);
        assert!(c1_evaluate(&e2, 1.5, 0).is_err());
    }

    #[test]
    fn averaging_of_indicator() {
        let (s, c1) = setup(2, 2);
        let u = project_l2(|x| if x < 0.5 { 1.0 } else { 0.0 }, &s, 0, &[]);
        let e2 = averaging_reconstruct(&u, &c1).unwrap();
        let d = e2.dofs();
        let expect = |kind: DofKind| match kind {
            DofKind::Value { vertex: 1 } => 0.5,
            DofKind::Interior { element: 0, .. } => 1.0,
            _ => 0.0,
        };
        for (g, kind) in c1.dof_kinds().iter().enumerate() {
            assert!((d[g] - expect(*kind)).abs() < 1e-12, "{kind:?}");
        }
    }

    #[test]
    fn ritz_reproduces_bubble() {
        let (s, c1) = setup(2, 2);
        let r = ritz_reconstruct(&bubble(&s), &c1).unwrap();
        for &x in &[0.1, 0.3, 0.5, 0.9] {
            assert!((r.evaluate(x, 0).unwrap() - x * (1.0 - x)).abs() < 1e-11);
        }
    }

    #[test]
    fn orthogonality_by_quadrature() {
        let mesh = Mesh1D::perturbed(5, (0.0, 1.0), 0.25, 9).unwrap();
        let s = DgSpace::new(mesh.clone(), 2).unwrap();
        let c1 = C1Space::new(mesh.clone(), 2).unwrap();
        let u = s
            .function(DVector::from_fn(s.total_dofs(), |i, _| ((i * 3 + 2) % 5) as f64 - 2.0))
            .unwrap();
        let ru = ritz_reconstruct(&u, &c1).unwrap();
        let rule = gauss_rule(8).unwrap();
        for g in 0..c1.dim() {
            let mut e = DVector::zeros(c1.dim());
            e[g] = 1.0;
            let v = c1.function(e).unwrap();
            let mut ip = 0.0;
            let mut vv = 0.0;
            for el in 0..5 {
                let (l, r) = mesh.element(el);
                ip += rule.integrate(l, r, |x| (u.eval_on(el, x, 0) - ru.eval_on(el, x, 0)) * v.eval_on(el, x, 2));
                vv += rule.integrate(l, r, |x| v.eval_on(el, x, 2).powi(2));
            }
            assert!(ip.abs() <= 1e-10 * u.coeffs().norm() * vv.sqrt(), "dof {g}: {ip}");
        }
    }

    #[test]
    fn matrices_agree_with_pointwise_operators() {
        let mesh = Mesh1D::perturbed(6, (0.0, 1.0), 0.2, 4).unwrap();
        let s = DgSpace::new(mesh.clone(), 3).unwrap();
        let c1 = C1Space::new(mesh, 3).unwrap();
        let ops = operator_matrices(&s, &c1, PenaltyParams::default_for(3)).unwrap();
        let rit = RitzOperator::new(&c1).unwrap();
        for seed in 0..20u64 {
            let coeffs = DVector::from_fn(s.total_dofs(), |i, _| {
                (((i as u64 + 1) * (seed + 3) * 2654435761) % 1000) as f64 / 500.0 - 1.0
            });
            let u = s.function(coeffs.clone()).unwrap();
            let r1 = rit.apply(&u).unwrap();
            let r2 = &ops.ritz * &coeffs;
            assert!((r1.dofs() - &r2).amax() <= 1e-12 * (1.0 + r2.amax()));
            // mixed block equals the Ritz right-hand side
            let b1 = rit.rhs(&u).unwrap();
            let b2 = &ops.a_sv * &coeffs;
            let scale = ops.big_forms.a_primal.amax() * coeffs.amax();
            assert!((&b1 - &b2).amax() <= 1e-12 * scale);
            let e1 = averaging_reconstruct(&u, &c1).unwrap();
            assert!((e1.dofs() - &ops.averaging * &coeffs).amax() < 1e-12);
        }
        let stiff = c1.stiffness().to_dense();
        assert!((symmetrize(&ops.a_ss) - &stiff).amax() < 1e-10 * stiff.amax());
        assert!((&ops.a_vv - assemble_ip(&s, PenaltyParams::default_for(3)).a_primal).amax() < 1e-10 * ops.a_vv.amax());
    }

    #[test]
    fn averaging_matrix_reproduces_bubble_dofs() {
        let (s, c1) = setup(4, 2);
        let ops = operator_matrices(&s, &c1, PenaltyParams::default_for(2)).unwrap();
        let u = bubble(&s);
        let dofs = &ops.averaging * u.coeffs();
        let expect = c1.interpolate(|x| x * (1.0 - x), |x| 1.0 - 2.0 * x);
        assert!((dofs - expect.dofs()).amax() < 1e-12);
    }

    #[test]
    fn mesh_mismatch_rejected() {
        let (s, _) = setup(4, 2);
        let (_, c1) = setup(5, 2);
        assert!(AveragingOperator::new(&s, &c1).is_err());
        assert!(operator_matrices(&s, &c1, PenaltyParams::default_for(2)).is_err());
    }

    #[test]
    fn ibp_consistency_on_c1_functions() {
        // A_h(s, v_h) = ∫ -s'' v_h for s in S
        let mesh = Mesh1D::perturbed(5, (0.0, 1.0), 0.2, 1).unwrap();
        let s = DgSpace::new(mesh.clone(), 2).unwrap();
        let c1 = C1Space::new(mesh.clone(), 2).unwrap();
        let ops = operator_matrices(&s, &c1, PenaltyParams::default_for(2)).unwrap();
        let w = c1.interpolate(|x| (3.0 * x).sin() * x * (1.0 - x), |x| {
            3.0 * (3.0 * x).cos() * x * (1.0 - x) + (3.0 * x).sin() * (1.0 - 2.0 * x)
        });
        let lhs = ops.a_sv.transpose() * w.dofs();
        let rule = gauss_rule(8).unwrap();
        for i in 0..s.total_dofs() {
            let e = i / s.dofs_per_element();
            let j = i % s.dofs_per_element();
            let (l, r) = mesh.element(e);
            let rhs = rule.integrate(l, r, |x| -w.eval_on(e, x, 2) * s.basis_at(e, x)[j][0]);
            assert!((lhs[i] - rhs).abs() < 1e-10, "dof {i}");
        }
    }
}

//! The broken polynomial space `P_k(T)`.
//!
//! Each element carries the L²-orthonormal scaled Legendre basis
//! `phi_j(x) = sqrt((2j + 1) / h) P_j(2 (x - x_l) / h - 1)`, so element mass
//! matrices are identities and the L² norm of a function is the Euclidean
//! norm of its coefficient vector.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::legendre::legendre_derivs;
use crate::mesh::Mesh1D;
use crate::quadrature::{gauss_rule, QuadratureRule};

/// Highest supported polynomial degree.
pub const MAX_DEGREE: usize = 16;

/// A function that is smooth on each element, possibly with declared
/// breakpoints strictly inside elements.
pub trait Broken: Sync {
    /// `r`-th derivative (`r <= 2`) of the restriction to element `e`,
    /// evaluated at `x` in the closure of that element.
    fn eval_on(&self, e: usize, x: f64, r: usize) -> f64;

    /// Interior points where the function is not smooth. Quadrature splits
    /// cells there.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Linear combination of broken functions.
pub struct Combination<'a> {
    terms: Vec<(f64, &'a dyn Broken)>,
}

impl<'a> Combination<'a> {
    pub fn new() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn with(mut self, coef: f64, f: &'a dyn Broken) -> Self {
        self.terms.push((coef, f));
        self
    }

    /// `a - b`.
    pub fn difference(a: &'a dyn Broken, b: &'a dyn Broken) -> Self {
        Self::new().with(1.0, a).with(-1.0, b)
    }
}

impl Default for Combination<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl Broken for Combination<'_> {
    fn eval_on(&self, e: usize, x: f64, r: usize) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.eval_on(e, x, r)).sum()
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.terms.iter().flat_map(|(_, f)| f.breakpoints()).collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

/// Which one-sided limit to take when a point sits on a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    /// Use the containing element under the half-open convention of
    /// [`Mesh1D::locate`].
    Interior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgSpace {
    mesh: Mesh1D,
    degree: usize,
}

impl DgSpace {
    pub fn new(mesh: Mesh1D, degree: usize) -> Result<Self> {
        if degree > MAX_DEGREE {
            return invalid(format!("degree {degree} exceeds the supported maximum {MAX_DEGREE}"));
        }
        Ok(Self { mesh, degree })
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dofs_per_element(&self) -> usize {
        self.degree + 1
    }

    pub fn total_dofs(&self) -> usize {
        self.mesh.num_elements() * self.dofs_per_element()
    }

    pub fn dof(&self, e: usize, j: usize) -> usize {
        e * self.dofs_per_element() + j
    }

    /// Rule used for form assembly: exact to degree `2k + 5`.
    pub fn default_rule(&self) -> QuadratureRule {
        gauss_rule(self.degree + 3).expect("positive point count")
    }

    /// `[phi_j, phi_j', phi_j'']` at `x` for the basis of element `e`.
    pub fn basis_at(&self, e: usize, x: f64) -> Vec<[f64; 3]> {
        let (l, r) = self.mesh.element(e);
        let h = r - l;
        let xi = 2.0 * (x - l) / h - 1.0;
        let s = 2.0 / h;
        legendre_derivs(self.degree, xi)
            .into_iter()
            .enumerate()
            .map(|(j, [p, dp, ddp])| {
                let c = ((2 * j + 1) as f64 / h).sqrt();
                [c * p, c * s * dp, c * s * s * ddp]
            })
            .collect()
    }

    /// Quadrature cells of element `e`, split at the given points.
    pub fn cells(&self, e: usize, breakpoints: &[f64]) -> Vec<(f64, f64)> {
        element_cells(&self.mesh, e, breakpoints)
    }

    pub fn zero(&self) -> DgFunction {
        DgFunction {
            space: self.clone(),
            coeffs: DVector::zeros(self.total_dofs()),
        }
    }

    pub fn function(&self, coeffs: DVector<f64>) -> Result<DgFunction> {
        DgFunction::new(self.clone(), coeffs)
    }

    /// Per-element matrix `D[i][j] = (phi_j'', phi_i)` of the broken Laplacian.
    pub fn laplacian_block(&self, e: usize) -> DMatrix<f64> {
        let n = self.dofs_per_element();
        let (l, r) = self.mesh.element(e);
        let rule = self.default_rule();
        let mut d = DMatrix::zeros(n, n);
        for (x, w) in rule.mapped(l, r) {
            let b = self.basis_at(e, x);
            for i in 0..n {
                for j in 0..n {
                    d[(i, j)] += w * b[j][2] * b[i][0];
                }
            }
        }
        d
    }
}

/// Splits element `e` at the breakpoints lying strictly inside it.
pub(crate) fn element_cells(mesh: &Mesh1D, e: usize, breakpoints: &[f64]) -> Vec<(f64, f64)> {
    let (l, r) = mesh.element(e);
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > l && b < r)
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut start = l;
    for c in cuts {
        out.push((start, c));
        start = c;
    }
    out.push((start, r));
    out
}

/// Coefficient vector in `P_k(T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DgFunction {
    space: DgSpace,
    coeffs: DVector<f64>,
}

impl DgFunction {
    pub fn new(space: DgSpace, coeffs: DVector<f64>) -> Result<Self> {
        if coeffs.len() != space.total_dofs() {
            return invalid(format!(
                "coefficient vector has length {}, space has {} dofs",
                coeffs.len(),
                space.total_dofs()
            ));
        }
        Ok(Self { space, coeffs })
    }

    pub fn space(&self) -> &DgSpace {
        &self.space
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> DVector<f64> {
        self.coeffs
    }

    pub fn element_coeffs(&self, e: usize) -> &[f64] {
        let n = self.space.dofs_per_element();
        &self.coeffs.as_slice()[e * n..(e + 1) * n]
    }

    /// `d^r/dx^r` of the element-local polynomial selected by `side`.
    pub fn evaluate(&self, x: f64, side: Side, r: usize) -> Result<f64> {
        if r > 2 {
            return invalid(format!("derivative order {r} not supported (max 2)"));
        }
        let mesh = self.space.mesh();
        let loc = mesh.locate(x)?;
        let n = mesh.num_elements();
        let e = if loc.vertex_distance == 0.0 {
            let v = loc.nearest_vertex;
            match side {
                Side::Left if v > 0 => v - 1,
                Side::Left => 0,
                Side::Right if v < n => v,
                Side::Right => n - 1,
                Side::Interior => loc.element,
            }
        } else {
            loc.element
        };
        Ok(self.eval_on(e, x, r))
    }

    pub fn trace_data(&self, node: usize) -> TraceData {
        trace_of(self, self.space.mesh(), node)
    }

    /// Broken Laplacian, exact in `P_k(T)`.
    pub fn broken_laplacian(&self) -> DgFunction {
        let n = self.space.dofs_per_element();
        let mut out = DVector::zeros(self.coeffs.len());
        for e in 0..self.space.mesh().num_elements() {
            let d = self.space.laplacian_block(e);
            let c = DVector::from_column_slice(self.element_coeffs(e));
            out.rows_mut(e * n, n).copy_from(&(d * c));
        }
        DgFunction {
            space: self.space.clone(),
            coeffs: out,
        }
    }
}

impl Broken for DgFunction {
    fn eval_on(&self, e: usize, x: f64, r: usize) -> f64 {
        self.space
            .basis_at(e, x)
            .iter()
            .zip(self.element_coeffs(e))
            .map(|(b, c)| c * b[r])
            .sum()
    }
}

/// One-sided traces and jump/average data at a vertex.
///
/// Interior nodes use `[v] = v⁻ - v⁺` and `{v} = (v⁻ + v⁺) / 2`, where `⁻` is
/// the left element. Boundary nodes use `{v} = v` and `[v] = v n` with the
/// outward normal `n = ∓1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceData {
    pub node: usize,
    pub value_minus: Option<f64>,
    pub value_plus: Option<f64>,
    pub deriv_minus: Option<f64>,
    pub deriv_plus: Option<f64>,
    pub jump: f64,
    pub average: f64,
    pub grad_jump: f64,
    pub grad_average: f64,
}

pub fn trace_of(f: &dyn Broken, mesh: &Mesh1D, node: usize) -> TraceData {
    let nd = mesh.node(node);
    let x = mesh.vertices()[node];
    let minus = nd.left.map(|e| (f.eval_on(e, x, 0), f.eval_on(e, x, 1)));
    let plus = nd.right.map(|e| (f.eval_on(e, x, 0), f.eval_on(e, x, 1)));
    let (jump, average, grad_jump, grad_average) = match (minus, plus) {
        (Some((vm, dm)), Some((vp, dp))) => (vm - vp, 0.5 * (vm + vp), dm - dp, 0.5 * (dm + dp)),
        (None, Some((v, d))) => (-v, v, -d, d),
        (Some((v, d)), None) => (v, v, d, d),
        (None, None) => unreachable!("every vertex touches an element"),
    };
    TraceData {
        node,
        value_minus: minus.map(|p| p.0),
        value_plus: plus.map(|p| p.0),
        deriv_minus: minus.map(|p| p.1),
        deriv_plus: plus.map(|p| p.1),
        jump,
        average,
        grad_jump,
        grad_average,
    }
}

/// Element-wise L² projection of `g` onto `space`. Cells are split at
/// `breakpoints`; each cell uses `k + 3 + boost` Gauss points.
pub fn project_l2(
    g: impl Fn(f64) -> f64,
    space: &DgSpace,
    boost: usize,
    breakpoints: &[f64],
) -> DgFunction {
    let rule = gauss_rule(space.degree() + 3 + boost).expect("positive point count");
    let n = space.dofs_per_element();
    let mut coeffs = DVector::zeros(space.total_dofs());
    for e in 0..space.mesh().num_elements() {
        for (a, b) in space.cells(e, breakpoints) {
            for (x, w) in rule.mapped(a, b) {
                let gx = g(x);
                for (j, phi) in space.basis_at(e, x).iter().enumerate() {
                    coeffs[e * n + j] += w * gx * phi[0];
                }
            }
        }
    }
    DgFunction {
        space: space.clone(),
        coeffs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(n: usize, k: usize) -> DgSpace {
        DgSpace::new(Mesh1D::uniform(n, (0.0, 1.0)).unwrap(), k).unwrap()
    }

    #[test]
    fn orthonormal_on_every_element() {
        let mesh = Mesh1D::perturbed(7, (0.0, 2.0), 0.3, 5).unwrap();
        for k in 0..=6 {
            let s = DgSpace::new(mesh.clone(), k).unwrap();
            let rule = gauss_rule(k + 2).unwrap();
            for e in 0..mesh.num_elements() {
                let (l, r) = mesh.element(e);
                let mut g = DMatrix::<f64>::zeros(k + 1, k + 1);
                for (x, w) in rule.mapped(l, r) {
                    let b = s.basis_at(e, x);
                    for i in 0..=k {
                        for j in 0..=k {
                            g[(i, j)] += w * b[i][0] * b[j][0];
                        }
                    }
                }
                assert!((g - DMatrix::identity(k + 1, k + 1)).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn reproduces_monomials() {
        let s = DgSpace::new(Mesh1D::perturbed(5, (0.0, 1.0), 0.2, 3).unwrap(), 4).unwrap();
        for p in 0..=4 {
            let f = project_l2(|x| x.powi(p), &s, 0, &[]);
            for &x in &[0.03, 0.31, 0.5, 0.77, 0.99] {
                let got = f.evaluate(x, Side::Interior, 0).unwrap();
                assert!((got - x.powi(p)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn evaluate_examples() {
        let s = space(1, 2);
        let f = project_l2(|x| x * x, &s, 0, &[]);
        assert!((f.evaluate(0.5, Side::Interior, 1).unwrap() - 1.0).abs() < 1e-12);
        assert!((f.evaluate(0.2, Side::Interior, 2).unwrap() - 2.0).abs() < 1e-12);
        assert!(f.evaluate(1.2, Side::Interior, 0).is_err());

        let s1 = space(1, 1);
        let lin = project_l2(|x| x, &s1, 0, &[]);
        assert_eq!(lin.evaluate(0.4, Side::Interior, 2).unwrap(), 0.0);
    }

    fn step() -> DgFunction {
        let s = space(2, 2);
        project_l2(|x| if x < 0.5 { 1.0 } else { 0.0 }, &s, 0, &[])
    }

    #[test]
    fn one_sided_limits() {
        let f = step();
        assert!((f.evaluate(0.5, Side::Left, 0).unwrap() - 1.0).abs() < 1e-12);
        assert!(f.evaluate(0.5, Side::Right, 0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn trace_interior_step() {
        let t = step().trace_data(1);
        assert!((t.jump - 1.0).abs() < 1e-12);
        assert!((t.average - 0.5).abs() < 1e-12);
        assert!(t.grad_jump.abs() < 1e-12);
        assert!(t.grad_average.abs() < 1e-12);
    }

    #[test]
    fn trace_boundary_conventions() {
        let f = project_l2(|x| x, &space(1, 1), 0, &[]);
        let left = f.trace_data(0);
        assert!(left.jump.abs() < 1e-12);
        assert!((left.grad_average - 1.0).abs() < 1e-12);
        assert!((left.grad_jump + 1.0).abs() < 1e-12);
        assert!(left.value_minus.is_none());
        let right = f.trace_data(1);
        assert!((right.jump - 1.0).abs() < 1e-12);
        assert!((right.average - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k0_projection_is_the_mean() {
        let s = space(2, 0);
        let xbar = 0.3;
        let f = project_l2(|x| if x < xbar { 1.0 } else { 0.0 }, &s, 0, &[xbar]);
        // mean over (0, 0.5) is 0.3 / 0.5
        assert!((f.evaluate(0.1, Side::Interior, 0).unwrap() - 0.6).abs() < 1e-13);
        assert!(f.evaluate(0.7, Side::Interior, 0).unwrap().abs() < 1e-13);
    }

    #[test]
    fn projection_is_idempotent() {
        let s = DgSpace::new(Mesh1D::perturbed(6, (0.0, 1.0), 0.3, 11).unwrap(), 3).unwrap();
        let f = project_l2(|x| (3.0 * x).sin() + x.powi(5), &s, 2, &[]);
        // re-project element by element
        let mut again = DVector::zeros(s.total_dofs());
        let rule = gauss_rule(8).unwrap();
        for e in 0..6 {
            let (l, r) = s.mesh().element(e);
            for (x, w) in rule.mapped(l, r) {
                let v = f.eval_on(e, x, 0);
                for (j, b) in s.basis_at(e, x).iter().enumerate() {
                    again[s.dof(e, j)] += w * v * b[0];
                }
            }
        }
        assert!((again - f.coeffs()).amax() < 1e-12);
    }

    #[test]
    fn sine_projection_converges_at_k_plus_one() {
        // fine-quadrature L2 error as the oracle
        let errs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let s = space(n, 2);
                let g = |x: f64| (std::f64::consts::PI * x).sin();
                let f = project_l2(g, &s, 0, &[]);
                let rule = gauss_rule(20).unwrap();
                (0..n)
                    .map(|e| {
                        let (l, r) = s.mesh().element(e);
                        rule.integrate(l, r, |x| (g(x) - f.eval_on(e, x, 0)).powi(2))
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let eoc = (errs[1] / errs[2]).log2();
        assert!((eoc - 3.0).abs() < 0.1, "eoc {eoc}");
    }

    #[test]
    fn gradient_energy_two_routes() {
        // quadrature of f'^2 vs the coefficient route through the Laplacian-free
        // reference derivative matrix
        let s = DgSpace::new(Mesh1D::perturbed(5, (0.0, 1.0), 0.25, 2).unwrap(), 3).unwrap();
        let coeffs = DVector::from_fn(s.total_dofs(), |i, _| ((i * 7 + 3) % 11) as f64 - 5.0);
        let f = s.function(coeffs).unwrap();
        let rule = gauss_rule(10).unwrap();
        let mut by_quad = 0.0;
        let mut by_coeffs = 0.0;
        for e in 0..5 {
            let (l, r) = s.mesh().element(e);
            by_quad += rule.integrate(l, r, |x| f.eval_on(e, x, 1).powi(2));
            // derivative coefficients in the orthonormal basis of P_k
            let mut dc = vec![0.0; 4];
            for (x, w) in s.default_rule().mapped(l, r) {
                let b = s.basis_at(e, x);
                let d: f64 = (0..4).map(|j| f.element_coeffs(e)[j] * b[j][1]).sum();
                for i in 0..4 {
                    dc[i] += w * d * b[i][0];
                }
            }
            by_coeffs += dc.iter().map(|c| c * c).sum::<f64>();
        }
        assert!((by_quad - by_coeffs).abs() < 1e-12 * by_quad);
    }

    #[test]
    fn broken_laplacian_of_cubic() {
        let s = DgSpace::new(Mesh1D::perturbed(4, (0.0, 1.0), 0.2, 8).unwrap(), 3).unwrap();
        let f = project_l2(|x| x.powi(3) - 2.0 * x * x, &s, 0, &[]);
        let lap = f.broken_laplacian();
        for &x in &[0.1, 0.45, 0.8] {
            let got = lap.evaluate(x, Side::Interior, 0).unwrap();
            assert!((got - (6.0 * x - 4.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn wrong_length_rejected() {
        let s = space(3, 2);
        assert!(s.function(DVector::zeros(8)).is_err());
        assert!(s.zero().evaluate(0.5, Side::Interior, 3).is_err());
    }
}

//! Python bindings: meshes, broken spaces, the IP forms, reconstructions,
//! problem drivers and the spectral analysis.

use std::cell::RefCell;
use std::collections::HashMap;

use ipdg1d::analysis::{self, CheckConfig};
use ipdg1d::forms::norms_of;
use ipdg1d::problems::{self, ProblemSpec};
use ipdg1d::reconstruct::{self, operator_matrices};
use ipdg1d::{C1Function, C1Space, DgFunction, DgSpace, Error, Mesh1D, PenaltyParams, Side};
use nalgebra::DVector;
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::SkeletonCollision { .. } => PyValueError::new_err(e.to_string()),
        Error::CoercivityFailure { .. } => PyArithmeticError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn params(sigma0: f64, sigma1: f64) -> PyResult<PenaltyParams> {
    PenaltyParams::new(sigma0, sigma1).map_err(py_err)
}

fn domain_spec(problem: &str, xbar: f64) -> PyResult<ProblemSpec> {
    Ok(match problem {
        "smooth" => ProblemSpec::sine((0.0, 1.0)),
        "delta" => ProblemSpec::delta(xbar),
        "delta-prime" => ProblemSpec::delta_prime(xbar),
        other => return Err(PyValueError::new_err(format!("unknown problem {other:?}"))),
    })
}

#[pyclass(name = "Mesh1D", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMesh(Mesh1D);

#[pymethods]
impl PyMesh {
    #[new]
    fn new(vertices: Vec<f64>) -> PyResult<Self> {
        Mesh1D::from_vertices(vertices).map(Self).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (n, a = 0.0, b = 1.0))]
    fn uniform(n: usize, a: f64, b: f64) -> PyResult<Self> {
        Mesh1D::uniform(n, (a, b)).map(Self).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (n, jitter, seed, a = 0.0, b = 1.0))]
    fn perturbed(n: usize, jitter: f64, seed: u64, a: f64, b: f64) -> PyResult<Self> {
        Mesh1D::perturbed(n, (a, b), jitter, seed).map(Self).map_err(py_err)
    }

    fn refine(&self) -> Self {
        Self(self.0.refine())
    }

    #[getter]
    fn vertices(&self) -> Vec<f64> {
        self.0.vertices().to_vec()
    }

    #[getter]
    fn num_elements(&self) -> usize {
        self.0.num_elements()
    }

    #[getter]
    fn h_max(&self) -> f64 {
        self.0.h_max()
    }

    #[getter]
    fn h_min(&self) -> f64 {
        self.0.h_min()
    }

    /// `(element, nearest_vertex, vertex_distance)` of `x`.
    fn locate(&self, x: f64) -> PyResult<(usize, usize, f64)> {
        let l = self.0.locate(x).map_err(py_err)?;
        Ok((l.element, l.nearest_vertex, l.vertex_distance))
    }

    fn __repr__(&self) -> String {
        format!("Mesh1D(num_elements={}, h_max={})", self.0.num_elements(), self.0.h_max())
    }
}

#[pyclass(name = "DgSpace", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDgSpace(DgSpace);

#[pymethods]
impl PyDgSpace {
    #[new]
    fn new(mesh: &PyMesh, k: usize) -> PyResult<Self> {
        DgSpace::new(mesh.0.clone(), k).map(Self).map_err(py_err)
    }

    #[getter]
    fn degree(&self) -> usize {
        self.0.degree()
    }

    #[getter]
    fn total_dofs(&self) -> usize {
        self.0.total_dofs()
    }

    fn function(&self, coeffs: Vec<f64>) -> PyResult<PyDgFunction> {
        self.0
            .function(DVector::from_vec(coeffs))
            .map(PyDgFunction)
            .map_err(py_err)
    }

    /// Element-wise L² projection of a Python callable.
    #[pyo3(signature = (f, boost = 4))]
    fn project(&self, f: &Bound<'_, PyAny>, boost: usize) -> PyResult<PyDgFunction> {
        let failure: RefCell<Option<PyErr>> = RefCell::new(None);
        let u = ipdg1d::project_l2(
            |x| match f.call1((x,)).and_then(|v| v.extract::<f64>()) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            },
            &self.0,
            boost,
            &[],
        );
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(PyDgFunction(u)),
        }
    }

    /// Assembled matrices as nested lists, keyed by name.
    fn matrices(&self, sigma0: f64, sigma1: f64) -> PyResult<HashMap<String, Vec<Vec<f64>>>> {
        let f = ipdg1d::assemble_ip(&self.0, params(sigma0, sigma1)?);
        let rows = |m: &nalgebra::DMatrix<f64>| m.row_iter().map(|r| r.iter().copied().collect()).collect();
        Ok(HashMap::from([
            ("a_primal".into(), rows(&f.a_primal)),
            ("a_ibp".into(), rows(&f.a_ibp)),
            ("m0".into(), rows(&f.m0)),
            ("m1".into(), rows(&f.m1)),
            ("m2".into(), rows(&f.m2)),
        ]))
    }
}

fn parse_side(side: &str) -> PyResult<Side> {
    match side {
        "left" => Ok(Side::Left),
        "right" => Ok(Side::Right),
        "interior" => Ok(Side::Interior),
        other => Err(PyValueError::new_err(format!("side must be left, right or interior, got {other:?}"))),
    }
}

#[pyclass(name = "DgFunction", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDgFunction(DgFunction);

#[pymethods]
impl PyDgFunction {
    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.0.coeffs().iter().copied().collect()
    }

    #[pyo3(signature = (x, side = "interior", r = 0))]
    fn evaluate(&self, x: f64, side: &str, r: usize) -> PyResult<f64> {
        self.0.evaluate(x, parse_side(side)?, r).map_err(py_err)
    }

    /// `{"znorm", "enorm", "eenorm", "l2"}`.
    fn norms(&self) -> HashMap<&'static str, f64> {
        let n = norms_of(&self.0, self.0.space(), 4);
        HashMap::from([("znorm", n.znorm), ("enorm", n.enorm), ("eenorm", n.eenorm), ("l2", n.l2)])
    }
}

#[pyclass(name = "C1Space", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyC1Space(C1Space);

#[pymethods]
impl PyC1Space {
    #[new]
    fn new(mesh: &PyMesh, k: usize) -> PyResult<Self> {
        C1Space::new(mesh.0.clone(), k).map(Self).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.0.degree()
    }

    fn averaging_reconstruct(&self, u: &PyDgFunction) -> PyResult<PyC1Function> {
        reconstruct::averaging_reconstruct(&u.0, &self.0)
            .map(PyC1Function)
            .map_err(py_err)
    }

    fn ritz_reconstruct(&self, u: &PyDgFunction) -> PyResult<PyC1Function> {
        reconstruct::ritz_reconstruct(&u.0, &self.0).map(PyC1Function).map_err(py_err)
    }
}

#[pyclass(name = "C1Function", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyC1Function(C1Function);

#[pymethods]
impl PyC1Function {
    #[getter]
    fn dofs(&self) -> Vec<f64> {
        self.0.dofs().iter().copied().collect()
    }

    #[pyo3(signature = (x, r = 0))]
    fn evaluate(&self, x: f64, r: usize) -> PyResult<f64> {
        self.0.evaluate(x, r).map_err(py_err)
    }
}

/// Convergence study on uniform meshes of (0, 1); one dict per level.
#[pyfunction]
#[pyo3(signature = (problem, meshes, k = 2, sigma0 = 40.0, sigma1 = 1.0, xbar = 0.6366))]
fn convergence_study(
    problem: &str,
    meshes: Vec<usize>,
    k: usize,
    sigma0: f64,
    sigma1: f64,
    xbar: f64,
) -> PyResult<Vec<HashMap<&'static str, f64>>> {
    let spec = domain_spec(problem, xbar)?;
    let recs = problems::convergence_study(&spec, &meshes, (0.0, 1.0), k, params(sigma0, sigma1)?).map_err(py_err)?;
    Ok(recs
        .iter()
        .map(|r| {
            HashMap::from([
                ("n_elements", r.n_elements as f64),
                ("h_max", r.h_max),
                ("dofs", r.dofs as f64),
                ("err_znorm", r.err_znorm),
                ("err_enorm", r.err_enorm),
                ("err_eenorm", r.err_eenorm),
                ("err_l2", r.err_l2),
                ("err_scaled", r.err_scaled),
            ])
        })
        .collect())
}

/// Discrete solution on `mesh`.
#[pyfunction]
#[pyo3(signature = (problem, mesh, k = 2, sigma0 = 40.0, sigma1 = 1.0, xbar = 0.6366))]
fn solve(problem: &str, mesh: &PyMesh, k: usize, sigma0: f64, sigma1: f64, xbar: f64) -> PyResult<PyDgFunction> {
    let spec = domain_spec(problem, xbar)?;
    problems::solve(&spec, &mesh.0, k, params(sigma0, sigma1)?)
        .map(|s| PyDgFunction(s.u_h))
        .map_err(py_err)
}

/// Inf-sup sweep on uniform meshes of (0, 1); one dict per level.
#[pyfunction]
#[pyo3(signature = (meshes, k = 2, sigma0 = 40.0, sigma1 = 1.0))]
fn infsup_sweep(meshes: Vec<usize>, k: usize, sigma0: f64, sigma1: f64) -> PyResult<Vec<HashMap<&'static str, f64>>> {
    let r = analysis::infsup_sweep(&meshes, (0.0, 1.0), k, params(sigma0, sigma1)?).map_err(py_err)?;
    Ok(r.levels
        .iter()
        .map(|l| {
            HashMap::from([
                ("n_elements", l.n_elements as f64),
                ("h_max", l.h_max),
                ("gamma_V", l.gamma_v),
                ("gamma_W", l.gamma_w),
                ("lambda_coercivity", l.lambda_coercivity),
                ("sigma_max_continuity", l.sigma_max_continuity),
            ])
        })
        .collect())
}

/// Effective dimension of `V_h + S`.
#[pyfunction]
#[pyo3(signature = (mesh, k, cutoff = 1e-10))]
fn wh_dimension(mesh: &PyMesh, k: usize, cutoff: f64) -> PyResult<usize> {
    let space = DgSpace::new(mesh.0.clone(), k).map_err(py_err)?;
    let c1 = C1Space::new(mesh.0.clone(), k).map_err(py_err)?;
    let ops = operator_matrices(&space, &c1, PenaltyParams::default_for(k)).map_err(py_err)?;
    analysis::WhSpace::from_operators(&ops, cutoff)
        .map(|w| w.effective_dim)
        .map_err(py_err)
}

/// Property suite; list of `(property, passed, observed, bound)`.
#[pyfunction]
#[pyo3(signature = (k = 2, sigma0 = 40.0, sigma1 = 1.0, meshes = vec![8, 16, 32, 64], seed = 7, samples = 100))]
fn property_suite(
    k: usize,
    sigma0: f64,
    sigma1: f64,
    meshes: Vec<usize>,
    seed: u64,
    samples: usize,
) -> PyResult<Vec<(String, bool, f64, f64)>> {
    let cfg = CheckConfig {
        k,
        params: params(sigma0, sigma1)?,
        meshes,
        domain: (0.0, 1.0),
        seed,
        samples,
    };
    let (_, results) = analysis::property_suite(&cfg).map_err(py_err)?;
    Ok(results
        .into_iter()
        .map(|r| (r.property, r.passed, r.observed, r.bound))
        .collect())
}

#[pymodule]
pub fn pyipdg1d(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyDgSpace>()?;
    m.add_class::<PyDgFunction>()?;
    m.add_class::<PyC1Space>()?;
    m.add_class::<PyC1Function>()?;
    m.add_function(wrap_pyfunction!(convergence_study, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(infsup_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(wh_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(property_suite, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

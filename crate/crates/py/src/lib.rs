//! Python bindings: weights, condition profiles, the operator on radial
//! functions, norm estimates and the scenario runner.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use radavg::conditions::{carleson_identity_residual, self_improve_check, ConditionKind, ConditionRequest};
use radavg::numerics::grid::{PolarGrid, RadialGrid, Radius};
use radavg::operator::{
    apply_t, default_rt_grid, estimate_strong_norm, estimate_weak_norm, RadialFunctionField, TestFamily,
};
use radavg::scenario::{builtin, list_builtins, run_scenario, RunOptions};
use radavg::weights::{
    classify_dcheck_sweep, classify_dhat, classify_regular, make_counterexample_nu, parse_weight, RadialWeight,
    WeightTriple,
};
use radavg::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::NonConvergence(_) | Error::Truncation(_) | Error::Degenerate(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py(py: Python<'_>, v: &Value) -> PyResult<PyObject> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_py(py),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_py(py),
            None => n.as_f64().unwrap_or(f64::NAN).into_py(py),
        },
        Value::String(s) => s.into_py(py),
        Value::Array(a) => {
            let l = PyList::empty_bound(py);
            for x in a {
                l.append(to_py(py, x)?)?;
            }
            l.into_py(py)
        }
        Value::Object(m) => {
            let d = PyDict::new_bound(py);
            for (k, x) in m {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_py(py)
        }
    })
}

fn json<T: serde::Serialize>(py: Python<'_>, x: &T) -> PyResult<PyObject> {
    let v = serde_json::to_value(x).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &v)
}

fn grid(levels: u32) -> PyResult<RadialGrid> {
    RadialGrid::new(levels, RadialGrid::DEFAULT_POINTS_PER_LEVEL).map_err(err)
}

/// A radial weight ω on the unit disc.
#[pyclass(name = "Weight", frozen)]
#[derive(Clone)]
struct PyWeight(RadialWeight);

#[pymethods]
impl PyWeight {
    /// Inline family spec such as `power_log(a=1,b=0)` or a config path.
    #[staticmethod]
    fn parse(spec: &str) -> PyResult<Self> {
        parse_weight(spec).map(PyWeight).map_err(err)
    }

    #[staticmethod]
    fn one() -> Self {
        PyWeight(RadialWeight::one())
    }

    #[staticmethod]
    #[pyo3(signature = (a, b=0.0))]
    fn power_log(a: f64, b: f64) -> PyResult<Self> {
        RadialWeight::power_log(a, b).map(PyWeight).map_err(err)
    }

    #[staticmethod]
    fn monomial(c: f64) -> PyResult<Self> {
        RadialWeight::monomial(c).map(PyWeight).map_err(err)
    }

    /// ν built from a doubling `base` with reverse-doubling parameter `k`.
    #[staticmethod]
    #[pyo3(signature = (base, k=2.0))]
    fn counterexample(base: &PyWeight, k: f64) -> PyResult<Self> {
        make_counterexample_nu(&base.0, k).map(PyWeight).map_err(err)
    }

    fn __call__(&self, s: f64) -> PyResult<f64> {
        self.0.eval(s).map_err(err)
    }

    /// ŵ(r) = ∫_r^1 ω.
    fn tail(&self, r: f64) -> PyResult<f64> {
        self.0.tail(r).map_err(err)
    }

    /// ∫_t^1 s^x ω(s) ds.
    fn moment(&self, t: f64, x: f64) -> PyResult<f64> {
        self.0.moment(t, x).map_err(err)
    }

    /// Doubling, reverse-doubling and regularity reports.
    #[pyo3(signature = (levels=40))]
    fn classify(&self, py: Python<'_>, levels: u32) -> PyResult<PyObject> {
        let g = grid(levels)?;
        let w = &self.0;
        let (dhat, dcheck, reg) = py
            .allow_threads(|| Ok::<_, Error>((classify_dhat(w, &g)?, classify_dcheck_sweep(w, &g)?, classify_regular(w, &g)?)))
            .map_err(err)?;
        let d = PyDict::new_bound(py);
        d.set_item("dhat", json(py, &dhat)?)?;
        d.set_item("dcheck", json(py, &dcheck)?)?;
        d.set_item("regular", json(py, &reg)?)?;
        Ok(d.into_py(py))
    }

    fn __repr__(&self) -> String {
        format!("Weight({})", self.0)
    }
}

fn triple(omega: &PyWeight, nu: Option<&PyWeight>, eta: Option<&PyWeight>) -> WeightTriple {
    let nu = nu.map_or_else(|| omega.0.clone(), |w| w.0.clone());
    let eta = eta.map_or_else(|| nu.clone(), |w| w.0.clone());
    WeightTriple::new(omega.0.clone(), nu, eta)
}

/// Profile of one condition (`mp`, `dp`, `np`, `mpeps`, `carleson`, `nec1`,
/// `nec2`) as a dict with `nodes`, `values`, `running_sup` and `verdict`.
#[pyfunction]
#[pyo3(signature = (which, omega, nu=None, eta=None, p=2.0, q=None, eps=None, levels=40))]
#[allow(clippy::too_many_arguments)]
fn condition(
    py: Python<'_>,
    which: &str,
    omega: &PyWeight,
    nu: Option<&PyWeight>,
    eta: Option<&PyWeight>,
    p: f64,
    q: Option<f64>,
    eps: Option<f64>,
    levels: u32,
) -> PyResult<PyObject> {
    let kind = ConditionKind::parse(which, eps, q).map_err(err)?;
    let req = ConditionRequest::new(kind, triple(omega, nu, eta), p, grid(levels)?);
    let prof = py.allow_threads(|| req.evaluate()).map_err(err)?;
    json(py, &prof)
}

/// `T_ω f(z)` for a radial `f` given as a Python callable of the radius.
#[pyfunction]
fn apply_radial(py: Python<'_>, omega: &PyWeight, f: PyObject, z: Complex64) -> PyResult<Complex64> {
    let field = RadialFunctionField::radial(PolarGrid::default(), "python", vec![], move |r: Radius| {
        Python::with_gil(|py| f.call1(py, (r.s(),)).and_then(|v| v.extract::<f64>(py)).unwrap_or(f64::NAN))
    });
    let w = &omega.0;
    py.allow_threads(|| apply_t(w, &field, z)).map_err(err)
}

/// Lower bound for `‖T_ω‖_{L^p_ν → L^p_η}` over constants, Muckenhoupt
/// test functions and `steps` random step functions.
#[pyfunction]
#[pyo3(signature = (omega, nu=None, eta=None, p=2.0, steps=16, seed=0, levels=40))]
fn strong_norm(
    py: Python<'_>,
    omega: &PyWeight,
    nu: Option<&PyWeight>,
    eta: Option<&PyWeight>,
    p: f64,
    steps: usize,
    seed: u64,
    levels: u32,
) -> PyResult<PyObject> {
    let t = triple(omega, nu, eta);
    let g = grid(levels)?;
    let fams = [
        TestFamily::Constants,
        TestFamily::MuckenhouptTest,
        TestFamily::RandomSteps { seed, count: steps },
    ];
    let est = py.allow_threads(|| estimate_strong_norm(&t, p, &fams, &g)).map_err(err)?;
    json(py, &est)
}

/// Lower bound for the weak-type norm from the extremal functions.
#[pyfunction]
#[pyo3(signature = (omega, nu=None, eta=None, p=2.0, levels=12))]
fn weak_norm(py: Python<'_>, omega: &PyWeight, nu: Option<&PyWeight>, eta: Option<&PyWeight>, p: f64, levels: u32) -> PyResult<PyObject> {
    let t = triple(omega, nu, eta);
    let rt = default_rt_grid(&RadialGrid::new(levels, 1).map_err(err)?);
    let est = py.allow_threads(|| estimate_weak_norm(&t, p, &rt)).map_err(err)?;
    json(py, &est)
}

#[pyfunction]
fn carleson_residual(py: Python<'_>, omega: &PyWeight, nu: &PyWeight, p: f64, a: f64) -> PyResult<f64> {
    py.allow_threads(|| carleson_identity_residual(&omega.0, &nu.0, p, a)).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (omega, nu, p, eps, levels=40))]
fn sandwich(py: Python<'_>, omega: &PyWeight, nu: &PyWeight, p: f64, eps: f64, levels: u32) -> PyResult<PyObject> {
    let g = grid(levels)?;
    let rep = py.allow_threads(|| self_improve_check(&omega.0, &nu.0, p, eps, &g)).map_err(err)?;
    json(py, &rep)
}

#[pyfunction]
fn builtins(py: Python<'_>) -> PyResult<PyObject> {
    json(py, &list_builtins().map_err(err)?)
}

/// Runs a built-in scenario; returns the summary dict.
#[pyfunction]
#[pyo3(signature = (name, levels=40, out=None, norms=true))]
fn scenario(py: Python<'_>, name: &str, levels: u32, out: Option<std::path::PathBuf>, norms: bool) -> PyResult<PyObject> {
    let s = builtin(name).map_err(err)?;
    let opts = RunOptions {
        grid: grid(levels)?,
        out_dir: out,
        norms,
        ..RunOptions::default()
    };
    let rep = py.allow_threads(|| run_scenario(&s, &opts)).map_err(err)?;
    json(py, &rep)
}

#[pymodule]
#[pyo3(name = "radavg")]
fn radavg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWeight>()?;
    m.add_function(wrap_pyfunction!(condition, m)?)?;
    m.add_function(wrap_pyfunction!(apply_radial, m)?)?;
    m.add_function(wrap_pyfunction!(strong_norm, m)?)?;
    m.add_function(wrap_pyfunction!(weak_norm, m)?)?;
    m.add_function(wrap_pyfunction!(carleson_residual, m)?)?;
    m.add_function(wrap_pyfunction!(sandwich, m)?)?;
    m.add_function(wrap_pyfunction!(builtins, m)?)?;
    m.add_function(wrap_pyfunction!(scenario, m)?)?;
    Ok(())
}

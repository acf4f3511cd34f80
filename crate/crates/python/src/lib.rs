use std::collections::BTreeMap;

use ::anisolab as core;
use core::bound::{self, BoundData, BoundQuery, OptimizeOptions, Variant, Weight};
use core::ergostat::{self, Ensemble, Observable};
use core::normlab::{self, Frame, IndicatorSet, MultiplierSpec};
use core::pamap::{self, PiecewiseAffineMap};
use core::ulam;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: core::error::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Converts any serializable report into plain Python objects.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse<T: std::str::FromStr<Err = core::error::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// A validated-on-demand piecewise-affine map.
#[pyclass(name = "Map", module = "anisolab", frozen)]
struct PyMap {
    inner: PiecewiseAffineMap,
}

#[pymethods]
impl PyMap {
    #[staticmethod]
    #[pyo3(signature = (name, params=None))]
    fn builtin(name: &str, params: Option<BTreeMap<String, String>>) -> PyResult<Self> {
        let inner = pamap::builtin(name, &params.unwrap_or_default()).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn builtin_names() -> Vec<&'static str> {
        pamap::builtin_names().to_vec()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: pamap::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        pamap::to_json(&self.inner)
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn branch_count(&self) -> usize {
        self.inner.branches().len()
    }

    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.validate())
    }

    #[pyo3(signature = (n_max, budget=core::complexity::DEFAULT_CELL_BUDGET))]
    fn complexity<'py>(&self, py: Python<'py>, n_max: usize, budget: usize) -> PyResult<Bound<'py, PyAny>> {
        let g = py.detach(|| core::complexity::growth(&self.inner, n_max, budget)).map_err(err)?;
        to_py(py, &g)
    }

    fn __repr__(&self) -> String {
        format!("Map(name={:?}, dim={}, branches={})", self.inner.name(), self.inner.dim(), self.inner.branches().len())
    }
}

#[pyfunction]
#[pyo3(signature = (map, p, t=0.0, t_minus=0.0, t_plus=0.0, n=8, variant="both", weight="transfer", alpha=1.0))]
#[allow(clippy::too_many_arguments)]
fn bound_evaluate<'py>(
    py: Python<'py>,
    map: &PyMap,
    p: f64,
    t: f64,
    t_minus: f64,
    t_plus: f64,
    n: usize,
    variant: &str,
    weight: &str,
    alpha: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let q = BoundQuery {
        variant: parse::<Variant>(variant)?,
        p,
        t,
        t_minus,
        t_plus,
        alpha,
        n,
        weight: parse::<Weight>(weight)?,
    };
    let r = py.detach(|| bound::evaluate(&map.inner, &q)).map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (map, n=8, variant="both", weight="transfer", points=32, levels=3, margin=1e-3))]
#[allow(clippy::too_many_arguments)]
fn bound_optimize<'py>(
    py: Python<'py>,
    map: &PyMap,
    n: usize,
    variant: &str,
    weight: &str,
    points: usize,
    levels: usize,
    margin: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let (v, w) = (parse::<Variant>(variant)?, parse::<Weight>(weight)?);
    let opts = OptimizeOptions {
        levels,
        points,
        margin,
        ..OptimizeOptions::default()
    };
    let r = py
        .detach(|| BoundData::compute(&map.inner, n).and_then(|d| bound::optimize(&d, v, w, n, &opts)))
        .map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
fn contracting_pair(p: f64, t_minus: f64) -> PyResult<f64> {
    bound::preset("contracting_pair").and_then(|b| b.contracting_pair(p, t_minus)).map_err(err)
}

/// Exact Ulam matrix of a map on N^d cells.
#[pyclass(name = "UlamMatrix", module = "anisolab", frozen)]
struct PyUlam {
    inner: ulam::UlamMatrix,
}

#[pymethods]
impl PyUlam {
    #[new]
    fn new(py: Python<'_>, map: &PyMap, n: usize) -> PyResult<Self> {
        let inner = py.detach(|| ulam::UlamMatrix::build(&map.inner, n)).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    fn is_row_stochastic(&self) -> bool {
        self.inner.is_row_stochastic()
    }

    fn to_coordinate_list(&self) -> String {
        self.inner.to_coordinate_list()
    }

    /// Leading eigenvalues as complex numbers, largest modulus first.
    #[pyo3(signature = (k=3, tol=1e-10, max_iter=5000))]
    fn leading_spectrum(&self, py: Python<'_>, k: usize, tol: f64, max_iter: usize) -> PyResult<Vec<num_complex::Complex64>> {
        let s = py.detach(|| ulam::leading_spectrum(&self.inner, k, tol, max_iter)).map_err(err)?;
        Ok(s.pairs.iter().map(|e| num_complex::Complex64::new(e.re, e.im)).collect())
    }

    /// Physical density per cell.
    fn density(&self, py: Python<'_>) -> PyResult<Vec<f64>> {
        let d = py.detach(|| ulam::physical_density(&self.inner, None, 1e-12, 100_000)).map_err(err)?;
        Ok(d.values)
    }
}

fn axis_multiplier(dim: usize, t: f64, t_minus: f64) -> PyResult<MultiplierSpec> {
    let frame = match dim {
        1 => Frame::axis(1, 0),
        2 => Frame::axis(1, 1),
        _ => return Err(PyValueError::new_err("dim must be 1 or 2")),
    };
    Ok(MultiplierSpec::new(t, t_minus, frame))
}

/// Discrete norms of the Dirac mass at 0 over the given resolutions.
#[pyfunction]
#[pyo3(signature = (p, t, t_minus, resolutions, dim=2))]
fn probe_dirac(p: f64, t: f64, t_minus: f64, resolutions: Vec<usize>, dim: usize) -> PyResult<Vec<f64>> {
    let m = axis_multiplier(dim, t, t_minus)?;
    let s = normlab::probe_dirac(p, &m, &resolutions).map_err(err)?;
    Ok(s.iter().map(|r| r.norm).collect())
}

/// Discrete norms of the indicator of [lo, hi) on the unit circle.
#[pyfunction]
#[pyo3(signature = (lo, hi, p, t, resolutions))]
fn probe_indicator(lo: f64, hi: f64, p: f64, t: f64, resolutions: Vec<usize>) -> PyResult<Vec<f64>> {
    let m = axis_multiplier(1, t, 0.0)?;
    let s = normlab::probe_indicator(&IndicatorSet::Interval(lo, hi), p, &m, &resolutions).map_err(err)?;
    Ok(s.iter().map(|r| r.norm).collect())
}

#[pyfunction]
#[pyo3(signature = (map, f, seed=0, starts=100, length=100_000, burn_in=100))]
fn birkhoff<'py>(
    py: Python<'py>,
    map: &PyMap,
    f: &str,
    seed: u64,
    starts: usize,
    length: usize,
    burn_in: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let obs = Observable::parse(f, map.inner.dim()).map_err(err)?;
    let ens = Ensemble {
        seed,
        starts,
        length,
        burn_in,
    };
    let r = py.detach(|| ergostat::birkhoff(&map.inner, &obs, &ens)).map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (map, f, g=None, n_max=20, seed=0, starts=100, length=100_000, burn_in=100))]
#[allow(clippy::too_many_arguments)]
fn correlation<'py>(
    py: Python<'py>,
    map: &PyMap,
    f: &str,
    g: Option<&str>,
    n_max: usize,
    seed: u64,
    starts: usize,
    length: usize,
    burn_in: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let dim = map.inner.dim();
    let fo = Observable::parse(f, dim).map_err(err)?;
    let go = Observable::parse(g.unwrap_or(f), dim).map_err(err)?;
    let ens = Ensemble {
        seed,
        starts,
        length,
        burn_in,
    };
    let r = py.detach(|| ergostat::correlation(&map.inner, &fo, &go, &ens, n_max)).map_err(err)?;
    to_py(py, &r)
}

#[pymodule]
fn anisolab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMap>()?;
    m.add_class::<PyUlam>()?;
    m.add_function(wrap_pyfunction!(bound_evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(bound_optimize, m)?)?;
    m.add_function(wrap_pyfunction!(contracting_pair, m)?)?;
    m.add_function(wrap_pyfunction!(probe_dirac, m)?)?;
    m.add_function(wrap_pyfunction!(probe_indicator, m)?)?;
    m.add_function(wrap_pyfunction!(birkhoff, m)?)?;
    m.add_function(wrap_pyfunction!(correlation, m)?)?;
    Ok(())
}

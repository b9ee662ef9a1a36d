use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use pluridyn::attractor::{check_trapping, counterexample_run, TrappingRegion};
use pluridyn::endomorphism::ProjectiveMap;
use pluridyn::green::{mu_sample, GreenField};
use pluridyn::HomogeneousPoint;

fn to_py(e: pluridyn::Error) -> PyErr {
    let msg = format!("{} {} {}", e.module(), e.code(), e);
    if e.is_hypothesis_failure() {
        PyValueError::new_err(msg)
    } else {
        PyRuntimeError::new_err(msg)
    }
}

fn point(coords: Vec<Complex64>) -> PyResult<HomogeneousPoint> {
    HomogeneousPoint::new(coords).map_err(to_py)
}

/// Holomorphic endomorphism of P^k given by homogeneous polynomials.
#[pyclass(name = "ProjectiveMap", frozen)]
struct PyMap {
    inner: ProjectiveMap,
}

#[pymethods]
impl PyMap {
    /// Parse the `pmap` monomial text format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self { inner: ProjectiveMap::parse(text).map_err(to_py)? })
    }

    #[staticmethod]
    fn power_map(k: usize, d: u32) -> Self {
        Self { inner: ProjectiveMap::power_map(k, d) }
    }

    #[staticmethod]
    fn perturbed_power_map(eps: f64) -> Self {
        Self { inner: ProjectiveMap::perturbed_power_map(eps) }
    }

    #[staticmethod]
    fn skew_lattes_map() -> Self {
        Self { inner: ProjectiveMap::skew_lattes_map() }
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn degree(&self) -> u32 {
        self.inner.degree()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn content_hash(&self) -> String {
        self.inner.content_hash()
    }

    /// `f^n(x)` in sup-norm normalization.
    #[pyo3(signature = (x, n=1))]
    fn iterate(&self, x: Vec<Complex64>, n: usize) -> PyResult<Vec<Complex64>> {
        Ok(self.inner.iterate(&point(x)?, n).into_coords())
    }

    /// Returns `(min_ratio, macaulay_pivot)`.
    #[pyo3(signature = (trials=2000, seed=0))]
    fn validate(&self, trials: usize, seed: u64) -> PyResult<(f64, Option<f64>)> {
        let r = self.inner.validate(trials, seed).map_err(to_py)?;
        Ok((r.min_ratio, r.macaulay_pivot))
    }

    /// Green function `g_n(x)` with its error bound.
    #[pyo3(signature = (x, depth=20))]
    fn green(&self, py: Python<'_>, x: Vec<Complex64>, depth: usize) -> PyResult<(f64, f64)> {
        let x = point(x)?;
        let f = self.inner.clone();
        Ok(py.detach(move || GreenField::new(f, depth, 1000, 0).value(&x)))
    }

    /// Points of `f^{-n}` walks approximating the equilibrium measure.
    #[pyo3(signature = (n, count, seed=0))]
    fn mu_sample(&self, py: Python<'_>, n: usize, count: usize, seed: u64) -> PyResult<Vec<Vec<Complex64>>> {
        let f = self.inner.clone();
        let m = py.detach(move || mu_sample(&f, n, count, seed)).map_err(to_py)?;
        Ok(m.atoms.into_iter().map(|(p, _)| p.into_coords()).collect())
    }

    fn __repr__(&self) -> String {
        format!("ProjectiveMap(k={}, d={})", self.inner.k(), self.inner.degree())
    }
}

/// Trapping region `{|z_axis| < t max_{i≠axis} |z_i|}`; raises on failure.
/// Returns the sampled margin.
#[pyfunction]
#[pyo3(signature = (f, t=0.2, axis=None, samples=2000, seed=0))]
fn check_cone(py: Python<'_>, f: &PyMap, t: f64, axis: Option<usize>, samples: usize, seed: u64) -> PyResult<f64> {
    let k = f.inner.k();
    let region = TrappingRegion::fiber_cone(k, axis.unwrap_or(k), t);
    let map = f.inner.clone();
    let r = py.detach(move || check_trapping(&map, &region, samples, seed)).map_err(to_py)?;
    Ok(r.margin)
}

/// Power-map example: returns `(between_gap, within_gap, star_shape_failures)`.
#[pyfunction]
#[pyo3(signature = (d=2, lines_per_axis=1, n=5, nodes=1024, seed=0))]
fn counterexample(
    py: Python<'_>,
    d: u32,
    lines_per_axis: usize,
    n: usize,
    nodes: usize,
    seed: u64,
) -> PyResult<(f64, f64, usize)> {
    let r = py.detach(move || counterexample_run(d, lines_per_axis, n, nodes, seed)).map_err(to_py)?;
    let failures = r.star_shape.iter().filter(|s| !s.passed()).count();
    Ok((r.between_cluster_gap, r.within_cluster_gap, failures))
}

/// Runs the command line with `args` (without the program name); returns the exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    py.detach(move || pluridyn::cli::main_with_args(std::iter::once("pluridyn".to_string()).chain(args)))
}

#[pymodule]
fn pluridyn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMap>()?;
    m.add_function(wrap_pyfunction!(check_cone, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}

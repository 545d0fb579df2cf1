//! Python bindings. Structured results come back as plain dicts.

use posthoc_core as core;
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;

use core::{IndexSet, Method, PValueVector, SelectionSpec, Statistic, TemplateKind, TwoSampleDataset};

fn err(e: core::Error) -> PyErr {
    match e {
        core::Error::UnknownIds(ids) => PyKeyError::new_err(format!("unknown ids: {}", ids.join(", "))),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_dict<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn pvalues(p: Vec<f64>) -> PyResult<PValueVector> {
    PValueVector::new(p).map_err(err)
}

fn selection(indices: Vec<usize>, m: usize) -> PyResult<IndexSet> {
    IndexSet::new(indices, m).map_err(err)
}

fn template(name: &str) -> PyResult<TemplateKind> {
    name.parse().map_err(err)
}

/// Simes bound on the number of false positives among `selection` (0-based indices).
#[pyfunction]
fn simes_bound(p: Vec<f64>, selection: Vec<usize>, alpha: f64) -> PyResult<usize> {
    let p = pvalues(p)?;
    let set = self::selection(selection, p.len())?;
    Ok(core::simes_bound(&p, &set, alpha).map_err(err)?.v)
}

#[pyfunction]
#[pyo3(signature = (p, selection, alpha, k0 = 1))]
fn k0_bonferroni(p: Vec<f64>, selection: Vec<usize>, alpha: f64, k0: usize) -> PyResult<usize> {
    let p = pvalues(p)?;
    let set = self::selection(selection, p.len())?;
    Ok(core::k0_bonferroni(&p, &set, alpha, k0).map_err(err)?.v)
}

/// Bound from the full-size `template` ("linear" or "beta") at `lam`.
#[pyfunction]
fn threshold_bound(p: Vec<f64>, selection: Vec<usize>, template: &str, lam: f64) -> PyResult<usize> {
    let p = pvalues(p)?;
    let set = self::selection(selection, p.len())?;
    let tpl = core::Template::full(self::template(template)?, p.len()).map_err(err)?;
    Ok(core::threshold_bound(&p, &set, &tpl, lam).map_err(err)?.v)
}

/// Probability that the Simes guarantee fails for two equicorrelated one-sided tests.
#[pyfunction]
fn simes_violation_probability(rho: f64, alpha: f64) -> PyResult<f64> {
    core::simes_violation_probability(rho, alpha).map_err(err)
}

#[pyfunction]
fn beta_cdf(x: f64, a: f64, b: f64) -> PyResult<f64> {
    core::beta_cdf(x, a, b).map_err(err)
}

/// Monte Carlo coverage of `k0`-Bonferroni (`method="bonf"`) or Simes (`method="simes"`)
/// under the i.i.d. uniform full null.
#[pyfunction]
#[pyo3(signature = (method, m, alpha, replications, seed = 0, k0 = 1))]
fn full_null_coverage<'py>(
    py: Python<'py>,
    method: &str,
    m: usize,
    alpha: f64,
    replications: usize,
    seed: u64,
    k0: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let method = match method {
        "bonf" | "bonferroni" => core::CoverageMethod::Bonferroni { k0 },
        "simes" => core::CoverageMethod::Simes,
        other => return Err(PyValueError::new_err(format!("unknown method '{other}'; expected bonf or simes"))),
    };
    let cfg = core::ScenarioConfig::full_null(m, alpha, replications, seed);
    let report = py.allow_threads(|| core::coverage_experiment(&cfg, &method)).map_err(err)?;
    to_dict(py, &core::session::SimulationSummary::from(&report))
}

/// A loaded problem: p-values (optionally from two-sample data) plus calibrations.
#[pyclass(name = "Session")]
struct PySession {
    inner: core::Session,
}

#[pymethods]
impl PySession {
    #[staticmethod]
    fn from_pvalues(ids: Vec<String>, p: Vec<f64>, alpha: f64) -> PyResult<Self> {
        Ok(Self { inner: core::Session::from_pvalues(ids, pvalues(p)?, alpha).map_err(err)? })
    }

    /// `rows` holds one list of measurements per hypothesis; `labels` gives 1 or 2 per sample.
    #[staticmethod]
    #[pyo3(signature = (ids, rows, labels, alpha, welch = false))]
    fn from_dataset(ids: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<u8>, alpha: f64, welch: bool) -> PyResult<Self> {
        let ds = TwoSampleDataset::from_rows(rows, labels).map_err(err)?;
        let statistic = if welch { Statistic::Welch } else { Statistic::KnownVariance };
        Ok(Self { inner: core::Session::from_dataset(ids, ds, alpha, statistic).map_err(err)? })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    /// Calibrates `template` by `b` permutations and returns `lambda`.
    #[pyo3(signature = (template = "linear", b = 1000, seed = 0, k = None))]
    fn calibrate(&mut self, py: Python<'_>, template: &str, b: usize, seed: u64, k: Option<usize>) -> PyResult<f64> {
        let kind = self::template(template)?;
        let inner = &mut self.inner;
        py.allow_threads(|| inner.calibrate(kind, k, b, seed).map(|c| c.lambda)).map_err(err)
    }

    /// Bound for a selection given as a list of ids, or as an expression such as `"bh:0.05&fc>0.2"`.
    #[pyo3(signature = (selection = None, method = "simes"))]
    fn bound<'py>(&self, py: Python<'py>, selection: Option<Bound<'py, PyAny>>, method: &str) -> PyResult<Bound<'py, PyAny>> {
        let method: Method = method.parse().map_err(err)?;
        let spec = match selection {
            None => SelectionSpec::all(),
            Some(obj) => match obj.extract::<String>() {
                Ok(expr) => SelectionSpec::parse(&expr).map_err(err)?,
                Err(_) => SelectionSpec { ids: Some(obj.extract::<Vec<String>>()?), ..Default::default() },
            },
        };
        to_dict(py, &self.inner.bound(method, &spec).map_err(err)?)
    }

    #[pyo3(signature = (method = "simes"))]
    fn envelope<'py>(&self, py: Python<'py>, method: &str) -> PyResult<Bound<'py, PyAny>> {
        let method: Method = method.parse().map_err(err)?;
        to_dict(py, &self.inner.envelope(method).map_err(err)?)
    }

    fn meta<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner.meta())
    }

    fn points<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner.points().map_err(err)?)
    }

    fn __repr__(&self) -> String {
        format!("Session(m={}, alpha={}, methods={:?})", self.inner.m(), self.inner.alpha(), self.inner.methods())
    }
}

#[pymodule]
fn posthoc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(simes_bound, m)?)?;
    m.add_function(wrap_pyfunction!(k0_bonferroni, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_bound, m)?)?;
    m.add_function(wrap_pyfunction!(simes_violation_probability, m)?)?;
    m.add_function(wrap_pyfunction!(beta_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(full_null_coverage, m)?)?;
    m.add_class::<PySession>()?;
    Ok(())
}

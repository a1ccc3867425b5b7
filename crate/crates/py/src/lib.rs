//! Python bindings for `lecam`.

use std::collections::HashMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use lecam::distances::{
    hellinger_discrete, tail_probability_check, tv_discrete, tv_jittered_pair,
    tv_jittered_vs_gaussian, tv_monte_carlo, TvResult, DEFAULT_QUAD_ORDER,
};
use lecam::expansion::expand;
use lecam::gaussian::build_gaussian;
use lecam::kernels::{data_processing_check, deficiency_upper_bounds};
use lecam::pmf::DiscreteLaw;
use lecam::{Error, ExperimentParams, LatticePoint, TvMethod};

fn py_err(e: Error) -> PyErr {
    if e.is_resource_cap() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn law(name: &str) -> PyResult<DiscreteLaw> {
    match name {
        "hyper" | "hypergeometric" => Ok(DiscreteLaw::Hypergeometric),
        "multi" | "multinomial" => Ok(DiscreteLaw::Multinomial),
        other => Err(PyValueError::new_err(format!("unknown law {other:?}"))),
    }
}

fn tv_dict(tv: TvResult) -> HashMap<&'static str, Field> {
    HashMap::from([
        ("value", Field::F(tv.value)),
        ("error_estimate", Field::F(tv.error_estimate)),
        ("method", Field::S(tv.method.as_str())),
    ])
}

#[derive(IntoPyObject)]
enum Field {
    F(f64),
    S(&'static str),
}

/// Population size, sample size and the `d + 1` category counts `N p_i`.
#[pyclass(name = "Params", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Params(ExperimentParams);

#[pymethods]
impl Params {
    #[new]
    fn new(population: u64, sample: u64, counts: Vec<u64>) -> PyResult<Self> {
        ExperimentParams::new(population, sample, counts).map(Params).map_err(py_err)
    }

    #[getter]
    fn population(&self) -> u64 {
        self.0.population()
    }

    #[getter]
    fn sample(&self) -> u64 {
        self.0.sample()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn counts(&self) -> Vec<u64> {
        self.0.counts().to_vec()
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.0.probs()
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(population={}, sample={}, counts={:?})",
            self.0.population(),
            self.0.sample(),
            self.0.counts()
        )
    }
}

impl Params {
    fn point(&self, k: Vec<u64>) -> PyResult<LatticePoint> {
        if k.len() != self.0.dim() {
            return Err(PyValueError::new_err(format!("k needs {} coordinates", self.0.dim())));
        }
        LatticePoint::new(k, self.0.sample()).map_err(py_err)
    }
}

/// Natural-log PMF of `dist` ("hyper" or "multi") at the first `d`
/// coordinates `k`; `-inf` outside the support.
#[pyfunction]
fn log_pmf(params: &Params, dist: &str, k: Vec<u64>) -> PyResult<f64> {
    let law = law(dist)?;
    Ok(match params.point(k) {
        Ok(k) => law.log_pmf(&params.0, &k).ln(),
        Err(_) => f64::NEG_INFINITY,
    })
}

/// Exact log-ratio ln(P/Q) with both expansions and their residuals.
#[pyfunction]
fn log_ratio(params: &Params, k: Vec<u64>) -> PyResult<HashMap<&'static str, f64>> {
    let e = expand(&params.0, &params.point(k)?).map_err(py_err)?;
    Ok(HashMap::from([
        ("exact", e.exact),
        ("order1", e.order1),
        ("order2", e.order2),
        ("residual1", e.residual1),
        ("residual2", e.residual2),
    ]))
}

/// Exact TV between two discrete laws.
#[pyfunction]
fn tv_exact(params: &Params, a: &str, b: &str) -> PyResult<HashMap<&'static str, Field>> {
    tv_discrete(&params.0, law(a)?, law(b)?).map(tv_dict).map_err(py_err)
}

/// Quadrature TV between two jittered discrete laws.
#[pyfunction]
#[pyo3(signature = (params, a, b, quad_order = DEFAULT_QUAD_ORDER))]
fn tv_jittered(params: &Params, a: &str, b: &str, quad_order: usize) -> PyResult<HashMap<&'static str, Field>> {
    tv_jittered_pair(&params.0, law(a)?, law(b)?, quad_order).map(tv_dict).map_err(py_err)
}

/// TV between a jittered discrete law and `Normal(n p, n Sigma_p)`, by
/// quadrature (`samples=None`) or Monte Carlo.
#[pyfunction]
#[pyo3(signature = (params, dist, quad_order = DEFAULT_QUAD_ORDER, samples = None, seed = 0))]
fn tv_gaussian(
    py: Python<'_>,
    params: &Params,
    dist: &str,
    quad_order: usize,
    samples: Option<usize>,
    seed: u64,
) -> PyResult<HashMap<&'static str, Field>> {
    let law = law(dist)?;
    let p = params.0.clone();
    py.detach(move || {
        let g = build_gaussian(&p)?;
        match samples {
            Some(samples) => tv_monte_carlo(&p, law, &g, samples, seed),
            None => tv_jittered_vs_gaussian(&p, law, &g, quad_order),
        }
    })
    .map(tv_dict)
    .map_err(py_err)
}

/// Squared Hellinger distance between the two discrete laws and the TV
/// bound it implies.
#[pyfunction]
fn hellinger(params: &Params) -> PyResult<HashMap<&'static str, f64>> {
    let h = hellinger_discrete(&params.0).map_err(py_err)?;
    Ok(HashMap::from([("h2", h.h2), ("tv_bound", h.tv_bound)]))
}

/// Tail terms and scale factors of the jittered-hypergeometric TV bound.
#[pyfunction]
fn bound_parts(params: &Params) -> PyResult<(Vec<f64>, Vec<u64>, f64, f64, f64)> {
    let b = lecam::distances::bound_parts(&params.0).map_err(py_err)?;
    Ok((b.tail_terms, b.nu, b.tail_sum, b.n2_over_n_pop, b.gaussian_term_scale))
}

/// `(empirical, bound)` for category `i` (0-based over all `d + 1`).
#[pyfunction]
fn tail_check(params: &Params, i: usize) -> PyResult<(f64, f64)> {
    let t = tail_probability_check(&params.0, i).map_err(py_err)?;
    Ok((t.empirical, t.bound))
}

/// Deficiency upper bounds between the hypergeometric and Gaussian
/// experiments at one parameter point.
#[pyfunction]
#[pyo3(signature = (params, quad_order = DEFAULT_QUAD_ORDER))]
fn deficiency(py: Python<'_>, params: &Params, quad_order: usize) -> PyResult<HashMap<&'static str, f64>> {
    let p = params.0.clone();
    let r = py
        .detach(move || deficiency_upper_bounds(&p, TvMethod::Quadrature { order: quad_order }))
        .map_err(py_err)?;
    Ok(HashMap::from([
        ("delta_p_to_q", r.delta_p_to_q.value),
        ("delta_q_to_p", r.delta_q_to_p.value),
        ("le_cam_upper", r.le_cam_upper),
        ("budget", r.budget),
        ("tv_hyper_multi", r.jitter_gap.value),
        ("tv_multi_gauss", r.multinomial_gap.value),
    ]))
}

/// `(tv_before, tv_after, error)` around the rounding kernel.
#[pyfunction]
#[pyo3(signature = (params, quad_order = DEFAULT_QUAD_ORDER))]
fn dpi_check(params: &Params, quad_order: usize) -> PyResult<(f64, f64, f64)> {
    let c = data_processing_check(&params.0, quad_order).map_err(py_err)?;
    Ok((c.tv_before, c.tv_after, c.error))
}

#[pymodule]
fn lecam_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Params>()?;
    m.add_function(wrap_pyfunction!(log_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(log_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(tv_exact, m)?)?;
    m.add_function(wrap_pyfunction!(tv_jittered, m)?)?;
    m.add_function(wrap_pyfunction!(tv_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(hellinger, m)?)?;
    m.add_function(wrap_pyfunction!(bound_parts, m)?)?;
    m.add_function(wrap_pyfunction!(tail_check, m)?)?;
    m.add_function(wrap_pyfunction!(deficiency, m)?)?;
    m.add_function(wrap_pyfunction!(dpi_check, m)?)?;
    Ok(())
}

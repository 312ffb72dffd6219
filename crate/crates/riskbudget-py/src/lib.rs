//! Python bindings for `riskbudget`. Vectors and matrices cross the boundary as
//! lists of floats.

use nalgebra::{DMatrix, DVector};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use riskbudget::analytics::{self, GiniConvention};
use riskbudget::measures::{self, CfOrder, DiscreteLoss, GaussianLoss};
use riskbudget::optimizers::{self, ConstraintSet, MvSpec};
use riskbudget::riskparity;
use riskbudget::{AssetUniverse, Error, RiskBudget};

create_exception!(pyriskbudget, InfeasibleError, PyException);
create_exception!(pyriskbudget, SolverError, PyException);

fn err(e: Error) -> PyErr {
    match e {
        Error::Infeasible(m) => InfeasibleError::new_err(m),
        Error::NotConverged { .. } | Error::Unbounded => SolverError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn vector(v: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(v)
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn list(v: &DVector<f64>) -> Vec<f64> {
    v.iter().cloned().collect()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

fn constraint_set(n: usize, long_only: bool) -> ConstraintSet {
    if long_only {
        ConstraintSet::long_only(n)
    } else {
        ConstraintSet::fully_invested(n)
    }
}

/// Assets described by expected returns, volatilities and correlations.
#[pyclass(name = "Universe", module = "pyriskbudget", frozen)]
struct PyUniverse {
    inner: AssetUniverse,
}

#[pymethods]
impl PyUniverse {
    #[new]
    #[pyo3(signature = (mu, sigma, correlation, names=None))]
    fn new(mu: Vec<f64>, sigma: Vec<f64>, correlation: Vec<Vec<f64>>, names: Option<Vec<String>>) -> PyResult<Self> {
        let n = mu.len();
        let names = names.unwrap_or_else(|| (1..=n).map(|i| format!("A{i}")).collect());
        let inner = AssetUniverse::new(names, vector(mu), vector(sigma), matrix(correlation)?).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: AssetUniverse::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names().to_vec()
    }

    #[getter]
    fn mu(&self) -> Vec<f64> {
        list(self.inner.mu())
    }

    #[getter]
    fn sigma(&self) -> Vec<f64> {
        list(self.inner.sigma())
    }

    #[getter]
    fn cov(&self) -> Vec<Vec<f64>> {
        rows(self.inner.cov())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Universe({})", self.inner.names().join(", "))
    }
}

/// Mean-variance frontier points `{gamma, weights, mean, volatility}`.
#[pyfunction]
#[pyo3(signature = (universe, gammas, long_only=false))]
fn efficient_frontier<'py>(py: Python<'py>, universe: &PyUniverse, gammas: Vec<f64>, long_only: bool) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let u = &universe.inner;
    let pts = optimizers::efficient_frontier(u, &constraint_set(u.len(), long_only), &gammas).map_err(err)?;
    pts.iter()
        .map(|p| {
            let d = PyDict::new(py);
            d.set_item("gamma", p.gamma)?;
            d.set_item("weights", list(&p.weights))?;
            d.set_item("mean", p.mean)?;
            d.set_item("volatility", p.volatility)?;
            Ok(d)
        })
        .collect()
}

/// Portfolio on the frontier with volatility `sigma`; returns `(weights, gamma)`.
#[pyfunction]
#[pyo3(signature = (universe, sigma, long_only=false))]
fn solve_sigma_target(universe: &PyUniverse, sigma: f64, long_only: bool) -> PyResult<(Vec<f64>, f64)> {
    let u = &universe.inner;
    let spec = MvSpec::new(u, constraint_set(u.len(), long_only));
    let (p, g) = optimizers::solve_sigma_target(&spec, sigma).map_err(err)?;
    Ok((list(&p.weights), g))
}

#[pyfunction]
fn tangency_portfolio(universe: &PyUniverse, r: f64) -> PyResult<Vec<f64>> {
    Ok(list(&optimizers::tangency_portfolio(&universe.inner, r).map_err(err)?.weights))
}

#[pyfunction]
fn sharpe_ratio(weights: Vec<f64>, universe: &PyUniverse, r: f64) -> f64 {
    optimizers::sharpe_ratio(&vector(weights), &universe.inner, r)
}

#[pyfunction]
#[pyo3(signature = (universe, long_only=false))]
fn minimum_variance(universe: &PyUniverse, long_only: bool) -> PyResult<Vec<f64>> {
    let u = &universe.inner;
    Ok(list(&optimizers::minimum_variance(u, &constraint_set(u.len(), long_only)).map_err(err)?.weights))
}

#[pyfunction]
fn solve_erc(cov: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    Ok(list(&riskparity::solve_erc(&matrix(cov)?).map_err(err)?.weights))
}

#[pyfunction]
fn solve_rb(cov: Vec<Vec<f64>>, budgets: Vec<f64>) -> PyResult<Vec<f64>> {
    let b = RiskBudget::new(vector(budgets)).map_err(err)?;
    Ok(list(&riskparity::solve_rb_volatility(&matrix(cov)?, &b).map_err(err)?.weights))
}

/// Volatility decomposition `{risk, marginal, contributions, shares}`.
#[pyfunction]
fn risk_decomposition<'py>(py: Python<'py>, weights: Vec<f64>, cov: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let d = analytics::risk_decomposition_volatility(&vector(weights), &matrix(cov)?).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("risk", d.risk_total)?;
    out.set_item("marginal", list(&d.marginal))?;
    out.set_item("contributions", list(&d.contributions))?;
    out.set_item("shares", list(&d.shares))?;
    Ok(out)
}

#[pyfunction]
fn var_es_discrete(losses: Vec<f64>, probs: Vec<f64>, alpha: f64) -> PyResult<(f64, f64)> {
    let d = DiscreteLoss::new(losses, probs).map_err(err)?;
    measures::var_es_discrete(&d, alpha).map_err(err)
}

#[pyfunction]
fn var_es_gaussian(mean: f64, sd: f64, alpha: f64) -> PyResult<(f64, f64)> {
    let l = GaussianLoss::new(mean, sd).map_err(err)?;
    Ok((measures::var_gaussian(l, alpha).map_err(err)?, measures::es_gaussian(l, alpha).map_err(err)?))
}

/// Fourth-order Cornish-Fisher quantile at level `alpha`.
#[pyfunction]
fn cornish_fisher(alpha: f64, skew: f64, exkurt: f64) -> PyResult<f64> {
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(PyValueError::new_err("alpha must lie in (0, 1)"));
    }
    Ok(measures::cornish_fisher_quantile(measures::normal::quantile(alpha), skew, exkurt, CfOrder::Four))
}

/// `(gini, herfindahl, effective_n)` of a long-only weight vector.
#[pyfunction]
fn concentration(weights: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let c = analytics::concentration(&vector(weights), GiniConvention::Trapezoidal).map_err(err)?;
    Ok((c.gini, c.herfindahl, c.effective_n))
}

#[pyfunction]
fn turnover(x: Vec<f64>, x0: Vec<f64>) -> PyResult<f64> {
    analytics::turnover(&vector(x), &vector(x0)).map_err(err)
}

#[pymodule]
fn pyriskbudget(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyUniverse>()?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    m.add_function(wrap_pyfunction!(efficient_frontier, m)?)?;
    m.add_function(wrap_pyfunction!(solve_sigma_target, m)?)?;
    m.add_function(wrap_pyfunction!(tangency_portfolio, m)?)?;
    m.add_function(wrap_pyfunction!(sharpe_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(minimum_variance, m)?)?;
    m.add_function(wrap_pyfunction!(solve_erc, m)?)?;
    m.add_function(wrap_pyfunction!(solve_rb, m)?)?;
    m.add_function(wrap_pyfunction!(risk_decomposition, m)?)?;
    m.add_function(wrap_pyfunction!(var_es_discrete, m)?)?;
    m.add_function(wrap_pyfunction!(var_es_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(cornish_fisher, m)?)?;
    m.add_function(wrap_pyfunction!(concentration, m)?)?;
    m.add_function(wrap_pyfunction!(turnover, m)?)?;
    Ok(())
}

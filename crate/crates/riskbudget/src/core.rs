//! Domain types shared by every other module.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, min_eigenvalue, quad};

/// Tolerance on the smallest eigenvalue of correlation and covariance matrices.
pub const PSD_TOL: f64 = 1e-10;

/// Assets described by expected returns, volatilities and a correlation matrix.
///
/// The covariance matrix `Σ_ij = ρ_ij σ_i σ_j` is assembled once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetUniverse {
    names: Vec<String>,
    mu: DVector<f64>,
    sigma: DVector<f64>,
    rho: DMatrix<f64>,
    cov: DMatrix<f64>,
}

impl AssetUniverse {
    pub fn new(
        names: Vec<String>,
        mu: DVector<f64>,
        sigma: DVector<f64>,
        rho: DMatrix<f64>,
    ) -> Result<Self> {
        let n = names.len();
        Error::check_dim(n, mu.len())?;
        Error::check_dim(n, sigma.len())?;
        Error::check_dim(n, rho.nrows())?;
        Error::check_dim(n, rho.ncols())?;
        if mu.iter().chain(sigma.iter()).chain(rho.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("universe contains non-finite values"));
        }
        if sigma.iter().any(|&s| s < 0.0) {
            return Err(Error::invalid("volatilities must be nonnegative"));
        }
        if !is_symmetric(&rho, 1e-12) {
            return Err(Error::invalid("correlation matrix is not symmetric"));
        }
        for i in 0..n {
            if (rho[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("correlation diagonal entry {i} is not 1")));
            }
            for j in 0..n {
                if rho[(i, j)].abs() > 1.0 + 1e-12 {
                    return Err(Error::invalid(format!("correlation ({i},{j}) outside [-1,1]")));
                }
            }
        }
        let lmin = min_eigenvalue(&rho);
        if lmin < -PSD_TOL {
            return Err(Error::NotPsd { min_eigenvalue: lmin });
        }
        let cov = DMatrix::from_fn(n, n, |i, j| rho[(i, j)] * sigma[i] * sigma[j]);
        Ok(Self { names, mu, sigma, rho, cov })
    }

    /// Universe with default names `A1..An`.
    pub fn from_parts(mu: &[f64], sigma: &[f64], rho: DMatrix<f64>) -> Result<Self> {
        let names = (1..=mu.len()).map(|i| format!("A{i}")).collect();
        Self::new(names, DVector::from_column_slice(mu), DVector::from_column_slice(sigma), rho)
    }

    /// Recovers `(σ, ρ)` from a covariance matrix. Zero-variance assets get an identity row.
    pub fn from_covariance(names: Vec<String>, mu: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let cm = CovarianceMatrix::new(cov.clone())?;
        let (sigma, rho) = cm.vols_and_correlation();
        Self::new(names, mu, sigma, rho)
    }

    /// Constant-correlation universe.
    pub fn constant_correlation(mu: &[f64], sigma: &[f64], rho: f64) -> Result<Self> {
        let n = sigma.len();
        let r = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho });
        Self::from_parts(mu, sigma, r)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn rho(&self) -> &DMatrix<f64> {
        &self.rho
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn with_mu(&self, mu: DVector<f64>) -> Result<Self> {
        Self::new(self.names.clone(), mu, self.sigma.clone(), self.rho.clone())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: UniverseJson = serde_json::from_str(text)?;
        raw.try_into()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&UniverseJson::from(self))?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct AssetJson {
    name: String,
    mu: f64,
    sigma: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct UniverseJson {
    assets: Vec<AssetJson>,
    correlation: Vec<Vec<f64>>,
}

impl TryFrom<UniverseJson> for AssetUniverse {
    type Error = Error;

    fn try_from(raw: UniverseJson) -> Result<Self> {
        let rho = crate::linalg::mat_from_rows(&raw.correlation)?;
        let names = raw.assets.iter().map(|a| a.name.clone()).collect();
        let mu = DVector::from_iterator(raw.assets.len(), raw.assets.iter().map(|a| a.mu));
        let sigma = DVector::from_iterator(raw.assets.len(), raw.assets.iter().map(|a| a.sigma));
        AssetUniverse::new(names, mu, sigma, rho)
    }
}

impl From<&AssetUniverse> for UniverseJson {
    fn from(u: &AssetUniverse) -> Self {
        UniverseJson {
            assets: (0..u.len())
                .map(|i| AssetJson { name: u.names[i].clone(), mu: u.mu[i], sigma: u.sigma[i] })
                .collect(),
            correlation: crate::linalg::mat_to_rows(&u.rho),
        }
    }
}

/// Symmetric positive semi-definite covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    values: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if !is_symmetric(&values, 1e-12) {
            return Err(Error::invalid("covariance matrix is not symmetric"));
        }
        let scale = values.amax().max(1e-300);
        let lmin = min_eigenvalue(&values);
        if lmin < -PSD_TOL * scale.max(1.0) {
            return Err(Error::NotPsd { min_eigenvalue: lmin });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.values)
    }

    pub fn vols_and_correlation(&self) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.values.nrows();
        let sigma = DVector::from_fn(n, |i, _| self.values[(i, i)].max(0.0).sqrt());
        let rho = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0
            } else if sigma[i] > 0.0 && sigma[j] > 0.0 {
                (self.values[(i, j)] / (sigma[i] * sigma[j])).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        });
        (sigma, rho)
    }
}

/// Assembles `Σ_ij = ρ_ij σ_i σ_j`.
pub fn build_covariance(universe: &AssetUniverse) -> CovarianceMatrix {
    CovarianceMatrix { values: universe.cov.clone() }
}

/// Weight vector over a universe. Weights may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    pub names: Vec<String>,
    pub weights: DVector<f64>,
}

impl Portfolio {
    pub fn new(names: Vec<String>, weights: DVector<f64>) -> Result<Self> {
        Error::check_dim(names.len(), weights.len())?;
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("portfolio weights must be finite"));
        }
        Ok(Self { names, weights })
    }

    pub fn for_universe(universe: &AssetUniverse, weights: DVector<f64>) -> Result<Self> {
        Self::new(universe.names().to_vec(), weights)
    }

    pub fn equal_weight(universe: &AssetUniverse) -> Self {
        let n = universe.len();
        Self {
            names: universe.names().to_vec(),
            weights: DVector::from_element(n, 1.0 / n as f64),
        }
    }

    pub fn is_fully_invested(&self) -> bool {
        (self.weights.sum() - 1.0).abs() <= 1e-10
    }

    /// Checks the weights against a universe, reordering by name when needed.
    pub fn aligned_to(&self, universe: &AssetUniverse) -> Result<DVector<f64>> {
        Error::check_dim(universe.len(), self.weights.len())?;
        if self.names == universe.names() {
            return Ok(self.weights.clone());
        }
        let mut out = DVector::zeros(universe.len());
        for (i, name) in universe.names().iter().enumerate() {
            let k = self
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::invalid(format!("asset {name} missing from portfolio")))?;
            out[i] = self.weights[k];
        }
        Ok(out)
    }
}

/// Risk budgets: nonnegative, summing to one, at least one positive entry.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskBudget {
    budgets: DVector<f64>,
}

impl RiskBudget {
    pub fn new(budgets: DVector<f64>) -> Result<Self> {
        if budgets.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::invalid("risk budgets must be finite and nonnegative"));
        }
        if (budgets.sum() - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("risk budgets sum to {}, not 1", budgets.sum())));
        }
        if budgets.iter().all(|&b| b == 0.0) {
            return Err(Error::invalid("at least one risk budget must be positive"));
        }
        Ok(Self { budgets })
    }

    /// Normalizes a nonnegative vector to sum to one.
    pub fn normalized(raw: DVector<f64>) -> Result<Self> {
        let s = raw.sum();
        if !(s > 0.0) {
            return Err(Error::invalid("risk budgets must have a positive sum"));
        }
        Self::new(raw / s)
    }

    pub fn equal(n: usize) -> Self {
        Self { budgets: DVector::from_element(n, 1.0 / n as f64) }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.budgets
    }

    pub fn len(&self) -> usize {
        self.budgets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.budgets.is_empty()
    }
}

/// Per-asset Euler decomposition of a risk measure.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskDecomposition {
    pub risk_total: f64,
    pub weights: DVector<f64>,
    pub marginal: DVector<f64>,
    pub contributions: DVector<f64>,
    pub shares: DVector<f64>,
}

impl RiskDecomposition {
    /// Builds the decomposition from the risk value and its gradient.
    pub fn from_gradient(risk_total: f64, weights: DVector<f64>, marginal: DVector<f64>) -> Self {
        let contributions = weights.component_mul(&marginal);
        let shares = if risk_total != 0.0 {
            &contributions / risk_total
        } else {
            DVector::zeros(weights.len())
        };
        Self { risk_total, weights, marginal, contributions, shares }
    }

    /// Relative gap between the sum of contributions and the total risk.
    pub fn euler_gap(&self) -> f64 {
        (self.contributions.sum() - self.risk_total).abs() / self.risk_total.abs().max(1e-300)
    }

    /// `max_i |RC*_i - b_i|`.
    pub fn budget_residual(&self, budgets: &DVector<f64>) -> f64 {
        (&self.shares - budgets).amax()
    }
}

/// Returns `(μᵀx, √(xᵀΣx))`.
pub fn portfolio_moments(x: &DVector<f64>, universe: &AssetUniverse) -> Result<(f64, f64)> {
    Error::check_dim(universe.len(), x.len())?;
    Ok((universe.mu.dot(x), volatility(x, &universe.cov)))
}

pub fn volatility(x: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    quad(cov, x).max(0.0).sqrt()
}

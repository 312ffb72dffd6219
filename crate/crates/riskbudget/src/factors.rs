//! Factor models, eigenfactors, credit exposures and the leverage-constrained
//! equilibrium.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::core::{volatility, AssetUniverse, RiskDecomposition};
use crate::error::{Error, Result};
use crate::linalg::{inverse, is_symmetric, mat_from_rows, min_eigenvalue, null_space, solve, sym_eigen_sorted};
use crate::measures::normal;
use crate::qp::QpProblem;

/// `Σ = AΩAᵀ + diag(D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    /// n×m loadings.
    pub a: DMatrix<f64>,
    /// m×m factor covariance.
    pub omega: DMatrix<f64>,
    /// Specific variances.
    pub d: DVector<f64>,
}

#[derive(Deserialize, Serialize)]
struct FactorModelJson {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "Omega")]
    omega: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<f64>,
}

impl FactorModel {
    pub fn new(a: DMatrix<f64>, omega: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        let (n, m) = a.shape();
        Error::check_dim(m, omega.nrows())?;
        Error::check_dim(m, omega.ncols())?;
        Error::check_dim(n, d.len())?;
        if !is_symmetric(&omega, 1e-12) {
            return Err(Error::invalid("Ω must be symmetric"));
        }
        let lmin = min_eigenvalue(&omega);
        if lmin < -1e-10 * omega.amax().max(1.0) {
            return Err(Error::NotPsd { min_eigenvalue: lmin });
        }
        if d.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("specific variances must be nonnegative"));
        }
        Ok(Self { a, omega, d })
    }

    pub fn n_assets(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_factors(&self) -> usize {
        self.a.ncols()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.a * &self.omega * self.a.transpose() + DMatrix::from_diagonal(&self.d)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: FactorModelJson = serde_json::from_str(text)?;
        Self::new(mat_from_rows(&j.a)?, mat_from_rows(&j.omega)?, DVector::from_vec(j.d))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoInverses {
    /// `A⁺ = (AᵀA)⁻¹Aᵀ`, m×n.
    pub a_plus: DMatrix<f64>,
    /// `B⁺ = (A⁺)ᵀ`, n×m.
    pub b_plus: DMatrix<f64>,
    /// Orthonormal rows spanning the complement of the columns of A, (n−m)×n.
    pub b_tilde: DMatrix<f64>,
    /// `B̃⁺ = B̃ᵀ`.
    pub b_tilde_plus: DMatrix<f64>,
}

pub fn pseudo_inverses(a: &DMatrix<f64>) -> Result<PseudoInverses> {
    let (n, m) = a.shape();
    if m > n {
        return Err(Error::invalid(format!("{m} factors exceed {n} assets")));
    }
    let ata = a.transpose() * a;
    let (vals, _) = sym_eigen_sorted(&ata);
    if vals.is_empty() || !(vals[m - 1] > 1e-12 * vals[0].max(1e-300)) {
        return Err(Error::Singular("loading matrix is rank deficient".into()));
    }
    let a_plus = inverse(&ata)? * a.transpose();
    let b_tilde = null_space(&a.transpose(), n).transpose();
    Ok(PseudoInverses { b_plus: a_plus.transpose(), b_tilde_plus: b_tilde.transpose(), a_plus, b_tilde })
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorRisk {
    Volatility,
    /// `−μᵀx + Φ⁻¹(α)σ(x)`; zero mean when `mu` is `None`.
    GaussianVar { alpha: f64, mu: Option<DVector<f64>> },
}

impl FactorRisk {
    fn gradient(&self, x: &DVector<f64>, cov: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
        let s = volatility(x, cov);
        if !(s > 0.0) {
            return Err(Error::ZeroRisk);
        }
        match self {
            FactorRisk::Volatility => Ok((s, cov * x / s)),
            FactorRisk::GaussianVar { alpha, mu } => {
                if !(0.5..1.0).contains(alpha) {
                    return Err(Error::invalid(format!("confidence level {alpha} outside [0.5, 1)")));
                }
                let z = normal::quantile(*alpha);
                let mut g = cov * x * (z / s);
                let mut r = z * s;
                if let Some(mu) = mu {
                    Error::check_dim(x.len(), mu.len())?;
                    g -= mu;
                    r -= mu.dot(x);
                }
                Ok((r, g))
            }
        }
    }
}

/// Risk split between common factors `F = Aᵀx` and specific factors `F̃ = B̃x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorDecomposition {
    pub risk_total: f64,
    pub factor_exposures: DVector<f64>,
    pub factor_marginal: DVector<f64>,
    pub factor_contributions: DVector<f64>,
    pub factor_shares: DVector<f64>,
    pub specific_exposures: DVector<f64>,
    pub specific_marginal: DVector<f64>,
    pub specific_contributions: DVector<f64>,
    pub specific_shares: DVector<f64>,
}

impl FactorDecomposition {
    /// `|Σ RC(F) + Σ RC(F̃) − R|`.
    pub fn additivity_gap(&self) -> f64 {
        (self.factor_contributions.sum() + self.specific_contributions.sum() - self.risk_total).abs()
    }
}

pub fn factor_risk_decomposition(x: &DVector<f64>, model: &FactorModel, risk: &FactorRisk) -> Result<FactorDecomposition> {
    Error::check_dim(model.n_assets(), x.len())?;
    let pi = pseudo_inverses(&model.a)?;
    let (total, grad) = risk.gradient(x, &model.covariance())?;
    let y = model.a.transpose() * x;
    let my = &pi.a_plus * &grad;
    let ry = y.component_mul(&my);
    let yt = &pi.b_tilde * x;
    let mt = &pi.b_tilde * &grad;
    let rt = yt.component_mul(&mt);
    Ok(FactorDecomposition {
        risk_total: total,
        factor_shares: &ry / total,
        specific_shares: &rt / total,
        factor_exposures: y,
        factor_marginal: my,
        factor_contributions: ry,
        specific_exposures: yt,
        specific_marginal: mt,
        specific_contributions: rt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorRbMode {
    LongOnly,
    /// Fully invested, unrestricted signs.
    LongShort,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorRbSolution {
    pub weights: DVector<f64>,
    pub decomposition: FactorDecomposition,
    pub targets: DVector<f64>,
    /// `max_j |RC*(F_j) − b_j|`; targets can be out of reach for long-only portfolios.
    pub residual: f64,
    pub feasible: bool,
}

/// Portfolio whose common-factor risk shares match `budgets` as closely as possible.
///
/// Budgets may sum to less than one, the rest being left to specific risk.
pub fn solve_factor_rb(model: &FactorModel, budgets: &DVector<f64>, mode: FactorRbMode) -> Result<FactorRbSolution> {
    let n = model.n_assets();
    let m = model.n_factors();
    Error::check_dim(m, budgets.len())?;
    if budgets.iter().any(|b| !(*b >= 0.0)) || budgets.sum() > 1.0 + 1e-10 {
        return Err(Error::invalid("factor budgets must be nonnegative and sum to at most one"));
    }
    let pi = pseudo_inverses(&model.a)?;
    let cov = model.covariance();
    let basis = null_space(&DMatrix::from_element(1, n, 1.0), n);
    let ew = DVector::from_element(n, 1.0 / n as f64);
    let weights = |z: &DVector<f64>| -> DVector<f64> {
        match mode {
            FactorRbMode::LongOnly => {
                let mx = z.max();
                let e = z.map(|v| (v - mx).exp());
                &e / e.sum()
            }
            FactorRbMode::LongShort => &ew + &basis * z,
        }
    };
    let residual = |z: &DVector<f64>| -> Option<DVector<f64>> {
        let x = weights(z);
        let s = volatility(&x, &cov);
        if !(s > 0.0) {
            return None;
        }
        let grad = &cov * &x / s;
        let shares = (model.a.transpose() * &x).component_mul(&(&pi.a_plus * grad)) / s;
        Some(shares - budgets)
    };
    let dim = match mode {
        FactorRbMode::LongOnly => n,
        FactorRbMode::LongShort => n - 1,
    };
    let mut z = DVector::zeros(dim);
    let mut r = residual(&z).ok_or(Error::ZeroRisk)?;
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let h = 1e-7;
    for _ in 0..500 {
        if r.amax() <= 1e-12 {
            break;
        }
        let mut jac = DMatrix::zeros(m, dim);
        for k in 0..dim {
            let mut up = z.clone();
            let mut dn = z.clone();
            up[k] += h;
            dn[k] -= h;
            if let (Some(a), Some(b)) = (residual(&up), residual(&dn)) {
                jac.set_column(k, &((a - b) / (2.0 * h)));
            }
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..40 {
            let scale = jtj.diagonal().max().max(1e-12);
            let damped = &jtj + DMatrix::identity(dim, dim) * (lambda * scale);
            if let Ok(step) = solve(&damped, &(-&jtr)) {
                let cand = &z + step;
                if let Some(rc) = residual(&cand) {
                    let c = rc.norm_squared();
                    if c < cost {
                        z = cand;
                        r = rc;
                        cost = c;
                        lambda = (lambda / 3.0).max(1e-15);
                        improved = true;
                        break;
                    }
                }
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    let x = weights(&z);
    let decomposition = factor_risk_decomposition(&x, model, &FactorRisk::Volatility)?;
    let res = (&decomposition.factor_shares - budgets).amax();
    Ok(FactorRbSolution { weights: x, decomposition, targets: budgets.clone(), residual: res, feasible: res <= 1e-6 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub eigenvalues: DVector<f64>,
    /// Columns are eigenvectors, largest-magnitude entry positive.
    pub eigenvectors: DMatrix<f64>,
    pub explained: DVector<f64>,
    pub cumulative: DVector<f64>,
}

pub fn pca_factors(cov: &DMatrix<f64>) -> Result<Pca> {
    if !is_symmetric(cov, 1e-10) {
        return Err(Error::invalid("matrix must be symmetric"));
    }
    let (vals, vecs) = sym_eigen_sorted(cov);
    let total = vals.sum();
    let explained = &vals / total;
    let mut acc = 0.0;
    let cumulative = explained.map(|v| {
        acc += v;
        acc
    });
    Ok(Pca { eigenvalues: vals, eigenvectors: vecs, explained, cumulative })
}

/// Lower bound `ρ̄ + (1 − ρ̄)/n` on the variance share of the first eigenfactor.
pub fn first_factor_share_bound(mean_rho: f64, n: usize) -> f64 {
    mean_rho + (1.0 - mean_rho) / n as f64
}

/// `δ_i = −D_i B_i C_i`.
pub fn duration_exposures(durations: &DVector<f64>, prices: &DVector<f64>, cash_flows: &DVector<f64>) -> Result<DVector<f64>> {
    Error::check_dim(durations.len(), prices.len())?;
    Error::check_dim(durations.len(), cash_flows.len())?;
    Ok(-durations.component_mul(prices).component_mul(cash_flows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BondUniverse {
    pub countries: Vec<String>,
    pub notionals: DVector<f64>,
    pub durations: DVector<f64>,
    pub spreads: DVector<f64>,
    pub spread_vols: DVector<f64>,
    /// Correlation between countries, in order of first appearance.
    pub country_corr: DMatrix<f64>,
}

impl BondUniverse {
    pub fn new(
        countries: Vec<String>,
        notionals: DVector<f64>,
        durations: DVector<f64>,
        spreads: DVector<f64>,
        spread_vols: DVector<f64>,
        country_corr: DMatrix<f64>,
    ) -> Result<Self> {
        let n = countries.len();
        for v in [&notionals, &durations, &spreads, &spread_vols] {
            Error::check_dim(n, v.len())?;
        }
        if durations.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::invalid("durations must be positive"));
        }
        if spreads.iter().chain(spread_vols.iter()).any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("spreads and spread volatilities must be nonnegative"));
        }
        let u = Self { countries, notionals, durations, spreads, spread_vols, country_corr };
        let k = u.country_names().len();
        Error::check_dim(k, u.country_corr.nrows())?;
        Error::check_dim(k, u.country_corr.ncols())?;
        if !is_symmetric(&u.country_corr, 1e-12) || (0..k).any(|i| (u.country_corr[(i, i)] - 1.0).abs() > 1e-12) {
            return Err(Error::invalid("country correlation must be symmetric with a unit diagonal"));
        }
        Ok(u)
    }

    /// Bond CSV with header `country,notional,duration,spread,spread_vol`.
    pub fn from_csv(text: &str, country_corr: DMatrix<f64>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        let expected = ["country", "notional", "duration", "spread", "spread_vol"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::invalid(format!("bond CSV header must be {}", expected.join(","))));
        }
        let mut cols: [Vec<f64>; 4] = Default::default();
        let mut countries = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            countries.push(rec[0].to_string());
            for k in 0..4 {
                cols[k].push(rec[k + 1].parse().map_err(|_| Error::invalid(format!("bad number '{}'", &rec[k + 1])))?);
            }
        }
        let [a, b, c, d] = cols;
        Self::new(countries, DVector::from_vec(a), DVector::from_vec(b), DVector::from_vec(c), DVector::from_vec(d), country_corr)
    }

    pub fn country_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.countries {
            if !out.contains(c) {
                out.push(c.clone());
            }
        }
        out
    }

    fn country_index(&self) -> Vec<usize> {
        let names = self.country_names();
        self.countries.iter().map(|c| names.iter().position(|n| n == c).unwrap_or(0)).collect()
    }

    /// `σ^c_i = D_i σ^s_i s_i`.
    pub fn credit_vols(&self) -> DVector<f64> {
        self.durations.component_mul(&self.spread_vols).component_mul(&self.spreads)
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let s = self.credit_vols();
        let idx = self.country_index();
        let n = s.len();
        DMatrix::from_fn(n, n, |i, j| self.country_corr[(idx[i], idx[j])] * s[i] * s[j])
    }

    /// One meta-bond per country: exposure `Σx_i`, volatility the exposure-weighted average.
    pub fn meta_bonds(&self, exposures: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
        Error::check_dim(self.countries.len(), exposures.len())?;
        let k = self.country_names().len();
        let idx = self.country_index();
        let s = self.credit_vols();
        let mut y = DVector::<f64>::zeros(k);
        let mut ys = DVector::<f64>::zeros(k);
        for i in 0..idx.len() {
            y[idx[i]] += exposures[i];
            ys[idx[i]] += exposures[i] * s[i];
        }
        let sig = DVector::from_fn(k, |c, _| if y[c] != 0.0 { ys[c] / y[c] } else { 0.0 });
        let cov = DMatrix::from_fn(k, k, |a, b| self.country_corr[(a, b)] * sig[a] * sig[b]);
        Ok((cov, y))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CreditRisk {
    pub decomposition: RiskDecomposition,
    /// `(country, RC, RC*)` in order of first appearance.
    pub countries: Vec<(String, f64, f64)>,
}

/// Credit risk `√(xᵀΣx)` with per-bond and per-country contributions; `x` defaults to the notionals.
pub fn credit_risk(bonds: &BondUniverse, exposures: Option<&DVector<f64>>) -> Result<CreditRisk> {
    let x = exposures.cloned().unwrap_or_else(|| bonds.notionals.clone());
    let cov = bonds.covariance();
    let d = crate::analytics::risk_decomposition_volatility(&x, &cov)?;
    let names = bonds.country_names();
    let idx = bonds.country_index();
    let mut rc = vec![0.0; names.len()];
    for (i, &c) in idx.iter().enumerate() {
        rc[c] += d.contributions[i];
    }
    let total = d.risk_total;
    let countries = names.into_iter().zip(rc).map(|(n, r)| (n, r, r / total)).collect();
    Ok(CreditRisk { decomposition: d, countries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeConvention {
    /// `y = x_i + x_j`, `σ' = (x_iσ_i + x_jσ_j)/y`.
    SumWeights,
    /// `σ' = σ_i + σ_j`, `y = (x_iσ_i + x_jσ_j)/σ'`.
    SumVols,
}

/// Replaces two perfectly correlated assets by one; the merged asset takes index `i`.
pub fn merge_perfectly_correlated(
    universe: &AssetUniverse,
    x: &DVector<f64>,
    i: usize,
    j: usize,
    convention: MergeConvention,
) -> Result<(AssetUniverse, DVector<f64>)> {
    let n = universe.len();
    Error::check_dim(n, x.len())?;
    if i >= n || j >= n || i == j {
        return Err(Error::invalid("merge indices must be distinct and in range"));
    }
    let rho = universe.rho();
    if (rho[(i, j)] - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("assets {i} and {j} are not perfectly correlated")));
    }
    if (0..n).any(|k| k != i && k != j && (rho[(k, i)] - rho[(k, j)]).abs() > 1e-12) {
        return Err(Error::invalid("merged assets must share their correlations with the others"));
    }
    let (si, sj) = (universe.sigma()[i], universe.sigma()[j]);
    let (mi, mj) = (universe.mu()[i], universe.mu()[j]);
    let exposure = x[i] * si + x[j] * sj;
    let (y_m, s_m) = match convention {
        MergeConvention::SumWeights => {
            let y = x[i] + x[j];
            let s = if y != 0.0 { exposure / y } else { 0.5 * (si + sj) };
            (y, s)
        }
        MergeConvention::SumVols => (exposure / (si + sj), si + sj),
    };
    let mu_m = if x[i] + x[j] != 0.0 { (x[i] * mi + x[j] * mj) / (x[i] + x[j]) } else { 0.5 * (mi + mj) };
    let keep: Vec<usize> = (0..n).filter(|&k| k != j).collect();
    let names = keep
        .iter()
        .map(|&k| if k == i { format!("{}+{}", universe.names()[i], universe.names()[j]) } else { universe.names()[k].clone() })
        .collect();
    let m = keep.len();
    let mu = DVector::from_fn(m, |a, _| if keep[a] == i { mu_m } else { universe.mu()[keep[a]] });
    let sigma = DVector::from_fn(m, |a, _| if keep[a] == i { s_m } else { universe.sigma()[keep[a]] });
    let new_rho = DMatrix::from_fn(m, m, |a, b| rho[(keep[a], keep[b])]);
    let y = DVector::from_fn(m, |a, _| if keep[a] == i { y_m } else { x[keep[a]] });
    Ok((AssetUniverse::new(names, mu, sigma, new_rho)?, y))
}

/// Mean-variance investor with the leverage constraint `m_j 1ᵀx_j ≤ W_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Investor {
    pub phi: f64,
    pub margin: f64,
    pub wealth: f64,
}

impl Investor {
    pub fn new(phi: f64, margin: f64, wealth: f64) -> Result<Self> {
        if !(phi > 0.0) || !(margin > 0.0 && margin <= 1.0) || !(wealth > 0.0) {
            return Err(Error::invalid("investor needs φ > 0, m ∈ (0, 1] and W > 0"));
        }
        Ok(Self { phi, margin, wealth })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpEquilibrium {
    pub portfolios: Vec<DVector<f64>>,
    /// λ_j of the leverage constraints.
    pub multipliers: Vec<f64>,
    pub aggregate: DVector<f64>,
    /// Market weights `x̄/1ᵀx̄`.
    pub market_weights: DVector<f64>,
    /// `φ = (Σφ_j⁻¹)⁻¹`.
    pub phi: f64,
    /// `ψ = Σ φφ_j⁻¹λ_j m_j`.
    pub psi: f64,
    pub betas: DVector<f64>,
    pub alphas: DVector<f64>,
}

/// One-period equilibrium in return space with unit prices.
pub fn frazzini_pedersen_equilibrium(universe: &AssetUniverse, r: f64, investors: &[Investor]) -> Result<FpEquilibrium> {
    if investors.is_empty() {
        return Err(Error::invalid("at least one investor is required"));
    }
    let n = universe.len();
    let cov = universe.cov();
    let excess = universe.mu().add_scalar(-r);
    let mut portfolios = Vec::new();
    let mut multipliers = Vec::new();
    for inv in investors {
        let p = QpProblem::new(cov * inv.phi, excess.clone())
            .with_ineq(DMatrix::from_element(1, n, -inv.margin), DVector::from_element(1, -inv.wealth));
        let s = crate::optimizers::optimal(&p)?;
        multipliers.push(s.ineq[0]);
        portfolios.push(s.x);
    }
    let aggregate = portfolios.iter().fold(DVector::zeros(n), |acc, x| acc + x);
    let total = aggregate.sum();
    if total.abs() < 1e-300 {
        return Err(Error::invalid("aggregate demand is zero"));
    }
    let market_weights = &aggregate / total;
    let phi = 1.0 / investors.iter().map(|i| 1.0 / i.phi).sum::<f64>();
    let psi: f64 = investors.iter().zip(&multipliers).map(|(i, l)| phi / i.phi * l * i.margin).sum();
    let sw = cov * &market_weights;
    let var = sw.dot(&market_weights);
    let betas = &sw / var;
    let market_excess = excess.dot(&market_weights);
    let alphas = &excess - &betas * market_excess;
    Ok(FpEquilibrium { portfolios, multipliers, aggregate, market_weights, phi, psi, betas, alphas })
}

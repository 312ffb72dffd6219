//! Portfolio algebra that needs no optimizer.

use nalgebra::{DMatrix, DVector};

use crate::core::{volatility, AssetUniverse, RiskDecomposition};
use crate::error::{Error, Result};
use crate::linalg::quad;
use crate::measures::{es_factor, normal};

fn risk_checked(x: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    Error::check_dim(cov.nrows(), x.len())?;
    let s = volatility(x, cov);
    if !(s > 0.0) {
        return Err(Error::ZeroRisk);
    }
    Ok(s)
}

/// `MR = Σx/σ(x)`, `RC_i = x_i MR_i`.
pub fn risk_decomposition_volatility(x: &DVector<f64>, cov: &DMatrix<f64>) -> Result<RiskDecomposition> {
    let s = risk_checked(x, cov)?;
    Ok(RiskDecomposition::from_gradient(s, x.clone(), cov * x / s))
}

/// Gaussian VaR: `MR = −μ + Φ⁻¹(α) Σx/σ(x)`.
pub fn risk_decomposition_var(
    x: &DVector<f64>,
    cov: &DMatrix<f64>,
    mu: &DVector<f64>,
    alpha: f64,
) -> Result<RiskDecomposition> {
    check_alpha(alpha)?;
    let s = risk_checked(x, cov)?;
    let z = normal::quantile(alpha);
    let mr = -mu + cov * x * (z / s);
    Ok(RiskDecomposition::from_gradient(-mu.dot(x) + z * s, x.clone(), mr))
}

/// Gaussian ES: `MR = −μ + φ(Φ⁻¹(α))/(1−α) · Σx/σ(x)`.
pub fn risk_decomposition_es(
    x: &DVector<f64>,
    cov: &DMatrix<f64>,
    mu: &DVector<f64>,
    alpha: f64,
) -> Result<RiskDecomposition> {
    check_alpha(alpha)?;
    let s = risk_checked(x, cov)?;
    let k = es_factor(alpha);
    let mr = -mu + cov * x * (k / s);
    Ok(RiskDecomposition::from_gradient(-mu.dot(x) + k * s, x.clone(), mr))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.5..1.0).contains(&alpha) {
        return Err(Error::invalid(format!("confidence level {alpha} outside [0.5, 1)")));
    }
    Ok(())
}

/// Asset betas `β = Σb/(bᵀΣb)` and the portfolio beta `xᵀβ`.
pub fn beta(x: &DVector<f64>, b: &DVector<f64>, cov: &DMatrix<f64>) -> Result<(DVector<f64>, f64)> {
    Error::check_dim(x.len(), b.len())?;
    let vb = quad(cov, b);
    if !(vb > 0.0) {
        return Err(Error::invalid("benchmark has zero variance"));
    }
    let betas = cov * b / vb;
    let bx = betas.dot(x);
    Ok((betas, bx))
}

/// How the Sharpe ratio of a reference portfolio is supplied.
#[derive(Debug, Clone, PartialEq)]
pub enum SharpeSource {
    Explicit(f64),
    Returns { mu: DVector<f64>, r: f64 },
}

impl SharpeSource {
    fn sharpe(&self, x: &DVector<f64>, sigma: f64) -> f64 {
        match self {
            SharpeSource::Explicit(sr) => *sr,
            SharpeSource::Returns { mu, r } => (mu.dot(x) - r) / sigma,
        }
    }
}

/// Implied risk aversion `φ = SR/σ(x₀)` and premia `π = φ Σx₀`.
pub fn implied_risk_premia(x0: &DVector<f64>, cov: &DMatrix<f64>, sharpe: &SharpeSource) -> Result<(f64, DVector<f64>)> {
    let s = risk_checked(x0, cov)?;
    let sr = sharpe.sharpe(x0, s);
    let phi = sr / s;
    Ok((phi, cov * x0 * phi))
}

/// `δ_i = MR_i(x*) SR(x*|r) − MR_i(x) SR(x|r)`.
pub fn capm_deviation(
    x_star: &DVector<f64>,
    x: &DVector<f64>,
    cov: &DMatrix<f64>,
    mu: &DVector<f64>,
    r: f64,
) -> Result<DVector<f64>> {
    let s1 = risk_checked(x_star, cov)?;
    let s2 = risk_checked(x, cov)?;
    let sr1 = (mu.dot(x_star) - r) / s1;
    let sr2 = (mu.dot(x) - r) / s2;
    Ok(cov * x_star * (sr1 / s1) - cov * x * (sr2 / s2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkStats {
    pub excess_return: f64,
    pub tracking_error: f64,
    pub information_ratio: f64,
    pub beta: f64,
    pub correlation: f64,
}

pub fn tracking_stats(x: &DVector<f64>, b: &DVector<f64>, cov: &DMatrix<f64>, mu: &DVector<f64>) -> Result<BenchmarkStats> {
    Error::check_dim(x.len(), b.len())?;
    Error::check_dim(x.len(), mu.len())?;
    let e = x - b;
    let te = volatility(&e, cov);
    let er = mu.dot(&e);
    let sx = volatility(x, cov);
    let sb = volatility(b, cov);
    if !(sx * sb > 0.0) {
        return Err(Error::invalid("correlation undefined for a zero-risk portfolio or benchmark"));
    }
    let correlation = ((sx * sx + sb * sb - te * te) / (2.0 * sx * sb)).clamp(-1.0, 1.0);
    let information_ratio = if te > 0.0 { er / te } else { 0.0 };
    Ok(BenchmarkStats {
        excess_return: er,
        tracking_error: te,
        information_ratio,
        beta: beta(x, b, cov)?.1,
        correlation,
    })
}

/// Smallest `α ∈ [0,1]` such that `z = x₀ + α(x − x₀)` has the tracking error of `y`.
///
/// Solves `Aα² + Bα + C = 0` with `A = σ²(x|x₀)`,
/// `B = σ²(x|b) − σ²(x|x₀) − σ²(x₀|b)` and `C = σ²(x₀|b) − σ²(y|b)`.
pub fn tracker_mix_alpha(
    x0: &DVector<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    b: &DVector<f64>,
    cov: &DMatrix<f64>,
) -> Result<f64> {
    let te2 = |u: &DVector<f64>, v: &DVector<f64>| quad(cov, &(u - v));
    let a = te2(x, x0);
    let bq = te2(x, b) - te2(x, x0) - te2(x0, b);
    let c = te2(x0, b) - te2(y, b);
    let scale = te2(x, b).max(te2(y, b)).max(1e-300);
    let roots: Vec<f64> = if a.abs() <= 1e-14 * scale {
        if bq.abs() <= 1e-14 * scale {
            return Err(Error::Infeasible("degenerate tracker mixing equation".into()));
        }
        vec![-c / bq]
    } else {
        let disc = bq * bq - 4.0 * a * c;
        if disc < -1e-14 * scale * scale {
            return Err(Error::Infeasible("no real root for the mixing coefficient".into()));
        }
        let sq = disc.max(0.0).sqrt();
        vec![(-bq - sq) / (2.0 * a), (-bq + sq) / (2.0 * a)]
    };
    let mut best: Option<f64> = None;
    for r in roots {
        if (-1e-12..=1.0 + 1e-12).contains(&r) {
            let r = r.clamp(0.0, 1.0);
            best = Some(best.map_or(r, |v: f64| v.min(r)));
        }
    }
    let alpha = best.ok_or_else(|| Error::Infeasible("no mixing coefficient in [0, 1]".into()))?;
    let z = x0 + (x - x0) * alpha;
    let resid = (te2(&z, b).sqrt() - te2(y, b).sqrt()).abs();
    if resid > 1e-8 {
        return Err(Error::Infeasible(format!("mixing residual {resid:.2e} too large")));
    }
    Ok(alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharpeAggregation {
    /// Asset Sharpe ratios `(μ_i − r)/σ_i`.
    pub sharpe: DVector<f64>,
    /// Zero-correlation weights `w_i = σ_i/√(Σσ_j²)`. Not normalized to one.
    pub weights: DVector<f64>,
    /// Sharpe ratio of the equally weighted portfolio computed from the full Σ.
    pub ew_sharpe: f64,
    /// `Σ w_i SR_i`, exact for the equally weighted portfolio when ρ = 0.
    pub zero_correlation_sharpe: f64,
}

pub fn sharpe_aggregation(universe: &AssetUniverse, r: f64) -> Result<SharpeAggregation> {
    let sigma = universe.sigma();
    if sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::invalid("volatilities must be positive"));
    }
    let sharpe = (universe.mu() - DVector::from_element(sigma.len(), r)).component_div(sigma);
    let weights = sigma / sigma.norm();
    let n = sigma.len();
    let ew = DVector::from_element(n, 1.0 / n as f64);
    let ew_sharpe = (universe.mu().dot(&ew) - r) / volatility(&ew, universe.cov());
    Ok(SharpeAggregation { zero_correlation_sharpe: weights.dot(&sharpe), sharpe, weights, ew_sharpe })
}

/// Multiplier `w = 1/√(ρ + (1−ρ)/n)` for equal-σ, constant-ρ assets.
pub fn constant_correlation_multiplier(rho: f64, n: usize) -> f64 {
    1.0 / (rho + (1.0 - rho) / n as f64).sqrt()
}

/// `n* = w²(1−ρ)/(1−ρw²)`.
pub fn assets_needed_for_multiplier(rho: f64, w: f64) -> Result<f64> {
    if rho * w * w >= 1.0 {
        return Err(Error::Infeasible(format!(
            "multiplier {w} unattainable: it must stay below 1/√ρ = {}",
            1.0 / rho.sqrt()
        )));
    }
    Ok(w * w * (1.0 - rho) / (1.0 - rho * w * w))
}

/// `DR = Σ x_i σ_i / σ(x)`.
pub fn diversification_ratio(x: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let s = risk_checked(x, cov)?;
    let sig = DVector::from_fn(x.len(), |i, _| cov[(i, i)].max(0.0).sqrt());
    Ok(x.dot(&sig) / s)
}

/// Upper bound `√(1ᵀΣ⁻¹1) · max σ_i` on the diversification ratio.
pub fn diversification_ratio_bound(cov: &DMatrix<f64>) -> Result<f64> {
    let n = cov.nrows();
    let ones = DVector::from_element(n, 1.0);
    let y = crate::linalg::solve(cov, &ones)?;
    let smax = (0..n).map(|i| cov[(i, i)].sqrt()).fold(0.0, f64::max);
    Ok(ones.dot(&y).sqrt() * smax)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GiniConvention {
    /// Piecewise-linear Lorenz curve; equal weights score exactly zero.
    #[default]
    Trapezoidal,
    /// Piecewise-constant Lorenz curve; equal weights score `1/n`.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationStats {
    pub gini: f64,
    pub herfindahl: f64,
    pub effective_n: f64,
}

pub fn concentration(w: &DVector<f64>, convention: GiniConvention) -> Result<ConcentrationStats> {
    if w.is_empty() {
        return Err(Error::invalid("empty weight vector"));
    }
    if w.iter().any(|v| *v < 0.0) {
        return Err(Error::invalid("concentration requires nonnegative weights"));
    }
    if (w.sum() - 1.0).abs() > 1e-8 {
        return Err(Error::invalid(format!("weights sum to {}, not 1", w.sum())));
    }
    let n = w.len();
    let mut sorted: Vec<f64> = w.iter().cloned().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut acc = 0.0;
    for v in sorted.iter().take(n - 1) {
        cum += v;
        acc += cum;
    }
    let nf = n as f64;
    let gini = match convention {
        GiniConvention::Trapezoidal => 2.0 / nf * (acc + 0.5) - 1.0,
        GiniConvention::Constant => 2.0 / nf * (acc + 1.0) - 1.0,
    };
    let herfindahl = w.dot(w);
    Ok(ConcentrationStats { gini, herfindahl, effective_n: 1.0 / herfindahl })
}

/// Gini index of the Lorenz curve `L(x) = x^α`: `(1−α)/(1+α)`.
pub fn lorenz_gini_power(alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::invalid("Lorenz exponent must be nonnegative"));
    }
    Ok((1.0 - alpha) / (1.0 + alpha))
}

/// `Σ|x_i − x⁰_i|`.
pub fn turnover(x: &DVector<f64>, x0: &DVector<f64>) -> Result<f64> {
    Error::check_dim(x0.len(), x.len())?;
    Ok((x - x0).abs().sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EwSummary {
    pub volatility: f64,
    pub shares: DVector<f64>,
    /// Average pairwise correlation ρ̄.
    pub mean_correlation: f64,
    /// Average correlation of each asset with the others, ρ̄_i.
    pub asset_mean_correlation: DVector<f64>,
    /// `σ̄ √ρ̄`, the limit of the volatility as n grows with fixed ρ̄.
    pub asymptotic_volatility: f64,
}

/// Equal-σ closed form `σ(EW) = σ √((1+(n−1)ρ̄)/n)`.
pub fn ew_volatility_equal_sigma(sigma: f64, n: usize, mean_rho: f64) -> f64 {
    let nf = n as f64;
    sigma * ((1.0 + (nf - 1.0) * mean_rho) / nf).sqrt()
}

/// Equal-σ closed form `RC*_i = (1+(n−1)ρ̄_i)/(n(1+(n−1)ρ̄))`.
pub fn ew_shares_equal_sigma(rho: &DMatrix<f64>) -> DVector<f64> {
    let n = rho.nrows();
    let nf = n as f64;
    let (mean, per) = mean_correlations(rho);
    DVector::from_fn(n, |i, _| (1.0 + (nf - 1.0) * per[i]) / (nf * (1.0 + (nf - 1.0) * mean)))
}

fn mean_correlations(rho: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let n = rho.nrows();
    if n < 2 {
        return (1.0, DVector::from_element(n, 1.0));
    }
    let off = |i: usize| (0..n).filter(|&j| j != i).map(|j| rho[(i, j)]).sum::<f64>();
    let per = DVector::from_fn(n, |i, _| off(i) / (n - 1) as f64);
    (per.mean(), per)
}

pub fn ew_closed_forms(universe: &AssetUniverse) -> Result<EwSummary> {
    let n = universe.len();
    let ew = DVector::from_element(n, 1.0 / n as f64);
    let dec = risk_decomposition_volatility(&ew, universe.cov())?;
    let (mean, per) = mean_correlations(universe.rho());
    Ok(EwSummary {
        volatility: dec.risk_total,
        shares: dec.shares,
        mean_correlation: mean,
        asset_mean_correlation: per,
        asymptotic_volatility: universe.sigma().mean() * mean.max(0.0).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vec_from;

    fn cov3() -> DMatrix<f64> {
        let s = [0.15, 0.20, 0.22];
        let rho = [[1.0, 0.7, 0.2], [0.7, 1.0, -0.5], [0.2, -0.5, 1.0]];
        DMatrix::from_fn(3, 3, |i, j| rho[i][j] * s[i] * s[j])
    }

    #[test]
    fn volatility_contributions_match_finite_differences() {
        let cov = DMatrix::from_fn(5, 5, |i, j| if i == j { 0.04 + 0.01 * i as f64 } else { 0.006 });
        let x = vec_from(&[0.3, -0.1, 0.4, 0.25, 0.15]);
        let d = risk_decomposition_volatility(&x, &cov).unwrap();
        let h = 1e-6;
        for i in 0..5 {
            let mut up = x.clone();
            let mut dn = x.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (volatility(&up, &cov) - volatility(&dn, &cov)) / (2.0 * h);
            assert!((d.contributions[i] - x[i] * fd).abs() < 1e-6);
        }
        assert!(d.euler_gap() < 1e-12);
        let single = risk_decomposition_volatility(&vec_from(&[1.0]), &DMatrix::from_element(1, 1, 0.04)).unwrap();
        assert!((single.contributions[0] - 0.2).abs() < 1e-15 && (single.shares[0] - 1.0).abs() < 1e-15);
        assert!(matches!(risk_decomposition_volatility(&DVector::zeros(5), &cov), Err(Error::ZeroRisk)));
    }

    #[test]
    fn es_with_zero_mean_is_proportional_to_volatility() {
        let cov = cov3();
        let x = vec_from(&[0.3, 0.3, 0.4]);
        let v = risk_decomposition_volatility(&x, &cov).unwrap();
        let e = risk_decomposition_es(&x, &cov, &DVector::zeros(3), 0.99).unwrap();
        assert!((&v.shares - &e.shares).amax() < 1e-14);
        assert!(e.euler_gap() < 1e-12);
    }

    #[test]
    fn betas_from_printed_example() {
        let cov = cov3();
        let b = DVector::from_element(3, 1.0 / 3.0);
        let (betas, bx) = beta(&b, &b, &cov).unwrap();
        assert!((bx - 1.0).abs() < 1e-14);
        let expect = [1.231, 0.958, 0.811];
        for i in 0..3 {
            assert!((betas[i] - expect[i]).abs() < 5e-4, "{betas}");
        }
    }

    #[test]
    fn diagonal_betas() {
        let s = [0.1, 0.2, 0.3, 0.25];
        let cov = DMatrix::from_fn(4, 4, |i, j| if i == j { s[i] * s[i] } else { 0.0 });
        let b = DVector::from_element(4, 0.25);
        let (betas, _) = beta(&b, &b, &cov).unwrap();
        let tot: f64 = s.iter().map(|v| v * v).sum();
        for i in 0..4 {
            assert!((betas[i] - 4.0 * s[i] * s[i] / tot).abs() < 1e-14);
        }
    }

    #[test]
    fn premia_of_single_asset() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.09]);
        let x = vec_from(&[1.0, 0.0]);
        let (phi, pi) = implied_risk_premia(&x, &cov, &SharpeSource::Explicit(0.5)).unwrap();
        assert!((pi[0] - 0.5 * 0.2).abs() < 1e-15);
        assert!((phi - 2.5).abs() < 1e-14);
    }

    #[test]
    fn capm_identity() {
        let cov = cov3();
        let mu = vec_from(&[0.05, 0.07, 0.06]);
        let r = 0.02;
        let xs = vec_from(&[0.4, 0.35, 0.25]);
        let x = vec_from(&[0.2, 0.5, 0.3]);
        let d = capm_deviation(&xs, &x, &cov, &mu, r).unwrap();
        // The deviation transfers premia between portfolios: π(e_i|x) + δ_i = π(e_i|x*).
        let (_, pi_x) = implied_risk_premia(&x, &cov, &SharpeSource::Returns { mu: mu.clone(), r }).unwrap();
        let (_, pi_s) = implied_risk_premia(&xs, &cov, &SharpeSource::Returns { mu: mu.clone(), r }).unwrap();
        assert!((&pi_x + &d - &pi_s).amax() < 1e-15);
        assert_eq!(capm_deviation(&x, &x, &cov, &mu, r).unwrap().amax(), 0.0);
    }

    #[test]
    fn tracking_self() {
        let cov = cov3();
        let mu = vec_from(&[0.05, 0.07, 0.06]);
        let b = vec_from(&[0.4, 0.35, 0.25]);
        let s = tracking_stats(&b, &b, &cov, &mu).unwrap();
        assert_eq!(s.excess_return, 0.0);
        assert_eq!(s.tracking_error, 0.0);
        assert!((s.beta - 1.0).abs() < 1e-14 && (s.correlation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixing_keeps_information_ratio() {
        let cov = cov3();
        let mu = vec_from(&[0.05, 0.07, 0.06]);
        let b = vec_from(&[0.4, 0.35, 0.25]);
        let x = vec_from(&[0.2, 0.5, 0.3]);
        let s = tracking_stats(&x, &b, &cov, &mu).unwrap();
        for a in [0.1, 0.5, 2.0] {
            let z = &b * (1.0 - a) + &x * a;
            let sz = tracking_stats(&z, &b, &cov, &mu).unwrap();
            assert!((sz.tracking_error - a * s.tracking_error).abs() < 1e-14);
            assert!((sz.information_ratio - s.information_ratio).abs() < 1e-10);
        }
    }

    #[test]
    fn tracker_mixing_reduces_to_ratio() {
        let cov = cov3();
        let b = vec_from(&[0.4, 0.35, 0.25]);
        let x = vec_from(&[0.2, 0.5, 0.3]);
        let y = vec_from(&[0.35, 0.4, 0.25]);
        let a = tracker_mix_alpha(&b, &x, &y, &b, &cov).unwrap();
        let te = |u: &DVector<f64>| volatility(&(u - &b), &cov);
        assert!((a - te(&y) / te(&x)).abs() < 1e-12);
        let x0 = vec_from(&[0.38, 0.37, 0.25]);
        let a = tracker_mix_alpha(&x0, &x, &y, &b, &cov).unwrap();
        let z = &x0 + (&x - &x0) * a;
        assert!((te(&z) - te(&y)).abs() < 1e-10);
    }

    #[test]
    fn multiplier_and_assets_needed() {
        assert!((assets_needed_for_multiplier(0.5, 1.25).unwrap() - 3.5714).abs() < 1e-4);
        assert!((assets_needed_for_multiplier(0.3, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((assets_needed_for_multiplier(0.0, 2.0).unwrap() - 4.0).abs() < 1e-14);
        assert!(assets_needed_for_multiplier(0.8, 1.25).is_err());
        assert!(constant_correlation_multiplier(0.8, 1_000_000) < 1.0 / 0.8f64.sqrt());
        let n = assets_needed_for_multiplier(0.5, 1.25).unwrap();
        assert!((constant_correlation_multiplier(0.5, 1) - 1.0).abs() < 1e-15);
        assert!((1.0 / (0.5 + 0.5 / n)).sqrt() - 1.25 < 1e-12);
    }

    #[test]
    fn diversification_ratio_values() {
        let cov = DMatrix::from_element(1, 1, 0.04);
        assert!((diversification_ratio(&vec_from(&[1.0]), &cov).unwrap() - 1.0).abs() < 1e-15);
        let cov = DMatrix::identity(2, 2) * 0.04;
        let dr = diversification_ratio(&vec_from(&[0.5, 0.5]), &cov).unwrap();
        assert!((dr - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn concentration_values() {
        let c = concentration(&vec_from(&[0.4, 0.3, 0.2, 0.1, 0.0]), GiniConvention::Trapezoidal).unwrap();
        assert!((c.herfindahl - 0.3).abs() < 1e-12);
        assert!((c.gini - 0.4).abs() < 1e-12);
        assert!((c.effective_n - 10.0 / 3.0).abs() < 1e-12);
        let ew = DVector::from_element(4, 0.25);
        let c = concentration(&ew, GiniConvention::Trapezoidal).unwrap();
        assert!(c.gini.abs() < 1e-15 && (c.herfindahl - 0.25).abs() < 1e-15);
        let c = concentration(&ew, GiniConvention::Constant).unwrap();
        assert!((c.gini - 0.25).abs() < 1e-15);
        let c = concentration(&vec_from(&[0.0, 1.0, 0.0]), GiniConvention::Trapezoidal).unwrap();
        assert!((c.gini - 2.0 / 3.0).abs() < 1e-15 && c.herfindahl == 1.0);
        assert!(concentration(&vec_from(&[1.5, -0.5]), GiniConvention::Trapezoidal).is_err());
    }

    #[test]
    fn lorenz_power_values() {
        assert_eq!(lorenz_gini_power(0.0).unwrap(), 1.0);
        assert_eq!(lorenz_gini_power(0.5).unwrap(), 1.0 / 3.0);
        assert_eq!(lorenz_gini_power(1.0).unwrap(), 0.0);
    }

    #[test]
    fn turnover_values() {
        let ew = DVector::from_element(6, 1.0 / 6.0);
        let x = vec_from(&[0.28, 0.4144, 0.1199, 0.1724, 0.0, 0.0133]);
        assert!((turnover(&x, &ew).unwrap() - 0.7336).abs() < 1e-4);
        assert_eq!(turnover(&ew, &ew).unwrap(), 0.0);
        assert_eq!(turnover(&vec_from(&[0.0, 1.0]), &vec_from(&[1.0, 0.0])).unwrap(), 2.0);
    }

    #[test]
    fn ew_closed_form_agrees_with_generic() {
        let rho = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.3, 1.0, 0.5, 0.1, 0.5, 1.0]);
        let u = AssetUniverse::from_parts(&[0.0; 3], &[0.2; 3], rho).unwrap();
        let s = ew_closed_forms(&u).unwrap();
        assert!((s.volatility - ew_volatility_equal_sigma(0.2, 3, s.mean_correlation)).abs() < 1e-12);
        assert!((s.shares - ew_shares_equal_sigma(u.rho())).amax() < 1e-12);
        assert!((ew_volatility_equal_sigma(0.2, 9, 0.0) - 0.2 / 3.0).abs() < 1e-15);
        assert!((ew_volatility_equal_sigma(0.2, 9, 1.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn perfect_correlation_shares_follow_vols() {
        let u = AssetUniverse::from_parts(&[0.0; 3], &[0.1, 0.2, 0.3], DMatrix::from_element(3, 3, 1.0)).unwrap();
        let s = ew_closed_forms(&u).unwrap();
        let mean_sigma = 0.2;
        for i in 0..3 {
            assert!((s.shares[i] - u.sigma()[i] / (3.0 * mean_sigma)).abs() < 1e-12);
        }
    }
}

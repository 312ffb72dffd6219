//! Random instances and invariant checks shared by the property and acceptance targets.
#![allow(dead_code)]

pub mod gated;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riskbudget::analytics::{self, SharpeSource};
use riskbudget::factors::{self, Investor, MergeConvention};
use riskbudget::measures;
use riskbudget::optimizers::{self, BlViews, ConstraintSet};
use riskbudget::riskparity::{self, RbProblem};
use riskbudget::core::volatility;
use riskbudget::{AssetUniverse, RiskBudget};

pub type Check = std::result::Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Correlation matrix `LLᵀ + D` rescaled to a unit diagonal. With `positive`, loadings
/// are nonnegative so every pairwise correlation is positive.
pub fn random_correlation(rng: &mut ChaCha8Rng, n: usize, positive: bool) -> DMatrix<f64> {
    let k = 1 + n / 3;
    let lo = if positive { 0.1 } else { -1.0 };
    let l = DMatrix::<f64>::from_fn(n, k, |_, _| rng.random_range(lo..1.0));
    let mut c = &l * l.transpose();
    for i in 0..n {
        c[(i, i)] += rng.random_range(0.2..1.0);
    }
    let d = DVector::from_fn(n, |i, _| c[(i, i)].sqrt());
    let mut rho = DMatrix::from_fn(n, n, |i, j| c[(i, j)] / (d[i] * d[j]));
    for i in 0..n {
        rho[(i, i)] = 1.0;
    }
    rho
}

pub fn random_universe(rng: &mut ChaCha8Rng, n: usize, positive: bool) -> AssetUniverse {
    let mu: Vec<f64> = (0..n).map(|_| rng.random_range(0.02..0.12)).collect();
    let sigma: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.40)).collect();
    let rho = random_correlation(rng, n, positive);
    AssetUniverse::from_parts(&mu, &sigma, rho).unwrap()
}

pub fn random_long_only(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let w = DVector::from_fn(n, |_, _| rng.random_range(0.05..1.0));
    let s = w.sum();
    w / s
}

fn max_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

/// (a) Euler sums for volatility, Gaussian VaR and Gaussian ES.
pub fn euler_sums(n: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let u = random_universe(&mut r, n, false);
    let x = random_long_only(&mut r, n);
    let cov = u.cov();
    let ds = [
        analytics::risk_decomposition_volatility(&x, cov),
        analytics::risk_decomposition_var(&x, cov, u.mu(), 0.99),
        analytics::risk_decomposition_es(&x, cov, u.mu(), 0.975),
    ];
    for d in ds {
        let d = d.map_err(|e| e.to_string())?;
        if d.euler_gap() > 1e-8 {
            return Err(format!("Euler gap {:.3e}", d.euler_gap()));
        }
    }
    Ok(())
}

/// (b) Jacobi, least-squares and normalized log-barrier ERC solutions agree.
pub fn erc_agreement(n: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let u = random_universe(&mut r, n, true);
    let cov = u.cov();
    let jacobi = riskparity::solve_erc_jacobi(cov, 1e-12, 10_000).map_err(|e| format!("jacobi: {e}"))?.weights;
    let p = RbProblem::new(cov.clone(), RiskBudget::equal(n)).unwrap();
    let ls = riskparity::solve_rb_least_squares(&p, 1.0).map_err(|e| format!("least squares: {e}"))?.weights;
    let (y, _) = riskparity::solve_erc_log_barrier(cov, 1.0).map_err(|e| format!("log barrier: {e}"))?;
    let lb = &y / y.sum();
    let gap = max_diff(&jacobi, &ls).max(max_diff(&jacobi, &lb)).max(max_diff(&ls, &lb));
    if gap > 1e-5 {
        return Err(format!("ERC solvers disagree by {gap:.3e}"));
    }
    Ok(())
}

/// (c) The constrained minimum-variance portfolio under Σ is the unconstrained one under Σ̃.
pub fn jm_equivalence(n: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let u = random_universe(&mut r, n, false);
    let cap = (1.5 / n as f64).max(0.3).min(1.0);
    let lower = DVector::from_fn(n, |_, _| r.random_range(0.0..0.5 / n as f64));
    let upper = DVector::from_fn(n, |_, _| r.random_range(cap..1.0));
    let cs = ConstraintSet::fully_invested(n).with_bounds(Some(lower), Some(upper));
    let jm = optimizers::jagannathan_ma_covariance(&u, &cs).map_err(|e| e.to_string())?;
    let x = optimizers::unconstrained_minimum_variance(&jm.cov).map_err(|e| e.to_string())?;
    let gap = max_diff(&x, &jm.constrained);
    if gap > 1e-6 {
        return Err(format!("JM re-optimization differs by {gap:.3e}"));
    }
    Ok(())
}

/// (d) Merging two perfectly correlated assets held long leaves the risk and the other contributions unchanged.
pub fn merge_invariance(n: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let m = n.max(2) - 1;
    let base = random_correlation(&mut r, m, false);
    let i = r.random_range(0..m);
    let idx: Vec<usize> = (0..n).map(|k| if k == m { i } else { k }).collect();
    let rho = DMatrix::from_fn(n, n, |a, b| base[(idx[a], idx[b])]);
    let mu: Vec<f64> = (0..n).map(|_| r.random_range(0.02..0.1)).collect();
    let sigma: Vec<f64> = (0..n).map(|_| r.random_range(0.05..0.4)).collect();
    let u = AssetUniverse::from_parts(&mu, &sigma, rho).map_err(|e| e.to_string())?;
    let mut x = DVector::from_fn(n, |_, _| r.random_range(-0.5..1.0));
    x[i] = r.random_range(0.05..1.0);
    x[m] = r.random_range(0.05..1.0);
    let full = analytics::risk_decomposition_volatility(&x, u.cov()).map_err(|e| e.to_string())?;
    for conv in [MergeConvention::SumWeights, MergeConvention::SumVols] {
        let (mu2, y) = factors::merge_perfectly_correlated(&u, &x, i, m, conv).map_err(|e| e.to_string())?;
        let red = analytics::risk_decomposition_volatility(&y, mu2.cov()).map_err(|e| e.to_string())?;
        let mut expected = full.contributions.rows(0, m).into_owned();
        expected[i] += full.contributions[m];
        let gap = (red.risk_total - full.risk_total).abs().max(max_diff(&red.contributions, &expected));
        if gap > 1e-12 {
            return Err(format!("merge changed risk by {gap:.3e}"));
        }
    }
    Ok(())
}

/// (e) Constant-correlation spectrum: `1 + (n−1)ρ` once and `1 − ρ` with multiplicity `n − 1`.
pub fn constant_correlation_spectrum(n: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let rho = r.random_range((-1.0 / (n as f64 - 1.0) + 1e-3)..0.99);
    let u = AssetUniverse::constant_correlation(&vec![0.05; n], &vec![1.0; n], rho).map_err(|e| e.to_string())?;
    let pca = factors::pca_factors(u.cov()).map_err(|e| e.to_string())?;
    let mut got: Vec<f64> = pca.eigenvalues.iter().cloned().collect();
    let mut want = vec![1.0 - rho; n - 1];
    want.push(1.0 + (n as f64 - 1.0) * rho);
    got.sort_by(f64::total_cmp);
    want.sort_by(f64::total_cmp);
    let gap = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if gap > 1e-10 {
        return Err(format!("eigenvalues off by {gap:.3e} at ρ = {rho}"));
    }
    Ok(())
}

/// (f) σ(MV) ≤ σ(ERC) ≤ σ(EW) for fully invested portfolios.
pub fn volatility_ordering(n: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let u = random_universe(&mut r, n, false);
    let cov = u.cov();
    let mv = optimizers::minimum_variance(&u, &ConstraintSet::fully_invested(n)).map_err(|e| e.to_string())?.weights;
    let erc = riskparity::solve_erc(cov).map_err(|e| e.to_string())?.weights;
    let ew = DVector::from_element(n, 1.0 / n as f64);
    let (a, b, c) = (volatility(&mv, cov), volatility(&erc, cov), volatility(&ew, cov));
    if a > b + 1e-12 || b > c + 1e-12 {
        return Err(format!("σ(MV)={a}, σ(ERC)={b}, σ(EW)={c}"));
    }
    Ok(())
}

/// Budget-only quadratic-utility portfolio for expected returns `q` and risk aversion φ.
pub fn trend_portfolio(cov: &DMatrix<f64>, q: &DVector<f64>, phi: f64) -> DVector<f64> {
    let inv = cov.clone().try_inverse().unwrap();
    let n = q.len();
    let ones = DVector::from_element(n, 1.0);
    let a = &inv * q / phi;
    let g = &inv * &ones;
    let k = (1.0 - a.sum()) / g.sum();
    a + g * k
}

/// (g) Black-Litterman limits in τ.
pub fn bl_limits(n: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let u = random_universe(&mut r, n, true);
    let b = random_long_only(&mut r, n);
    let q = DVector::from_fn(n, |_, _| r.random_range(0.0..0.1));
    let omega = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| r.random_range(0.01f64..0.05).powi(2)));
    let sharpe = SharpeSource::Explicit(0.4);
    let views = BlViews::trends(q.clone(), omega, 0.0).unwrap();
    let at0 = optimizers::black_litterman(&u, &b, 0.02, &sharpe, &views).map_err(|e| e.to_string())?;
    let gap0 = max_diff(&at0.portfolio.weights, &b);
    let big = optimizers::black_litterman(&u, &b, 0.02, &sharpe, &views.with_tau(1e6)).map_err(|e| e.to_string())?;
    let gap1 = max_diff(&big.portfolio.weights, &trend_portfolio(u.cov(), &q, big.phi));
    if gap0 > 1e-4 || gap1 > 1e-4 {
        return Err(format!("τ=0 gap {gap0:.3e}, τ=1e6 gap {gap1:.3e}"));
    }
    Ok(())
}

/// (h) Leverage-constrained equilibrium identities.
pub fn fp_identities(n: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let u = random_universe(&mut r, n, true);
    let investors: Vec<Investor> = (0..2)
        .map(|_| Investor::new(r.random_range(1.0..6.0), r.random_range(0.3..=1.0), r.random_range(0.2..1.5)).unwrap())
        .collect();
    let eq = factors::frazzini_pedersen_equilibrium(&u, 0.01, &investors).map_err(|e| e.to_string())?;
    let w = &eq.market_weights;
    let implied = eq.betas.map(|b| eq.psi * (1.0 - b));
    let gap = (w.dot(&eq.betas) - 1.0).abs().max(w.dot(&eq.alphas).abs()).max(max_diff(&eq.alphas, &implied));
    if gap > 1e-8 {
        return Err(format!("equilibrium identity gap {gap:.3e}"));
    }
    Ok(())
}

/// (i) Monte-Carlo ES contributions within three standard errors of the Gaussian formula.
pub fn mc_es_within_three_se(seed: u64) -> Check {
    let rho = DMatrix::from_row_slice(4, 4, &[1.0, 0.1, 0.4, 0.5, 0.1, 1.0, 0.7, 0.4, 0.4, 0.7, 1.0, 0.8, 0.5, 0.4, 0.8, 1.0]);
    let u = AssetUniverse::from_parts(&[0.05, 0.06, 0.08, 0.06], &[0.15, 0.20, 0.25, 0.30], rho).unwrap();
    let x = DVector::from_vec(vec![0.4, 0.3, 0.2, 0.1]);
    let alpha = 0.99;
    let sims = measures::simulate_gaussian_returns(u.mu(), u.cov(), 1_000_000, seed);
    let mc = measures::mc_es_contributions(&x, &sims, alpha, 50).map_err(|e| e.to_string())?;
    let exact = analytics::risk_decomposition_es(&x, u.cov(), u.mu(), alpha).map_err(|e| e.to_string())?;
    for i in 0..4 {
        let z = (mc.contributions[i] - exact.contributions[i]).abs() / mc.std_errors[i];
        if !(z <= 3.0) {
            return Err(format!("asset {i}: {z:.2} standard errors away"));
        }
    }
    Ok(())
}

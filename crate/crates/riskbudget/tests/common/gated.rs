//! Golden tests whose inputs are not shipped with the crate.
//!
//! Each check reads `<dir>/<file>.json`, where `<dir>` is `$RISKBUDGET_BOOKDATA` or the
//! `bookdata/` directory at the workspace root. When the file is missing the check is
//! skipped with a notice. All numbers in the files are decimals (0.05 for 5%).
//!
//! Shared keys:
//! - `universe`: the `AssetUniverse` JSON object (`assets` with `name`/`mu`/`sigma`, `correlation`).
//! - `covariance`: a matrix as an array of rows.
//!
//! File schemas, by file name:
//! - `mv_bounds`: `universe`, `lower` (per-asset lower bounds), optional `gamma` (default 0).
//! - `tensors`: `m1`, `m2`, `m3` (n×n²), `m4` (n×n³), optional `weights` (default equal weights).
//! - `long_short`: `universe` (six assets).
//! - `es_universe`: `universe`, `weights`, `alpha`.
//! - `implied_premia`: `covariance`, `weights`, `sharpe`.
//! - `capm`: `universe`, `r`.
//! - `tilted`: `universe`, `te_target`, `long_only`.
//! - `tracker_mix`: `universe`, `x0`, `x`, `y`, `b`.
//! - `sharpe_sets`: `universe` (zero correlations), `r`.
//! - `mdp`: `universe`.
//! - `turnover`: `universe`, `x0`, `sigma_target`, `max_turnover`, `cost_sell`, `cost_buy`, `long_only`.
//! - `black_litterman`: `universe`, `b`, `r`, `sharpe`, `views` (`P`, `Q`, `Omega`, `tau`), `te_target`.
//! - `jm`: `universe`, `constraints` (the `ConstraintSet` JSON object).
//! - `erc_cov`: `covariance`.
//! - `bonds`: `bonds_csv` (`country,notional,duration,spread,spread_vol`), `country_corr`, `budgets`.
//! - `log_barrier`: `covariance`, `c`.
//! - `zero_budgets`: `covariance`, `budgets`.
//! - `critical_correlation`: `sigma`.
//! - `factor_model`: `A`, `Omega`, `D`, `x`, `budgets`.
//! - `leverage`: `universe`, `r`, `investors` (array of `phi`, `margin`, `wealth`).

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use serde_json::Value;

use riskbudget::analytics::{self, SharpeSource};
use riskbudget::core::volatility;
use riskbudget::factors::{self, BondUniverse, FactorModel, FactorRbMode, FactorRisk, Investor};
use riskbudget::measures::{self, MomentTensors};
use riskbudget::optimizers::{self, BlViews, ConstraintSet, MvSpec};
use riskbudget::qp::{self, QpProblem};
use riskbudget::riskparity::{self, ClosedForm, CriticalCorrelation, LongShortScale, RbProblem};
use riskbudget::{AssetUniverse, Error, RiskBudget};

use super::Check;

pub fn bookdata_dir() -> PathBuf {
    match std::env::var_os("RISKBUDGET_BOOKDATA") {
        Some(p) => PathBuf::from(p),
        None => PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../bookdata"),
    }
}

fn load(file: &str) -> Option<Value> {
    let path = bookdata_dir().join(format!("{file}.json"));
    let text = std::fs::read_to_string(path).ok()?;
    Some(serde_json::from_str(&text).unwrap_or_else(|e| panic!("{file}.json: {e}")))
}

/// Outcome of one gated check: `None` when its data file is absent.
pub fn run(id: &str) -> Option<Check> {
    let (_, file, check) = GATED.iter().find(|(name, _, _)| *name == id).unwrap_or_else(|| panic!("unknown gated check {id}"));
    match load(file) {
        Some(v) => Some(check(&v)),
        None => {
            println!("SKIP {id}: bookdata not found ({file}.json)");
            None
        }
    }
}

type GatedCheck = fn(&Value) -> Check;

/// `(check id, data file, check)`.
pub const GATED: &[(&str, &str, GatedCheck)] = &[
    ("mv_lower_bound_multiplier", "mv_bounds", mv_lower_bound_multiplier),
    ("tensor_moments_ew", "tensors", tensor_moments_ew),
    ("long_short_contributions", "long_short", long_short_contributions),
    ("es_decomposition", "es_universe", es_decomposition),
    ("implied_premia", "implied_premia", implied_premia),
    ("capm_deviation", "capm", capm_deviation),
    ("tilted_portfolio", "tilted", tilted_portfolio),
    ("tracker_mix", "tracker_mix", tracker_mix),
    ("sharpe_aggregation", "sharpe_sets", sharpe_aggregation),
    ("mdp_unconstrained", "mdp", mdp_unconstrained),
    ("turnover_constrained", "turnover", turnover_constrained),
    ("transaction_costs", "turnover", transaction_costs),
    ("black_litterman", "black_litterman", black_litterman),
    ("black_litterman_tau", "black_litterman", black_litterman_tau),
    ("jm_implied_vols", "jm", jm_implied_vols),
    ("erc_jacobi_trace", "erc_cov", erc_jacobi_trace),
    ("bond_risk_budgeting", "bonds", bond_risk_budgeting),
    ("log_barrier_scale", "log_barrier", log_barrier_scale),
    ("erc_es", "es_universe", erc_es),
    ("long_short_erc", "long_short", long_short_erc),
    ("zero_budget_enumeration", "zero_budgets", zero_budget_enumeration),
    ("critical_correlation", "critical_correlation", critical_correlation),
    ("factor_pseudo_inverse", "factor_model", factor_pseudo_inverse),
    ("factor_contributions", "factor_model", factor_contributions),
    ("factor_risk_budgeting", "factor_model", factor_risk_budgeting),
    ("credit_risk", "bonds", credit_risk),
    ("leverage_equilibrium", "leverage", leverage_equilibrium),
];

fn e2s(e: Error) -> String {
    e.to_string()
}

fn num(v: &Value, key: &str) -> std::result::Result<f64, String> {
    v[key].as_f64().ok_or_else(|| format!("missing number '{key}'"))
}

fn vector(v: &Value, key: &str) -> std::result::Result<DVector<f64>, String> {
    let a = v[key].as_array().ok_or_else(|| format!("missing array '{key}'"))?;
    a.iter().map(|x| x.as_f64().ok_or_else(|| format!("'{key}' must hold numbers"))).collect::<std::result::Result<Vec<_>, _>>().map(DVector::from_vec)
}

fn matrix(v: &Value, key: &str) -> std::result::Result<DMatrix<f64>, String> {
    let rows = v[key].as_array().ok_or_else(|| format!("missing matrix '{key}'"))?;
    let data: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.as_array().map(|r| r.iter().filter_map(Value::as_f64).collect()).ok_or_else(|| format!("'{key}' must be an array of rows")))
        .collect::<std::result::Result<_, _>>()?;
    riskbudget::linalg::mat_from_rows(&data).map_err(e2s)
}

fn universe(v: &Value) -> std::result::Result<AssetUniverse, String> {
    AssetUniverse::from_json(&v["universe"].to_string()).map_err(e2s)
}

/// Compares decimals against values printed in percent with the given tolerance in points.
fn pct(what: &str, got: &DVector<f64>, want: &[f64], tol: f64) -> Check {
    if got.len() != want.len() {
        return Err(format!("{what}: length {} vs {}", got.len(), want.len()));
    }
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        if (100.0 * g - w).abs() > tol {
            return Err(format!("{what}[{i}] = {:.4}%, expected {w}%", 100.0 * g));
        }
    }
    Ok(())
}

fn scalar(what: &str, got: f64, want: f64, tol: f64) -> Check {
    if (got - want).abs() > tol {
        return Err(format!("{what} = {got:.6}, expected {want}"));
    }
    Ok(())
}

/// Two-decimal percentages are compared to one unit of the last printed digit.
const PP: f64 = 0.01;

fn mv_lower_bound_multiplier(v: &Value) -> Check {
    let u = universe(v)?;
    let gamma = v["gamma"].as_f64().unwrap_or(0.0);
    let p = QpProblem::new(u.cov().clone(), u.mu() * gamma).with_budget().with_bounds(Some(vector(v, "lower")?), None);
    let s = qp::solve_qp(&p).map_err(e2s)?;
    let (lower, _) = s.extract_bound_multipliers().map_err(e2s)?;
    scalar("λ⁻₁ (%)", 100.0 * lower[0], 0.0828, 5e-5)
}

fn tensor_moments_ew(v: &Value) -> Check {
    let t = MomentTensors::new(vector(v, "m1")?, matrix(v, "m2")?, matrix(v, "m3")?, matrix(v, "m4")?).map_err(e2s)?;
    let n = t.dim();
    let x = vector(v, "weights").unwrap_or_else(|_| DVector::from_element(n, 1.0 / n as f64));
    let m = measures::portfolio_tensor_moments(&x, &t).map_err(e2s)?;
    scalar("μ₂(Π)", m.mu2, 2.706e-4, 5e-8)?;
    scalar("γ₁(L)", m.loss_skew, 0.251, 5e-4)?;
    scalar("γ₂(L)", m.loss_exkurt, 0.438, 5e-4)
}

fn alternating(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 })
}

fn long_short_contributions(v: &Value) -> Check {
    let u = universe(v)?;
    let x = alternating(u.len());
    let d = analytics::risk_decomposition_volatility(&x, u.cov()).map_err(e2s)?;
    pct("RC*", &d.shares, &[10.66, 8.88, 28.17, 46.19, 2.28, 3.81], PP)?;
    scalar("σ(x) (%)", 100.0 * d.risk_total, 44.38, PP)
}

fn es_decomposition(v: &Value) -> Check {
    let u = universe(v)?;
    let d = analytics::risk_decomposition_es(&vector(v, "weights")?, u.cov(), u.mu(), num(v, "alpha")?).map_err(e2s)?;
    scalar("ES (%)", 100.0 * d.risk_total, 12.11, PP)?;
    pct("RC*", &d.shares, &[45.57, 56.84, -2.41], PP)
}

fn implied_premia(v: &Value) -> Check {
    let cov = matrix(v, "covariance")?;
    let x = vector(v, "weights")?;
    let (_, pi) = analytics::implied_risk_premia(&x, &cov, &SharpeSource::Explicit(num(v, "sharpe")?)).map_err(e2s)?;
    pct("π", &pi, &[10.04, 6.14, 5.14], PP)?;
    scalar("π(x) (%)", 100.0 * x.dot(&pi), 6.61, PP)
}

fn capm_deviation(v: &Value) -> Check {
    let u = universe(v)?;
    let r = num(v, "r")?;
    let star = optimizers::tangency_portfolio(&u, r).map_err(e2s)?.weights;
    let long = optimizers::tangency_constrained(&u, &ConstraintSet::long_only(u.len()), r).map_err(e2s)?.weights;
    pct("x*", &star, &[-13.27, 21.27, 62.84, 29.16], PP)?;
    pct("x", &long, &[0.0, 9.08, 63.24, 27.68], PP)?;
    let delta = analytics::capm_deviation(&star, &long, u.cov(), u.mu(), r).map_err(e2s)?;
    pct("δ", &delta, &[-3.38, 0.0, 0.0, 0.0], PP)
}

fn constraints(n: usize, long_only: bool) -> ConstraintSet {
    if long_only {
        ConstraintSet::long_only(n)
    } else {
        ConstraintSet::fully_invested(n)
    }
}

fn tilted_portfolio(v: &Value) -> Check {
    let u = universe(v)?;
    let b = riskparity::solve_erc(u.cov()).map_err(e2s)?.weights;
    let long_only = v["long_only"].as_bool().unwrap_or(true);
    let spec = MvSpec::new(&u, constraints(u.len(), long_only)).with_benchmark(b.clone());
    let (x, _) = optimizers::solve_te_target(&spec, num(v, "te_target")?).map_err(e2s)?;
    pct("x", &x.weights, &[38.50, 20.16, 20.18, 21.16], PP)?;
    let s = analytics::tracking_stats(&x.weights, &b, u.cov(), u.mu()).map_err(e2s)?;
    scalar("μ(x|b) (%)", 100.0 * s.excess_return, 1.13, PP)?;
    scalar("IR", s.information_ratio, 1.13, 0.01)
}

fn tracker_mix(v: &Value) -> Check {
    let u = universe(v)?;
    let (x0, x, y, b) = (vector(v, "x0")?, vector(v, "x")?, vector(v, "y")?, vector(v, "b")?);
    let alpha = analytics::tracker_mix_alpha(&x0, &x, &y, &b, u.cov()).map_err(e2s)?;
    scalar("α (%)", 100.0 * alpha, 42.4, 0.1)?;
    let z = &x0 + (&x - &x0) * alpha;
    let s = analytics::tracking_stats(&z, &b, u.cov(), u.mu()).map_err(e2s)?;
    scalar("μ(z|b) (bps)", 1e4 * s.excess_return, 97.0, 1.0)?;
    scalar("IR", s.information_ratio, 0.32, 0.01)
}

fn sharpe_aggregation(v: &Value) -> Check {
    let agg = analytics::sharpe_aggregation(&universe(v)?, num(v, "r")?).map_err(e2s)?;
    pct("w", &agg.weights, &[38.5, 38.5, 57.7, 19.2, 57.7], 0.1)?;
    scalar("SR", agg.zero_correlation_sharpe, 0.828, 1e-3)
}

fn mdp_unconstrained(v: &Value) -> Check {
    let u = universe(v)?;
    let x = optimizers::most_diversified(&u, &ConstraintSet::fully_invested(u.len())).map_err(e2s)?.weights;
    pct("x", &x, &[-27.94, 43.69, 43.86, 40.39], PP)?;
    scalar("σ(x) (%)", 100.0 * volatility(&x, u.cov()), 24.54, PP)
}

/// Largest-γ bisection on a monotone σ(γ) curve.
fn gamma_for_sigma(target: f64, solve: impl Fn(f64) -> Result<DVector<f64>, Error>, cov: &DMatrix<f64>) -> std::result::Result<DVector<f64>, String> {
    let (mut lo, mut hi) = (0.0, 1.0);
    while volatility(&solve(hi).map_err(e2s)?, cov) < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(format!("volatility {target} not reachable"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if volatility(&solve(mid).map_err(e2s)?, cov) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    solve(0.5 * (lo + hi)).map_err(e2s)
}

fn turnover_constrained(v: &Value) -> Check {
    let u = universe(v)?;
    let x0 = vector(v, "x0")?;
    let cs = constraints(u.len(), v["long_only"].as_bool().unwrap_or(true));
    let tau = num(v, "max_turnover")?;
    let solve = |g: f64| optimizers::solve_turnover_constrained(&MvSpec::new(&u, cs.clone()).with_gamma(g), &x0, tau).map(|p| p.weights);
    let x = gamma_for_sigma(num(v, "sigma_target")?, solve, u.cov())?;
    pct("x", &x, &[16.67, 34.82, 16.67, 18.51, 0.26, 13.07], PP)
}

fn transaction_costs(v: &Value) -> Check {
    let u = universe(v)?;
    let x0 = vector(v, "x0")?;
    let (cs_, cb) = (vector(v, "cost_sell")?, vector(v, "cost_buy")?);
    let cs = constraints(u.len(), v["long_only"].as_bool().unwrap_or(true));
    let target = num(v, "sigma_target")?;
    let (naive, _) = optimizers::solve_sigma_target(&MvSpec::new(&u, cs.clone()), target).map_err(e2s)?;
    let dx = &naive.weights - &x0;
    let cost: f64 = (0..u.len()).map(|i| if dx[i] < 0.0 { -dx[i] * cs_[i] } else { dx[i] * cb[i] }).sum();
    scalar("naive net return (%)", 100.0 * (u.mu().dot(&naive.weights) - cost), 6.17, PP)?;
    let solve = |g: f64| optimizers::solve_with_transaction_costs(&MvSpec::new(&u, cs.clone()).with_gamma(g), &x0, &cs_, &cb).map(|s| s.portfolio.weights);
    let x = gamma_for_sigma(target, solve, u.cov())?;
    let dx = &x - &x0;
    let cost: f64 = (0..u.len()).map(|i| if dx[i] < 0.0 { -dx[i] * cs_[i] } else { dx[i] * cb[i] }).sum();
    scalar("cost-aware net return (%)", 100.0 * (u.mu().dot(&x) - cost), 6.55, PP)
}

fn bl_inputs(v: &Value) -> std::result::Result<(AssetUniverse, DVector<f64>, f64, SharpeSource, BlViews), String> {
    let w = &v["views"];
    let views = BlViews::new(matrix(w, "P")?, vector(w, "Q")?, matrix(w, "Omega")?, num(w, "tau")?).map_err(e2s)?;
    Ok((universe(v)?, vector(v, "b")?, num(v, "r")?, SharpeSource::Explicit(num(v, "sharpe")?), views))
}

fn black_litterman(v: &Value) -> Check {
    let (u, b, r, sr, views) = bl_inputs(v)?;
    let res = optimizers::black_litterman(&u, &b, r, &sr, &views).map_err(e2s)?;
    scalar("φ", res.phi, 3.4367, 5e-4)?;
    pct("μ̄", &res.posterior, &[5.16, 2.38, 2.47], PP)?;
    pct("x", &res.portfolio.weights, &[56.81, -23.61, 66.80], PP)?;
    scalar("σ(x|b) (%)", 100.0 * volatility(&(&res.portfolio.weights - &b), u.cov()), 8.02, PP)
}

fn black_litterman_tau(v: &Value) -> Check {
    let (u, b, r, sr, views) = bl_inputs(v)?;
    let tau = optimizers::bl_calibrate_tau(&u, &b, r, &sr, &views, num(v, "te_target")?).map_err(e2s)?;
    scalar("τ* (%)", 100.0 * tau, 0.242, 5e-4)?;
    let res = optimizers::black_litterman(&u, &b, r, &sr, &views.with_tau(tau)).map_err(e2s)?;
    pct("x*", &res.portfolio.weights, &[41.18, 11.96, 46.85], PP)?;
    scalar("alpha (%)", 100.0 * (&res.portfolio.weights - &b).dot(&views.q), 3.88, PP)
}

fn jm_implied_vols(v: &Value) -> Check {
    let u = universe(v)?;
    let cs = ConstraintSet::from_json(&v["constraints"].to_string()).map_err(e2s)?;
    let jm = optimizers::jagannathan_ma_covariance(&u, &cs).map_err(e2s)?;
    pct("σ̃", &jm.vols, &[17.14, 20.00, 25.00, 24.52, 16.82], PP)
}

fn erc_jacobi_trace(v: &Value) -> Check {
    let cov = matrix(v, "covariance")?;
    let first = match riskparity::solve_erc_jacobi(&cov, 0.0, 1) {
        Ok(s) => s.weights,
        Err(Error::NotConverged { last, .. }) => DVector::from_vec(last),
        Err(e) => return Err(e.to_string()),
    };
    pct("iterate 1", &first, &[43.1487, 32.3615, 24.4898], 1e-4)?;
    let s = riskparity::solve_erc(&cov).map_err(e2s)?;
    pct("x", &s.weights, &[41.04, 32.19, 26.77], PP)?;
    pct("RC", &s.decomposition.contributions, &[4.97, 4.97, 4.97], PP)
}

fn bonds(v: &Value) -> std::result::Result<BondUniverse, String> {
    let csv = v["bonds_csv"].as_str().ok_or("missing string 'bonds_csv'")?;
    BondUniverse::from_csv(csv, matrix(v, "country_corr")?).map_err(e2s)
}

fn bond_risk_budgeting(v: &Value) -> Check {
    let b = bonds(v)?;
    let budgets = RiskBudget::new(vector(v, "budgets")?).map_err(e2s)?;
    let s = riskparity::solve_rb_volatility(&b.covariance(), &budgets).map_err(e2s)?;
    let y = &s.weights * b.notionals.sum();
    let want = [9.95, 17.62, 5.31, 4.12];
    for (i, (g, w)) in y.iter().zip(want).enumerate() {
        scalar(&format!("y[{i}]"), *g, w, 0.01)?;
    }
    pct("RC*", &s.decomposition.shares, &[20.0, 20.0, 30.0, 30.0], 1e-4)
}

fn log_barrier_scale(v: &Value) -> Check {
    let cov = matrix(v, "covariance")?;
    let x = riskparity::erc_for_log_budget(&cov, num(v, "c")?).map_err(e2s)?;
    scalar("Σx (%)", 100.0 * x.sum(), 34.17, PP)?;
    let d = analytics::risk_decomposition_volatility(&x, &cov).map_err(e2s)?;
    pct("RC*", &d.shares, &vec![100.0 / x.len() as f64; x.len()], 1e-4)
}

fn erc_es(v: &Value) -> Check {
    let u = universe(v)?;
    let s = riskparity::solve_rb_es(u.cov(), u.mu(), &RiskBudget::equal(u.len()), num(v, "alpha")?).map_err(e2s)?;
    pct("x", &s.weights, &[18.53, 18.45, 63.02], PP)?;
    scalar("ES (%)", 100.0 * s.decomposition.risk_total, 8.24, PP)
}

fn long_short_erc(v: &Value) -> Check {
    let u = universe(v)?;
    let n = u.len();
    let p = RbProblem::new(u.cov().clone(), RiskBudget::equal(n)).map_err(e2s)?.with_signs(alternating(n)).map_err(e2s)?;
    let s = riskparity::solve_rb_long_short(&p, LongShortScale::Gross).map_err(e2s)?;
    pct("x", &s.weights, &[14.29, -15.03, 8.94, -6.96, 27.68, -27.10], PP)?;
    scalar("σ(x) (%)", 100.0 * s.decomposition.risk_total, 5.11, PP)?;
    pct("RC*", &s.decomposition.shares, &[100.0 / 6.0; 6], 1e-4)
}

fn zero_budget_enumeration(v: &Value) -> Check {
    let cov = matrix(v, "covariance")?;
    let budgets = RiskBudget::new(vector(v, "budgets")?).map_err(e2s)?;
    let sols = riskparity::enumerate_zero_budget_solutions(&cov, &budgets, 64).map_err(e2s)?;
    if sols.len() != 8 {
        return Err(format!("{} solutions, expected 8", sols.len()));
    }
    let s1 = [20.29, 15.95, 20.82, 14.88, 9.97, 18.08];
    let hit = sols.iter().find(|s| pct("x", &s.solution.weights, &s1, PP).is_ok()).ok_or("S₁ solution not found")?;
    scalar("σ(S₁) (%)", 100.0 * hit.solution.decomposition.risk_total, 8.55, PP)
}

fn critical_correlation(v: &Value) -> Check {
    let rho = riskparity::critical_correlation(&CriticalCorrelation::Mv { sigma: vector(v, "sigma")? }).map_err(e2s)?;
    scalar("ρ* (%)", 100.0 * rho, 29.27, PP)?;
    let sigma = vector(v, "sigma")?;
    let x = riskparity::closed_form(&ClosedForm::MvConstantCorrelation { sigma, rho: rho - 1e-9 }).map_err(e2s)?;
    if x.min() < -1e-6 {
        return Err("weights negative below ρ*".into());
    }
    Ok(())
}

fn factor_model(v: &Value) -> std::result::Result<FactorModel, String> {
    FactorModel::from_json(&v.to_string()).map_err(e2s)
}

fn factor_pseudo_inverse(v: &Value) -> Check {
    let m = factor_model(v)?;
    let pi = factors::pseudo_inverses(&m.a).map_err(e2s)?;
    let row = pi.a_plus.row(0).transpose();
    let want = [0.152, 0.150, 0.188, 0.112, 0.113, 0.234];
    for (i, (g, w)) in row.iter().zip(want).enumerate() {
        scalar(&format!("A⁺[0,{i}]"), *g, w, 1e-3)?;
    }
    Ok(())
}

fn factor_contributions(v: &Value) -> Check {
    let m = factor_model(v)?;
    let d = factors::factor_risk_decomposition(&vector(v, "x")?, &m, &FactorRisk::Volatility).map_err(e2s)?;
    scalar("RC*(F₁) (%)", 100.0 * d.factor_shares[0], 97.95, PP)
}

fn factor_risk_budgeting(v: &Value) -> Check {
    let m = factor_model(v)?;
    let s = factors::solve_factor_rb(&m, &vector(v, "budgets")?, FactorRbMode::LongShort).map_err(e2s)?;
    pct("RC*", &s.decomposition.factor_shares, &[10.0, 40.0, 40.0], PP)?;
    pct("y", &s.decomposition.factor_exposures, &[27.63, 107.39, 107.23], PP)
}

fn credit_risk(v: &Value) -> Check {
    let b = bonds(v)?;
    let c = factors::credit_risk(&b, None).map_err(e2s)?;
    pct("RC*", &c.decomposition.shares, &[14.8, 9.8, 35.2, 40.2], 0.1)?;
    scalar("R(x)", c.decomposition.risk_total, 1.495, 1e-3)
}

fn leverage_equilibrium(v: &Value) -> Check {
    let u = universe(v)?;
    let investors = v["investors"]
        .as_array()
        .ok_or("missing array 'investors'")?
        .iter()
        .map(|i| Investor::new(num(i, "phi")?, num(i, "margin")?, num(i, "wealth")?).map_err(e2s))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let eq = factors::frazzini_pedersen_equilibrium(&u, num(v, "r")?, &investors).map_err(e2s)?;
    pct("α", &eq.alphas, &[0.32, 0.07, -0.41, 0.07], PP)?;
    for (i, (g, w)) in eq.betas.iter().zip([0.62, 0.91, 1.49, 0.91]).enumerate() {
        scalar(&format!("β[{i}]"), *g, w, 0.01)?;
    }
    Ok(())
}

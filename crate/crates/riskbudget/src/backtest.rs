//! Rolling-window rebalancing backtests.
//!
//! At each rebalance date the trailing window gives sample moments `μ̂` and `Σ̂`
//! (denominator `T`), the allocation rule turns them into target weights, and the
//! weights are held until the next rebalance. By default held weights drift with
//! returns; `drift = false` keeps them constant between rebalances.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::core::{AssetUniverse, RiskBudget};
use crate::error::{Error, Result};
use crate::optimizers::{minimum_variance, tangency_constrained, tangency_portfolio, ConstraintSet};
use crate::riskparity::{solve_erc, solve_rb_volatility};

/// Dated asset returns, one row per period.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    dates: Vec<String>,
    names: Vec<String>,
    returns: DMatrix<f64>,
}

fn date_before(a: &str, b: &str) -> bool {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x < y,
        _ => a < b,
    }
}

impl ReturnPanel {
    pub fn new(dates: Vec<String>, names: Vec<String>, returns: DMatrix<f64>) -> Result<Self> {
        Error::check_dim(dates.len(), returns.nrows())?;
        Error::check_dim(names.len(), returns.ncols())?;
        if returns.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("return panel contains non-finite values"));
        }
        if let Some(w) = dates.windows(2).find(|w| !date_before(&w[0], &w[1])) {
            return Err(Error::invalid(format!("dates not strictly increasing at '{}'", w[1])));
        }
        if returns.iter().any(|&v| v <= -1.0) {
            return Err(Error::invalid("returns must exceed -100%"));
        }
        Ok(Self { dates, names, returns })
    }

    /// Panel with integer dates `0..T` and names `A1..An`.
    pub fn from_matrix(returns: DMatrix<f64>) -> Result<Self> {
        let dates = (0..returns.nrows()).map(|t| t.to_string()).collect();
        let names = (1..=returns.ncols()).map(|i| format!("A{i}")).collect();
        Self::new(dates, names, returns)
    }

    /// CSV with header `date,asset1,...,assetN`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "date" {
            return Err(Error::invalid("panel CSV header must be date,asset1,...,assetN"));
        }
        let names: Vec<String> = headers.iter().skip(1).map(String::from).collect();
        let mut dates = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            Error::check_dim(names.len() + 1, rec.len())?;
            dates.push(rec[0].to_string());
            for v in rec.iter().skip(1) {
                values.push(v.parse::<f64>().map_err(|_| Error::invalid(format!("bad return '{v}'")))?);
            }
        }
        let t = dates.len();
        Self::new(dates, names.clone(), DMatrix::from_row_slice(t, names.len(), &values))
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn periods(&self) -> usize {
        self.returns.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.returns.ncols()
    }

    /// Sample mean and population covariance of rows `start..end`.
    pub fn moments(&self, start: usize, end: usize) -> (DVector<f64>, DMatrix<f64>) {
        let rows = self.returns.rows(start, end - start);
        let t = (end - start) as f64;
        let mean = rows.row_mean().transpose();
        let centered = DMatrix::from_fn(rows.nrows(), rows.ncols(), |i, j| rows[(i, j)] - mean[j]);
        let cov = centered.transpose() * &centered / t;
        (mean, cov)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RebalanceSchedule {
    /// Rebalance every `every` periods.
    pub every: usize,
    /// Estimation window length.
    pub window: usize,
    /// Buy-and-hold drift between rebalances; `false` keeps weights constant.
    pub drift: bool,
    pub periods_per_year: f64,
    /// Annual risk-free rate.
    pub rf: f64,
    pub initial_capital: f64,
}

impl RebalanceSchedule {
    pub fn new(every: usize, window: usize) -> Self {
        Self { every, window, drift: true, periods_per_year: 12.0, rf: 0.0, initial_capital: 1.0 }
    }

    pub fn with_drift(mut self, drift: bool) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_periods_per_year(mut self, p: f64) -> Self {
        self.periods_per_year = p;
        self
    }

    pub fn with_rf(mut self, rf: f64) -> Self {
        self.rf = rf;
        self
    }

    pub fn with_capital(mut self, c: f64) -> Self {
        self.initial_capital = c;
        self
    }

    fn validate(&self, n: usize, periods: usize) -> Result<()> {
        if self.every == 0 {
            return Err(Error::invalid("rebalance frequency must be at least one period"));
        }
        if self.window < n + 2 {
            return Err(Error::invalid(format!("window {} shorter than n + 2 = {}", self.window, n + 2)));
        }
        if periods <= self.window {
            return Err(Error::invalid(format!("panel has {periods} periods, window needs more than {}", self.window)));
        }
        if !(self.periods_per_year > 0.0) || !(self.initial_capital > 0.0) || !self.rf.is_finite() {
            return Err(Error::invalid("periods per year and capital must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BudgetMode {
    /// `b ∝ π_∞²/σ_∞²`.
    LongRun,
    /// `b ∝ π_t²/σ_t²`.
    Tactical,
    /// `b ∝ b(∞)σ_t²/σ_∞²`.
    VolScaled,
}

/// Risk budgets from current and long-run premia and volatilities.
pub fn dynamic_budgets(
    pi_t: &DVector<f64>,
    sigma_t: &DVector<f64>,
    pi_inf: &DVector<f64>,
    sigma_inf: &DVector<f64>,
    mode: BudgetMode,
) -> Result<RiskBudget> {
    let n = pi_t.len();
    for v in [sigma_t, pi_inf, sigma_inf] {
        Error::check_dim(n, v.len())?;
    }
    if sigma_t.iter().chain(sigma_inf.iter()).any(|s| !(*s > 0.0)) {
        return Err(Error::invalid("volatilities must be positive"));
    }
    let ratio = |p: &DVector<f64>, s: &DVector<f64>| p.zip_map(s, |a, b| (a / b).powi(2));
    let raw = match mode {
        BudgetMode::LongRun => ratio(pi_inf, sigma_inf),
        BudgetMode::Tactical => ratio(pi_t, sigma_t),
        BudgetMode::VolScaled => {
            ratio(pi_inf, sigma_inf).component_mul(&sigma_t.zip_map(sigma_inf, |a, b| (a / b).powi(2)))
        }
    };
    if raw.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("all risk premia are zero"));
    }
    RiskBudget::normalized(raw)
}

#[derive(Debug, Clone, PartialEq)]
pub enum AllocationRule {
    EqualWeight,
    /// Inverse-volatility weights.
    RiskParity,
    MinimumVariance { long_only: bool },
    Erc,
    RiskBudgeting(RiskBudget),
    Tangency { long_only: bool },
    /// Risk budgeting with [`dynamic_budgets`]; `π_t` is the window mean excess return.
    Dynamic { mode: BudgetMode, long_run_premia: DVector<f64>, long_run_vols: DVector<f64> },
}

impl AllocationRule {
    /// Target weights from window moments; `rf` is per period.
    pub fn weights(&self, mu: &DVector<f64>, cov: &DMatrix<f64>, rf: f64) -> Result<DVector<f64>> {
        let n = mu.len();
        let vols = cov.diagonal().map(f64::sqrt);
        let universe = || AssetUniverse::from_covariance((0..n).map(|i| format!("A{}", i + 1)).collect(), mu.clone(), cov);
        match self {
            AllocationRule::EqualWeight => Ok(DVector::from_element(n, 1.0 / n as f64)),
            AllocationRule::RiskParity => {
                if vols.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::ZeroRisk);
                }
                let inv = vols.map(|v| 1.0 / v);
                Ok(&inv / inv.sum())
            }
            AllocationRule::MinimumVariance { long_only } => {
                let cs = if *long_only { ConstraintSet::long_only(n) } else { ConstraintSet::fully_invested(n) };
                Ok(minimum_variance(&universe()?, &cs)?.weights)
            }
            AllocationRule::Erc => Ok(solve_erc(cov)?.weights),
            AllocationRule::RiskBudgeting(b) => Ok(solve_rb_volatility(cov, b)?.weights),
            AllocationRule::Tangency { long_only } => {
                let u = universe()?;
                if *long_only {
                    Ok(tangency_constrained(&u, &ConstraintSet::long_only(n), rf)?.weights)
                } else {
                    Ok(tangency_portfolio(&u, rf)?.weights)
                }
            }
            AllocationRule::Dynamic { mode, long_run_premia, long_run_vols } => {
                let pi = mu.add_scalar(-rf);
                let b = dynamic_budgets(&pi, &vols, long_run_premia, long_run_vols, *mode)?;
                Ok(solve_rb_volatility(cov, &b)?.weights)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestStats {
    pub annual_return: f64,
    pub annual_volatility: f64,
    pub sharpe: f64,
    /// Mean of `Σ|Δx|` over rebalances after the initial allocation.
    pub average_turnover: f64,
    pub rebalances: usize,
    pub skipped: usize,
    pub periods: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub names: Vec<String>,
    /// Date of each simulated period.
    pub dates: Vec<String>,
    /// Weights held at the start of each period.
    pub weights: DMatrix<f64>,
    /// NAV before the first period followed by the NAV after each period.
    pub nav: DVector<f64>,
    pub period_returns: DVector<f64>,
    /// Period index (into `dates`) of every rebalance after the initial allocation.
    pub rebalance_periods: Vec<usize>,
    pub turnovers: Vec<f64>,
    /// `(date, reason)` for rebalances where the rule failed and weights were kept.
    pub skipped: Vec<(String, String)>,
    pub stats: BacktestStats,
}

impl BacktestResult {
    pub fn weights_csv(&self) -> String {
        let mut s = format!("date,{}\n", self.names.join(","));
        for (t, d) in self.dates.iter().enumerate() {
            let row: Vec<String> = self.weights.row(t).iter().map(|v| format!("{v:.10}")).collect();
            s += &format!("{d},{}\n", row.join(","));
        }
        s
    }

    pub fn nav_csv(&self) -> String {
        let mut s = String::from("date,nav\n");
        s += &format!("start,{:.10}\n", self.nav[0]);
        for (t, d) in self.dates.iter().enumerate() {
            s += &format!("{d},{:.10}\n", self.nav[t + 1]);
        }
        s
    }

    pub fn stats_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.stats)?)
    }
}

pub fn run_backtest(panel: &ReturnPanel, schedule: &RebalanceSchedule, rule: &AllocationRule) -> Result<BacktestResult> {
    let n = panel.n_assets();
    let total = panel.periods();
    schedule.validate(n, total)?;
    let start = schedule.window;
    let periods = total - start;
    let rf = schedule.rf / schedule.periods_per_year;
    let ret = panel.returns();

    let (mu, cov) = panel.moments(0, start);
    let mut w = rule.weights(&mu, &cov, rf)?;
    let mut weights = DMatrix::zeros(periods, n);
    let mut nav = DVector::zeros(periods + 1);
    let mut rp = DVector::zeros(periods);
    nav[0] = schedule.initial_capital;
    let mut rebalance_periods = Vec::new();
    let mut turnovers = Vec::new();
    let mut skipped = Vec::new();

    for k in 0..periods {
        let t = start + k;
        if k > 0 && k % schedule.every == 0 {
            let (mu, cov) = panel.moments(t - schedule.window, t);
            match rule.weights(&mu, &cov, rf) {
                Ok(target) => {
                    turnovers.push((&target - &w).abs().sum());
                    rebalance_periods.push(k);
                    w = target;
                }
                Err(e) => skipped.push((panel.dates()[t].clone(), e.to_string())),
            }
        }
        weights.set_row(k, &w.transpose());
        let r = ret.row(t).transpose();
        let r_p = w.dot(&r);
        rp[k] = r_p;
        nav[k + 1] = nav[k] * (1.0 + r_p);
        if schedule.drift && (1.0 + r_p).abs() > 0.0 {
            w = w.zip_map(&r, |x, ri| x * (1.0 + ri)) / (1.0 + r_p);
        }
    }

    let ppy = schedule.periods_per_year;
    let growth: f64 = rp.iter().map(|r| 1.0 + r).product();
    let annual_return = growth.powf(ppy / periods as f64) - 1.0;
    let mean = rp.mean();
    let annual_volatility = (rp.map(|v| (v - mean).powi(2)).mean() * ppy).sqrt();
    let sharpe = if annual_volatility > 0.0 { (annual_return - schedule.rf) / annual_volatility } else { 0.0 };
    let average_turnover = if turnovers.is_empty() { 0.0 } else { turnovers.iter().sum::<f64>() / turnovers.len() as f64 };
    let stats = BacktestStats {
        annual_return,
        annual_volatility,
        sharpe,
        average_turnover,
        rebalances: turnovers.len(),
        skipped: skipped.len(),
        periods,
    };
    Ok(BacktestResult {
        names: panel.names().to_vec(),
        dates: panel.dates()[start..].to_vec(),
        weights,
        nav,
        period_returns: rp,
        rebalance_periods,
        turnovers,
        skipped,
        stats,
    })
}

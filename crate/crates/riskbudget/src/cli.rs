//! Command implementations behind the `riskbudget` binary.
//!
//! Every command builds a [`Report`] which is rendered as an aligned table
//! (percentages at two decimals), CSV or JSON (raw decimals).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;

use crate::analytics::{self, concentration, diversification_ratio, tracking_stats, GiniConvention, SharpeSource};
use crate::backtest::{run_backtest, AllocationRule, BudgetMode, RebalanceSchedule, ReturnPanel};
use crate::core::{AssetUniverse, RiskBudget, RiskDecomposition};
use crate::error::{Error, Result};
use crate::factors::{factor_risk_decomposition, FactorModel, FactorRisk};
use crate::io::{self, BudgetMeasure};
use crate::measures::{
    cornish_fisher_quantile, es_gaussian, mc_es_contributions, normal, simulate_gaussian_returns, var_es_discrete,
    var_es_empirical, var_gaussian, CfOrder, GaussianLoss,
};
use crate::optimizers::{
    black_litterman, efficient_frontier, jagannathan_ma_covariance, minimum_variance_residual, most_diversified,
    sharpe_ratio, solve_gamma_problem, solve_sigma_target, solve_te_target, tangency_constrained, tangency_portfolio,
    ConstraintSet, MvSpec,
};
use crate::riskparity::{enumerate_zero_budget_solutions, solve_erc, solve_rb, RbProblem, RiskMeasure};

#[derive(Debug, Parser)]
#[command(name = "riskbudget", version, about = "Portfolio optimization and risk budgeting")]
pub struct Cli {
    /// Universe JSON file.
    #[arg(long, global = true)]
    pub universe: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Seed for Monte-Carlo simulation.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Confidence level of VaR/ES.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Output file (output directory for `backtest`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute an optimal portfolio.
    Solve(SolveArgs),
    /// Risk measures and decompositions.
    Risk(RiskArgs),
    /// Rolling-window backtest of an allocation rule.
    Backtest(BacktestArgs),
    /// Mean-variance efficient frontier.
    Frontier(FrontierArgs),
    /// Risk-budgeting portfolios generated by zero budgets.
    EnumerateRb(EnumerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolveKind {
    Mv,
    Tangency,
    Erc,
    Rb,
    Mdp,
    Bl,
    Jm,
    Te,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    Volatility,
    Var,
    Es,
}

#[derive(Debug, clap::Args)]
pub struct SolveArgs {
    #[arg(value_enum)]
    pub kind: SolveKind,
    /// Risk tolerance γ.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub sigma_target: Option<f64>,
    #[arg(long)]
    pub te_target: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub rf: f64,
    /// Constraint JSON file.
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    #[arg(long)]
    pub long_only: bool,
    /// Comma-separated risk budgets.
    #[arg(long)]
    pub budgets: Option<String>,
    /// Budget JSON file.
    #[arg(long)]
    pub budgets_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MeasureArg::Volatility)]
    pub measure: MeasureArg,
    /// Comma-separated benchmark weights.
    #[arg(long)]
    pub benchmark: Option<String>,
    /// Black-Litterman views JSON file.
    #[arg(long)]
    pub views: Option<PathBuf>,
    /// Sharpe ratio of the benchmark; computed from the universe when absent.
    #[arg(long)]
    pub sharpe: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RiskKind {
    Decompose,
    Var,
    Es,
    Cf,
    Concentration,
    Factors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dist {
    Gaussian,
    Discrete,
    Empirical,
    Mc,
}

#[derive(Debug, clap::Args)]
pub struct RiskArgs {
    #[arg(value_enum)]
    pub kind: RiskKind,
    /// Portfolio CSV (`name,weight`).
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Dist::Gaussian)]
    pub dist: Dist,
    /// Loss file: `loss,prob` for discrete, one column of samples for empirical.
    #[arg(long)]
    pub file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MeasureArg::Volatility)]
    pub measure: MeasureArg,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma2: Option<f64>,
    /// Use the third-order Cornish-Fisher expansion.
    #[arg(long)]
    pub third_order: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub mean: Option<f64>,
    #[arg(long)]
    pub sd: Option<f64>,
    /// Factor model JSON file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Monte-Carlo sample size.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Ew,
    Rp,
    Mv,
    Erc,
    Rb,
    Tangency,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    LongRun,
    Tactical,
    VolScaled,
}

#[derive(Debug, clap::Args)]
pub struct BacktestArgs {
    /// Panel CSV (`date,asset1,...`).
    #[arg(long)]
    pub panel: PathBuf,
    #[arg(long, value_enum)]
    pub rule: RuleArg,
    #[arg(long, default_value_t = 1)]
    pub every: usize,
    #[arg(long)]
    pub window: usize,
    #[arg(long, default_value_t = 12.0)]
    pub periods_per_year: f64,
    /// Annual risk-free rate.
    #[arg(long, default_value_t = 0.0)]
    pub rf: f64,
    #[arg(long, default_value_t = 1.0)]
    pub capital: f64,
    #[arg(long)]
    pub budgets: Option<String>,
    #[arg(long)]
    pub long_only: bool,
    /// Keep weights constant between rebalances.
    #[arg(long)]
    pub freeze: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::Tactical)]
    pub mode: ModeArg,
    #[arg(long)]
    pub long_run_premia: Option<String>,
    #[arg(long)]
    pub long_run_vols: Option<String>,
}

#[derive(Debug, clap::Args)]
pub struct FrontierArgs {
    #[arg(long, allow_hyphen_values = true, default_value = "-1,-0.5,-0.25,0,0.25,0.5,1,2")]
    pub gammas: String,
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    #[arg(long)]
    pub long_only: bool,
}

#[derive(Debug, clap::Args)]
pub struct EnumerateArgs {
    #[arg(long)]
    pub budgets: String,
    #[arg(long, default_value_t = 64)]
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Entry {
    pub name: String,
    pub value: f64,
    #[serde(skip)]
    pub percent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    #[serde(skip)]
    pub percent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub title: String,
    pub values: Vec<Entry>,
    pub tables: Vec<Table>,
}

impl Report {
    fn new(title: impl Into<String>) -> Self {
        Self { title: title.into(), values: Vec::new(), tables: Vec::new() }
    }

    fn pct(&mut self, name: &str, value: f64) -> &mut Self {
        self.values.push(Entry { name: name.into(), value, percent: true });
        self
    }

    fn num(&mut self, name: &str, value: f64) -> &mut Self {
        self.values.push(Entry { name: name.into(), value, percent: false });
        self
    }

    fn table(&mut self, table: Table) -> &mut Self {
        self.tables.push(table);
        self
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(self)? + "\n"),
            Format::Csv => Ok(self.render_csv()),
            Format::Table => Ok(self.render_table()),
        }
    }

    fn render_csv(&self) -> String {
        let mut s = String::new();
        if !self.values.is_empty() {
            s += "name,value\n";
            for e in &self.values {
                s += &format!("{},{}\n", e.name, e.value);
            }
        }
        for t in &self.tables {
            if !s.is_empty() {
                s.push('\n');
            }
            s += &format!("{},{}\n", t.title, t.columns.join(","));
            for r in &t.rows {
                let v: Vec<String> = r.values.iter().map(|x| x.to_string()).collect();
                s += &format!("{},{}\n", r.name, v.join(","));
            }
        }
        s
    }

    fn render_table(&self) -> String {
        let cell = |v: f64, pct: bool| if pct { format!("{:.2}", 100.0 * v) } else { format!("{v:.4}") };
        let mut s = format!("{}\n", self.title);
        for t in &self.tables {
            let label_w = t.rows.iter().map(|r| r.name.chars().count()).chain([t.title.chars().count()]).max().unwrap_or(0);
            let cells: Vec<Vec<String>> = t.rows.iter().map(|r| r.values.iter().map(|&v| cell(v, t.percent)).collect()).collect();
            let widths: Vec<usize> = (0..t.columns.len())
                .map(|j| cells.iter().map(|c| c[j].len()).chain([t.columns[j].chars().count()]).max().unwrap_or(0))
                .collect();
            s += &format!("\n{:<label_w$}", t.title);
            for (c, w) in t.columns.iter().zip(&widths) {
                s += &format!("  {c:>w$}");
            }
            s.push('\n');
            for (r, c) in t.rows.iter().zip(&cells) {
                s += &format!("{:<label_w$}", r.name);
                for (v, w) in c.iter().zip(&widths) {
                    s += &format!("  {v:>w$}");
                }
                s.push('\n');
            }
        }
        if !self.values.is_empty() {
            s.push('\n');
            let w = self.values.iter().map(|e| e.name.chars().count()).max().unwrap_or(0);
            for e in &self.values {
                let unit = if e.percent { " %" } else { "" };
                s += &format!("{:<w$}  {}{unit}\n", e.name, cell(e.value, e.percent));
            }
        }
        s
    }
}

/// What a command produced: a report, or files for `backtest --out`.
#[derive(Debug)]
pub enum Output {
    Report(Report),
    Files(Vec<(String, String)>),
}

fn universe(cli: &Cli) -> Result<AssetUniverse> {
    let path = cli.universe.as_ref().ok_or_else(|| Error::invalid("--universe is required"))?;
    io::read_universe(path)
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::invalid(format!("{flag} is required")))
}

fn alpha(cli: &Cli) -> f64 {
    cli.alpha.unwrap_or(0.99)
}

fn constraints(path: &Option<PathBuf>, long_only: bool, n: usize, default_long_only: bool) -> Result<ConstraintSet> {
    match path {
        Some(p) => ConstraintSet::from_json(&io::read_text(p)?),
        None if long_only || default_long_only => Ok(ConstraintSet::long_only(n)),
        None => Ok(ConstraintSet::fully_invested(n)),
    }
}

fn budgets_from_list(s: &str) -> Result<RiskBudget> {
    RiskBudget::new(io::parse_list(s)?)
}

fn portfolio_weights(path: &Path, u: Option<&AssetUniverse>) -> Result<(Vec<String>, DVector<f64>)> {
    let p = io::parse_portfolio_csv(&io::read_text(path)?)?;
    match u {
        Some(u) => Ok((u.names().to_vec(), p.aligned_to(u)?)),
        None => Ok((p.names, p.weights)),
    }
}

fn decomposition_table(names: &[String], d: &RiskDecomposition, budgets: Option<&DVector<f64>>) -> Table {
    let mut columns = vec!["weight".to_string(), "MR".into(), "RC".into(), "RC*".into()];
    if budgets.is_some() {
        columns.push("budget".into());
    }
    let rows = names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let mut values = vec![d.weights[i], d.marginal[i], d.contributions[i], d.shares[i]];
            if let Some(b) = budgets {
                values.push(b[i]);
            }
            Row { name: n.clone(), values }
        })
        .collect();
    Table { title: "asset".into(), columns, rows, percent: true }
}

fn weights_table(names: &[String], cols: &[(&str, &DVector<f64>)]) -> Table {
    let rows = names
        .iter()
        .enumerate()
        .map(|(i, n)| Row { name: n.clone(), values: cols.iter().map(|(_, v)| v[i]).collect() })
        .collect();
    Table { title: "asset".into(), columns: cols.iter().map(|(c, _)| c.to_string()).collect(), rows, percent: true }
}

fn portfolio_report(title: &str, u: &AssetUniverse, x: &DVector<f64>, rf: f64) -> Result<Report> {
    let d = analytics::risk_decomposition_volatility(x, u.cov())?;
    let mut r = Report::new(title);
    r.table(decomposition_table(u.names(), &d, None));
    r.pct("expected_return", u.mu().dot(x))
        .pct("volatility", d.risk_total)
        .num("sharpe", sharpe_ratio(x, u, rf))
        .num("sum_weights", x.sum())
        .num("euler_gap", d.euler_gap());
    Ok(r)
}

fn solve(cli: &Cli, a: &SolveArgs) -> Result<Report> {
    let u = universe(cli)?;
    let n = u.len();
    match a.kind {
        SolveKind::Mv => {
            let cs = constraints(&a.constraints, a.long_only, n, false)?;
            let spec = MvSpec::new(&u, cs.clone()).with_gamma(a.gamma.unwrap_or(0.0));
            let (p, g) = match a.sigma_target {
                Some(s) => solve_sigma_target(&spec, s)?,
                None => (solve_gamma_problem(&spec)?, spec.gamma),
            };
            let mut r = portfolio_report("mean-variance portfolio", &u, &p.weights, a.rf)?;
            r.num("gamma", g);
            if cs.is_budget_only() {
                let grad = u.cov() * &p.weights - u.mu() * g;
                let nu = grad.mean();
                r.num("kkt_residual", grad.add_scalar(-nu).amax());
            }
            Ok(r)
        }
        SolveKind::Tangency => {
            let p = match (&a.constraints, a.long_only) {
                (None, false) => tangency_portfolio(&u, a.rf)?,
                _ => tangency_constrained(&u, &constraints(&a.constraints, a.long_only, n, false)?, a.rf)?,
            };
            portfolio_report("tangency portfolio", &u, &p.weights, a.rf)
        }
        SolveKind::Erc => {
            let s = solve_erc(u.cov())?;
            let mut r = Report::new("equal risk contribution portfolio");
            r.table(decomposition_table(u.names(), &s.decomposition, None));
            r.pct("volatility", s.decomposition.risk_total)
                .num("rb_residual", s.residual)
                .num("euler_gap", s.decomposition.euler_gap())
                .num("iterations", s.iterations as f64);
            Ok(r)
        }
        SolveKind::Rb => {
            let (budgets, measure, signs) = match (&a.budgets, &a.budgets_file) {
                (Some(list), _) => {
                    let m = match a.measure {
                        MeasureArg::Es => BudgetMeasure::Es { alpha: alpha(cli) },
                        MeasureArg::Volatility => BudgetMeasure::Volatility,
                        MeasureArg::Var => return Err(Error::invalid("risk budgeting supports volatility and es")),
                    };
                    (budgets_from_list(list)?, m, None)
                }
                (None, Some(path)) => {
                    let f = io::parse_budget_json(&io::read_text(path)?)?;
                    (f.budgets, f.measure, f.signs)
                }
                (None, None) => return Err(Error::invalid("--budgets or --budgets-file is required")),
            };
            let mut p = RbProblem::new(u.cov().clone(), budgets.clone())?;
            if let BudgetMeasure::Es { alpha } = measure {
                p = p.with_measure(RiskMeasure::GaussianEs { alpha, mu: u.mu().clone() })?;
            }
            if let Some(s) = signs {
                p = p.with_signs(s)?;
            }
            let s = solve_rb(&p)?;
            let mut r = Report::new("risk budgeting portfolio");
            r.table(decomposition_table(u.names(), &s.decomposition, Some(budgets.values())));
            r.pct("risk", s.decomposition.risk_total)
                .num("rb_residual", s.residual)
                .num("euler_gap", s.decomposition.euler_gap())
                .num("iterations", s.iterations as f64);
            Ok(r)
        }
        SolveKind::Mdp => {
            let cs = constraints(&a.constraints, a.long_only, n, true)?;
            let p = most_diversified(&u, &cs)?;
            let mut r = portfolio_report("most diversified portfolio", &u, &p.weights, a.rf)?;
            r.num("diversification_ratio", diversification_ratio(&p.weights, u.cov())?);
            Ok(r)
        }
        SolveKind::Bl => {
            let b = io::parse_list(required(&a.benchmark, "--benchmark")?)?;
            let views = io::parse_views_json(&io::read_text(required(&a.views, "--views")?)?)?;
            let sharpe = match a.sharpe {
                Some(s) => SharpeSource::Explicit(s),
                None => SharpeSource::Returns { mu: u.mu().clone(), r: a.rf },
            };
            let res = black_litterman(&u, &b, a.rf, &sharpe, &views)?;
            let x = &res.portfolio.weights;
            let mut r = Report::new("Black-Litterman portfolio");
            r.table(weights_table(u.names(), &[("benchmark", &b), ("implied", &res.implied), ("posterior", &res.posterior), ("weight", x)]));
            let ts = tracking_stats(x, &b, u.cov(), &res.posterior)?;
            r.num("phi", res.phi).pct("tracking_error", ts.tracking_error).pct("excess_return", ts.excess_return).num("sum_weights", x.sum());
            Ok(r)
        }
        SolveKind::Jm => {
            let cs = constraints(&a.constraints, a.long_only, n, true)?;
            let jm = jagannathan_ma_covariance(&u, &cs)?;
            let mut r = Report::new("implied covariance of the constrained minimum-variance portfolio");
            r.table(weights_table(u.names(), &[("weight", &jm.constrained), ("shift", &jm.shift), ("implied_vol", &jm.vols)]));
            r.num("min_eigenvalue", jm.min_eigenvalue).num("unconstrained_residual", minimum_variance_residual(&jm.cov, &jm.constrained));
            Ok(r)
        }
        SolveKind::Te => {
            let b = io::parse_list(required(&a.benchmark, "--benchmark")?)?;
            let cs = constraints(&a.constraints, a.long_only, n, false)?;
            let spec = MvSpec::new(&u, cs).with_benchmark(b.clone()).with_gamma(a.gamma.unwrap_or(0.0));
            let (p, g) = match a.te_target {
                Some(t) => solve_te_target(&spec, t)?,
                None => (solve_gamma_problem(&spec)?, spec.gamma),
            };
            let ts = tracking_stats(&p.weights, &b, u.cov(), u.mu())?;
            let mut r = Report::new("benchmark-relative portfolio");
            r.table(weights_table(u.names(), &[("benchmark", &b), ("weight", &p.weights)]));
            r.num("gamma", g)
                .pct("excess_return", ts.excess_return)
                .pct("tracking_error", ts.tracking_error)
                .num("information_ratio", ts.information_ratio)
                .num("beta", ts.beta)
                .num("correlation", ts.correlation);
            Ok(r)
        }
    }
}

fn risk(cli: &Cli, a: &RiskArgs) -> Result<Report> {
    let level = alpha(cli);
    match a.kind {
        RiskKind::Decompose => {
            let u = universe(cli)?;
            let (names, x) = portfolio_weights(required(&a.weights, "--weights")?, Some(&u))?;
            let d = match a.measure {
                MeasureArg::Volatility => analytics::risk_decomposition_volatility(&x, u.cov())?,
                MeasureArg::Var => analytics::risk_decomposition_var(&x, u.cov(), u.mu(), level)?,
                MeasureArg::Es => analytics::risk_decomposition_es(&x, u.cov(), u.mu(), level)?,
            };
            let mut r = Report::new("risk decomposition");
            r.table(decomposition_table(&names, &d, None));
            r.pct("risk", d.risk_total).num("euler_gap", d.euler_gap());
            Ok(r)
        }
        RiskKind::Var | RiskKind::Es => {
            let mut r = Report::new(if a.kind == RiskKind::Var { "value at risk" } else { "expected shortfall" });
            r.num("alpha", level);
            let (var, es) = match a.dist {
                Dist::Gaussian => {
                    let loss = match (a.mean, a.sd) {
                        (Some(m), Some(s)) => GaussianLoss::new(m, s)?,
                        _ => {
                            let u = universe(cli)?;
                            let (_, x) = portfolio_weights(required(&a.weights, "--weights")?, Some(&u))?;
                            GaussianLoss::of_portfolio(&x, u.mu(), u.cov())
                        }
                    };
                    (var_gaussian(loss, level)?, es_gaussian(loss, level)?)
                }
                Dist::Discrete => var_es_discrete(&io::parse_discrete_loss(&io::read_text(required(&a.file, "--file")?)?)?, level)?,
                Dist::Empirical => var_es_empirical(&io::parse_samples(&io::read_text(required(&a.file, "--file")?)?)?, level)?,
                Dist::Mc => {
                    let u = universe(cli)?;
                    let (names, x) = portfolio_weights(required(&a.weights, "--weights")?, Some(&u))?;
                    let sims = simulate_gaussian_returns(u.mu(), u.cov(), a.samples, cli.seed);
                    let mc = mc_es_contributions(&x, &sims, level, 50)?;
                    let analytic = analytics::risk_decomposition_es(&x, u.cov(), u.mu(), level)?;
                    r.table(Table {
                        title: "asset".into(),
                        columns: vec!["RC_mc".into(), "std_error".into(), "RC_gaussian".into()],
                        rows: names
                            .iter()
                            .enumerate()
                            .map(|(i, n)| Row { name: n.clone(), values: vec![mc.contributions[i], mc.std_errors[i], analytic.contributions[i]] })
                            .collect(),
                        percent: true,
                    });
                    r.num("samples", a.samples as f64).num("seed", cli.seed as f64);
                    (mc.var, mc.es)
                }
            };
            r.num("var", var);
            if a.kind == RiskKind::Es {
                r.num("es", es);
            }
            Ok(r)
        }
        RiskKind::Cf => {
            let g1 = *required(&a.gamma1, "--gamma1")?;
            let g2 = *required(&a.gamma2, "--gamma2")?;
            if !(0.5..1.0).contains(&level) {
                return Err(Error::invalid(format!("confidence level {level} outside [0.5, 1)")));
            }
            let order = if a.third_order { CfOrder::Three } else { CfOrder::Four };
            let z = normal::quantile(level);
            let zcf = cornish_fisher_quantile(z, g1, g2, order);
            let mut r = Report::new("Cornish-Fisher quantile");
            r.num("alpha", level).num("z_gaussian", z).num("z_cornish_fisher", zcf);
            if let (Some(m), Some(s)) = (a.mean, a.sd) {
                r.num("var", m + zcf * s);
            }
            Ok(r)
        }
        RiskKind::Concentration => {
            let u = cli.universe.as_ref().map(|p| io::read_universe(p)).transpose()?;
            let (names, w) = portfolio_weights(required(&a.weights, "--weights")?, u.as_ref())?;
            let c = concentration(&w, GiniConvention::Trapezoidal)?;
            let mut r = Report::new("weight concentration");
            r.table(weights_table(&names, &[("weight", &w)]));
            r.num("gini", c.gini).num("herfindahl", c.herfindahl).num("effective_n", c.effective_n);
            Ok(r)
        }
        RiskKind::Factors => {
            let model = FactorModel::from_json(&io::read_text(required(&a.model, "--model")?)?)?;
            let (names, x) = portfolio_weights(required(&a.weights, "--weights")?, None)?;
            let measure = match a.measure {
                MeasureArg::Volatility => FactorRisk::Volatility,
                MeasureArg::Var => FactorRisk::GaussianVar { alpha: level, mu: None },
                MeasureArg::Es => return Err(Error::invalid("factor decomposition supports volatility and var")),
            };
            let d = factor_risk_decomposition(&x, &model, &measure)?;
            let block = |prefix: &str, y: &DVector<f64>, m: &DVector<f64>, rc: &DVector<f64>, sh: &DVector<f64>| -> Vec<Row> {
                (0..y.len()).map(|j| Row { name: format!("{prefix}{}", j + 1), values: vec![y[j], m[j], rc[j], sh[j]] }).collect()
            };
            let mut rows = block("F", &d.factor_exposures, &d.factor_marginal, &d.factor_contributions, &d.factor_shares);
            rows.extend(block("S", &d.specific_exposures, &d.specific_marginal, &d.specific_contributions, &d.specific_shares));
            let mut r = Report::new("factor risk decomposition");
            r.table(Table {
                title: "factor".into(),
                columns: vec!["exposure".into(), "MR".into(), "RC".into(), "RC*".into()],
                rows,
                percent: true,
            });
            r.table(weights_table(&names, &[("weight", &x)]));
            r.pct("risk", d.risk_total).num("additivity_gap", d.additivity_gap());
            Ok(r)
        }
    }
}

fn backtest(cli: &Cli, a: &BacktestArgs) -> Result<Output> {
    let panel = ReturnPanel::from_csv(&io::read_text(&a.panel)?)?;
    let rule = match a.rule {
        RuleArg::Ew => AllocationRule::EqualWeight,
        RuleArg::Rp => AllocationRule::RiskParity,
        RuleArg::Mv => AllocationRule::MinimumVariance { long_only: a.long_only },
        RuleArg::Erc => AllocationRule::Erc,
        RuleArg::Rb => AllocationRule::RiskBudgeting(budgets_from_list(required(&a.budgets, "--budgets")?)?),
        RuleArg::Tangency => AllocationRule::Tangency { long_only: a.long_only },
        RuleArg::Dynamic => AllocationRule::Dynamic {
            mode: match a.mode {
                ModeArg::LongRun => BudgetMode::LongRun,
                ModeArg::Tactical => BudgetMode::Tactical,
                ModeArg::VolScaled => BudgetMode::VolScaled,
            },
            long_run_premia: io::parse_list(required(&a.long_run_premia, "--long-run-premia")?)?,
            long_run_vols: io::parse_list(required(&a.long_run_vols, "--long-run-vols")?)?,
        },
    };
    let schedule = RebalanceSchedule::new(a.every, a.window)
        .with_drift(!a.freeze)
        .with_periods_per_year(a.periods_per_year)
        .with_rf(a.rf)
        .with_capital(a.capital);
    let res = run_backtest(&panel, &schedule, &rule)?;
    for (date, reason) in &res.skipped {
        eprintln!("rebalance on {date} skipped: {reason}");
    }
    if cli.out.is_some() {
        return Ok(Output::Files(vec![
            ("weights.csv".into(), res.weights_csv()),
            ("nav.csv".into(), res.nav_csv()),
            ("stats.json".into(), res.stats_json()? + "\n"),
        ]));
    }
    let s = &res.stats;
    let mut r = Report::new("backtest");
    r.pct("annual_return", s.annual_return)
        .pct("annual_volatility", s.annual_volatility)
        .num("sharpe", s.sharpe)
        .pct("average_turnover", s.average_turnover)
        .num("rebalances", s.rebalances as f64)
        .num("skipped", s.skipped as f64)
        .num("periods", s.periods as f64)
        .num("final_nav", res.nav[res.nav.len() - 1]);
    Ok(Output::Report(r))
}

fn frontier(cli: &Cli, a: &FrontierArgs) -> Result<Report> {
    let u = universe(cli)?;
    let cs = constraints(&a.constraints, a.long_only, u.len(), false)?;
    let gammas = io::parse_list(&a.gammas)?;
    let pts = efficient_frontier(&u, &cs, gammas.as_slice())?;
    let mut columns: Vec<String> = u.names().to_vec();
    columns.push("mu".into());
    columns.push("sigma".into());
    let rows = pts
        .iter()
        .map(|p| {
            let mut values: Vec<f64> = p.weights.iter().cloned().collect();
            values.push(p.mean);
            values.push(p.volatility);
            Row { name: format!("{}", p.gamma), values }
        })
        .collect();
    let mut r = Report::new("efficient frontier");
    r.table(Table { title: "gamma".into(), columns, rows, percent: true });
    Ok(r)
}

fn enumerate_rb(cli: &Cli, a: &EnumerateArgs) -> Result<Report> {
    let u = universe(cli)?;
    let b = budgets_from_list(&a.budgets)?;
    let sols = enumerate_zero_budget_solutions(u.cov(), &b, a.max)?;
    let mut columns: Vec<String> = u.names().to_vec();
    columns.push("sigma".into());
    columns.push("rb_residual".into());
    let rows = sols
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let mut values: Vec<f64> = s.solution.weights.iter().cloned().collect();
            values.push(s.solution.decomposition.risk_total);
            values.push(s.solution.residual);
            let inc: Vec<String> = s.included.iter().map(|&i| u.names()[i].clone()).collect();
            Row { name: format!("{}[{}]", k + 1, inc.join("+")), values }
        })
        .collect();
    let mut r = Report::new("risk budgeting solutions with zero budgets");
    r.table(Table { title: "solution".into(), columns, rows, percent: true });
    r.num("count", sols.len() as f64);
    Ok(r)
}

pub fn execute(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Solve(a) => solve(cli, a).map(Output::Report),
        Command::Risk(a) => risk(cli, a).map(Output::Report),
        Command::Backtest(a) => backtest(cli, a),
        Command::Frontier(a) => frontier(cli, a).map(Output::Report),
        Command::EnumerateRb(a) => enumerate_rb(cli, a).map(Output::Report),
    }
}

/// Exit status for an error: 2 when infeasible, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible(_) => 2,
        _ => 1,
    }
}

fn emit(cli: &Cli, out: Output) -> Result<()> {
    match (out, &cli.out) {
        (Output::Report(r), None) => {
            print!("{}", r.render(cli.format)?);
        }
        (Output::Report(r), Some(path)) => fs::write(path, r.render(cli.format)?)?,
        (Output::Files(files), Some(dir)) => {
            fs::create_dir_all(dir)?;
            for (name, content) in files {
                fs::write(dir.join(name), content)?;
            }
        }
        (Output::Files(_), None) => unreachable!("files are only produced with --out"),
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli).and_then(|o| emit(&cli, o)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

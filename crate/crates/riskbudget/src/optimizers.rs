//! Mean-variance optimization and its extensions.
//!
//! Every program is expressed in the γ-form `min ½xᵀΣx − γxᵀμ` (plus `xᵀΣb` when a
//! benchmark is present) and handed to [`crate::qp`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analytics::SharpeSource;
use crate::core::{volatility, AssetUniverse, Portfolio};
use crate::error::{Error, Result};
use crate::linalg::{inverse, mat_from_rows, mat_to_rows, min_eigenvalue, quad, solve};
use crate::qp::{solve_qp, QpProblem, QpSolution, QpStatus};

const SIGMA_TOL: f64 = 1e-6;
const GAMMA_CAP: f64 = 1_152_921_504_606_846_976.0; // 2^60

/// Linear constraints on the weights: optional budget `1ᵀx = 1`, box bounds,
/// `Cx ≥ D` and `Ax = B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub budget: bool,
    pub lower: Option<DVector<f64>>,
    pub upper: Option<DVector<f64>>,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl ConstraintSet {
    /// No constraint at all.
    pub fn none(n: usize) -> Self {
        Self {
            budget: false,
            lower: None,
            upper: None,
            c: DMatrix::zeros(0, n),
            d: DVector::zeros(0),
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
        }
    }

    pub fn fully_invested(n: usize) -> Self {
        Self { budget: true, ..Self::none(n) }
    }

    /// Fully invested with `0 ≤ x ≤ 1`.
    pub fn long_only(n: usize) -> Self {
        Self::fully_invested(n).with_bounds(Some(DVector::zeros(n)), Some(DVector::from_element(n, 1.0)))
    }

    pub fn with_bounds(mut self, lower: Option<DVector<f64>>, upper: Option<DVector<f64>>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn with_ineq(mut self, c: DMatrix<f64>, d: DVector<f64>) -> Self {
        self.c = c;
        self.d = d;
        self
    }

    pub fn with_eq(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a = a;
        self.b = b;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for v in [&self.lower, &self.upper].into_iter().flatten() {
            Error::check_dim(n, v.len())?;
        }
        if self.c.nrows() > 0 || self.d.len() > 0 {
            Error::check_dim(n, self.c.ncols())?;
        }
        Error::check_dim(self.c.nrows(), self.d.len())?;
        if self.a.nrows() > 0 || self.b.len() > 0 {
            Error::check_dim(n, self.a.ncols())?;
        }
        Error::check_dim(self.a.nrows(), self.b.len())
    }

    /// True when the only constraint is `1ᵀx = 1`.
    pub fn is_budget_only(&self) -> bool {
        self.budget && !self.has_bounds() && self.c.nrows() == 0 && self.a.nrows() == 0
    }

    fn has_bounds(&self) -> bool {
        let finite = |v: &Option<DVector<f64>>| v.as_ref().is_some_and(|v| v.iter().any(|x| x.is_finite()));
        finite(&self.lower) || finite(&self.upper)
    }

    /// Budget plus `x ≥ 0` and nothing else, upper bounds of one being redundant.
    fn is_simplex(&self) -> bool {
        let lower_zero = self.lower.as_ref().is_some_and(|l| l.iter().all(|v| *v == 0.0));
        let upper_slack = self.upper.as_ref().is_none_or(|u| u.iter().all(|v| *v >= 1.0));
        self.budget && lower_zero && upper_slack && self.c.nrows() == 0 && self.a.nrows() == 0
    }

    /// Builds the QP. The budget row, when present, is the last equality row.
    pub fn to_qp(&self, q: DMatrix<f64>, r: DVector<f64>) -> Result<QpProblem> {
        let n = r.len();
        self.validate(n)?;
        let a = if self.a.nrows() == 0 { DMatrix::zeros(0, n) } else { self.a.clone() };
        let c = if self.c.nrows() == 0 { DMatrix::zeros(0, n) } else { self.c.clone() };
        let p = QpProblem::new(q, r)
            .with_eq(a, self.b.clone())
            .with_ineq(c, self.d.clone())
            .with_bounds(self.lower.clone(), self.upper.clone());
        Ok(if self.budget { p.with_budget() } else { p })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ConstraintJson = serde_json::from_str(text)?;
        raw.try_into()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ConstraintJson::from(self))?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ConstraintJson {
    #[serde(default = "default_budget")]
    budget: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds: Option<BoundsJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ineq: Option<IneqJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eq: Option<EqJson>,
}

fn default_budget() -> bool {
    true
}

/// `null` entries mean "unbounded".
#[derive(Debug, Serialize, Deserialize)]
struct BoundsJson {
    #[serde(default)]
    lower: Option<Vec<Option<f64>>>,
    #[serde(default)]
    upper: Option<Vec<Option<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IneqJson {
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EqJson {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<f64>,
}

impl TryFrom<ConstraintJson> for ConstraintSet {
    type Error = Error;

    fn try_from(j: ConstraintJson) -> Result<Self> {
        let bound = |v: Option<Vec<Option<f64>>>, fill: f64| {
            v.map(|v| DVector::from_iterator(v.len(), v.into_iter().map(|x| x.unwrap_or(fill))))
        };
        let (lower, upper) = match j.bounds {
            Some(b) => (bound(b.lower, f64::NEG_INFINITY), bound(b.upper, f64::INFINITY)),
            None => (None, None),
        };
        let n = [lower.as_ref().map(|v| v.len()), upper.as_ref().map(|v| v.len())]
            .into_iter()
            .flatten()
            .chain(j.ineq.iter().flat_map(|i| i.c.first().map(|r| r.len())))
            .chain(j.eq.iter().flat_map(|e| e.a.first().map(|r| r.len())))
            .next()
            .unwrap_or(0);
        let mut set = ConstraintSet { budget: j.budget, ..ConstraintSet::none(n) }.with_bounds(lower, upper);
        if let Some(i) = j.ineq {
            if !i.c.is_empty() {
                set = set.with_ineq(mat_from_rows(&i.c)?, DVector::from_vec(i.d));
            } else if !i.d.is_empty() {
                return Err(Error::Dimension { expected: 0, got: i.d.len() });
            }
        }
        if let Some(e) = j.eq {
            if !e.a.is_empty() {
                set = set.with_eq(mat_from_rows(&e.a)?, DVector::from_vec(e.b));
            } else if !e.b.is_empty() {
                return Err(Error::Dimension { expected: 0, got: e.b.len() });
            }
        }
        set.validate(n)?;
        Ok(set)
    }
}

impl From<&ConstraintSet> for ConstraintJson {
    fn from(s: &ConstraintSet) -> Self {
        let opt = |v: &Option<DVector<f64>>| {
            v.as_ref().map(|v| v.iter().map(|x| if x.is_finite() { Some(*x) } else { None }).collect())
        };
        let bounds = if s.lower.is_some() || s.upper.is_some() {
            Some(BoundsJson { lower: opt(&s.lower), upper: opt(&s.upper) })
        } else {
            None
        };
        ConstraintJson {
            budget: s.budget,
            bounds,
            ineq: (s.c.nrows() > 0).then(|| IneqJson { c: mat_to_rows(&s.c), d: s.d.iter().cloned().collect() }),
            eq: (s.a.nrows() > 0).then(|| EqJson { a: mat_to_rows(&s.a), b: s.b.iter().cloned().collect() }),
        }
    }
}

/// Mean-variance problem specification.
#[derive(Debug, Clone)]
pub struct MvSpec<'a> {
    pub universe: &'a AssetUniverse,
    /// Risk tolerance γ = 1/φ.
    pub gamma: f64,
    pub constraints: ConstraintSet,
    pub benchmark: Option<DVector<f64>>,
    pub rf: Option<f64>,
}

impl<'a> MvSpec<'a> {
    pub fn new(universe: &'a AssetUniverse, constraints: ConstraintSet) -> Self {
        Self { universe, gamma: 0.0, constraints, benchmark: None, rf: None }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_benchmark(mut self, b: DVector<f64>) -> Self {
        self.benchmark = Some(b);
        self
    }

    pub fn with_rf(mut self, r: f64) -> Self {
        self.rf = Some(r);
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.universe.len();
        self.constraints.validate(n)?;
        if let Some(b) = &self.benchmark {
            Error::check_dim(n, b.len())?;
        }
        if !self.gamma.is_finite() {
            return Err(Error::invalid("γ must be finite"));
        }
        Ok(())
    }

    fn linear_term(&self, gamma: f64) -> DVector<f64> {
        let mut r = self.universe.mu() * gamma;
        if let Some(b) = &self.benchmark {
            r += self.universe.cov() * b;
        }
        r
    }

    fn problem(&self, gamma: f64) -> Result<QpProblem> {
        self.constraints.to_qp(self.universe.cov().clone(), self.linear_term(gamma))
    }

    fn weights_at(&self, gamma: f64) -> Result<DVector<f64>> {
        Ok(optimal(&self.problem(gamma)?)?.x)
    }

    fn portfolio(&self, x: DVector<f64>) -> Result<Portfolio> {
        Portfolio::for_universe(self.universe, x)
    }
}

/// Solves a QP and turns a non-optimal status into an error.
pub(crate) fn optimal(p: &QpProblem) -> Result<QpSolution> {
    let s = solve_qp(p)?;
    match s.status {
        QpStatus::Optimal => Ok(s),
        QpStatus::Infeasible => Err(Error::Infeasible("constraints admit no feasible portfolio".into())),
        QpStatus::MaxIterations => Err(Error::NotConverged { iterations: s.iterations, last: s.x.iter().cloned().collect() }),
    }
}

/// `argmin ½xᵀΣx − γxᵀμ` (minus `xᵀΣb` with a benchmark) under the constraints.
pub fn solve_gamma_problem(spec: &MvSpec) -> Result<Portfolio> {
    spec.validate()?;
    spec.portfolio(spec.weights_at(spec.gamma)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub gamma: f64,
    pub weights: DVector<f64>,
    pub mean: f64,
    pub volatility: f64,
}

pub fn efficient_frontier(universe: &AssetUniverse, constraints: &ConstraintSet, gammas: &[f64]) -> Result<Vec<FrontierPoint>> {
    let spec = MvSpec::new(universe, constraints.clone());
    spec.validate()?;
    gammas
        .iter()
        .map(|&g| {
            let x = spec.weights_at(g)?;
            Ok(FrontierPoint { gamma: g, mean: universe.mu().dot(&x), volatility: volatility(&x, universe.cov()), weights: x })
        })
        .collect()
}

/// Finds γ ≥ 0 with `metric(x*(γ)) = target` by doubling then bisection.
fn bisect_gamma(
    spec: &MvSpec,
    target: f64,
    metric: impl Fn(&DVector<f64>) -> f64,
    what: &str,
) -> Result<(DVector<f64>, f64)> {
    let x0 = spec.weights_at(0.0)?;
    let m0 = metric(&x0);
    if (m0 - target).abs() <= SIGMA_TOL {
        return Ok((x0, 0.0));
    }
    if target < m0 {
        return Err(Error::Infeasible(format!(
            "no solution: target {what} {target} is below the minimum attainable {m0}"
        )));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    loop {
        let x = spec.weights_at(hi)?;
        let m = metric(&x);
        if (m - target).abs() <= SIGMA_TOL {
            return Ok((x, hi));
        }
        if m > target {
            break;
        }
        if hi >= GAMMA_CAP {
            return Err(Error::Infeasible(format!(
                "no solution: target {what} {target} exceeds the maximum attainable {m}"
            )));
        }
        lo = hi;
        hi *= 2.0;
    }
    let mut best = (spec.weights_at(hi)?, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let x = spec.weights_at(mid)?;
        let m = metric(&x);
        best = (x, mid);
        if (m - target).abs() <= SIGMA_TOL || hi - lo <= 1e-15 * hi {
            break;
        }
        if m < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// Portfolio on the constrained frontier with volatility `σ*`, and its implied γ.
pub fn solve_sigma_target(spec: &MvSpec, sigma_target: f64) -> Result<(Portfolio, f64)> {
    spec.validate()?;
    let cov = spec.universe.cov();
    let (x, g) = bisect_gamma(spec, sigma_target, |x| volatility(x, cov), "volatility")?;
    Ok((spec.portfolio(x)?, g))
}

/// `x* = Σ⁻¹(μ − r1)/(1ᵀΣ⁻¹(μ − r1))`.
pub fn tangency_portfolio(universe: &AssetUniverse, r: f64) -> Result<Portfolio> {
    let n = universe.len();
    let excess = universe.mu() - DVector::from_element(n, r);
    let y = solve(universe.cov(), &excess)?;
    let den = y.sum();
    if den.abs() <= 1e-12 * y.amax().max(1e-300) {
        return Err(Error::Singular("degenerate tangency portfolio: 1ᵀΣ⁻¹(μ − r1) = 0".into()));
    }
    Portfolio::for_universe(universe, y / den)
}

pub fn sharpe_ratio(x: &DVector<f64>, universe: &AssetUniverse, r: f64) -> f64 {
    (universe.mu().dot(x) - r * x.sum()) / volatility(x, universe.cov())
}

/// Maximum-Sharpe portfolio under constraints. Requires the budget constraint.
pub fn tangency_constrained(universe: &AssetUniverse, constraints: &ConstraintSet, r: f64) -> Result<Portfolio> {
    if constraints.is_budget_only() {
        return tangency_portfolio(universe, r);
    }
    let n = universe.len();
    let excess = universe.mu() - DVector::from_element(n, r);
    let x = max_ratio(universe.cov(), &excess, constraints)?;
    Portfolio::for_universe(universe, x)
}

/// Maximizes `eᵀx/σ(x)` under the constraints.
///
/// On the long-only simplex this is exact through the homogeneous program
/// `min ½yᵀΣy s.t. eᵀy = 1, y ≥ 0`. Otherwise the γ-frontier with `μ = e` is swept on a
/// log grid and refined by golden section.
fn max_ratio(cov: &DMatrix<f64>, excess: &DVector<f64>, constraints: &ConstraintSet) -> Result<DVector<f64>> {
    let n = excess.len();
    constraints.validate(n)?;
    if !constraints.budget {
        return Err(Error::invalid("maximum ratio portfolios need the budget constraint"));
    }
    if constraints.is_simplex() {
        if excess.iter().all(|e| *e <= 0.0) {
            return Err(Error::Infeasible("no asset has a positive excess return".into()));
        }
        let p = QpProblem::new(cov.clone(), DVector::zeros(n))
            .with_eq(DMatrix::from_row_slice(1, n, excess.as_slice()), DVector::from_element(1, 1.0))
            .with_bounds(Some(DVector::zeros(n)), None);
        let y = optimal(&p)?.x;
        return Ok(&y / y.sum());
    }
    let at = |g: f64| -> Result<(DVector<f64>, f64)> {
        let p = constraints.to_qp(cov.clone(), excess * g)?;
        let x = optimal(&p)?.x;
        let s = volatility(&x, cov);
        let ratio = if s > 0.0 { excess.dot(&x) / s } else { f64::NEG_INFINITY };
        Ok((x, ratio))
    };
    let grid: Vec<f64> = (0..=40).map(|k| 10f64.powf(-4.0 + 0.2 * k as f64)).collect();
    let mut vals = Vec::with_capacity(grid.len());
    for &g in &grid {
        vals.push(at(g)?.1);
    }
    let k = (0..grid.len()).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    let mut a = grid[k.saturating_sub(1)].ln();
    let mut b = grid[(k + 1).min(grid.len() - 1)].ln();
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = at(c.exp())?.1;
    let mut fd = at(d.exp())?.1;
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = at(c.exp())?.1;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = at(d.exp())?.1;
        }
    }
    let (x_mid, f_mid) = at((0.5 * (a + b)).exp())?;
    let (x_grid, f_grid) = at(grid[k])?;
    Ok(if f_grid > f_mid { x_grid } else { x_mid })
}

/// `x = Σ⁻¹1/(1ᵀΣ⁻¹1)`; works for any non-singular symmetric matrix.
pub fn unconstrained_minimum_variance(cov: &DMatrix<f64>) -> Result<DVector<f64>> {
    let ones = DVector::from_element(cov.nrows(), 1.0);
    let y = solve(cov, &ones)?;
    let den = y.sum();
    if den.abs() < 1e-300 {
        return Err(Error::Singular("1ᵀΣ⁻¹1 = 0".into()));
    }
    Ok(y / den)
}

pub fn minimum_variance(universe: &AssetUniverse, constraints: &ConstraintSet) -> Result<Portfolio> {
    constraints.validate(universe.len())?;
    let x = if constraints.is_budget_only() {
        unconstrained_minimum_variance(universe.cov())?
    } else {
        MvSpec::new(universe, constraints.clone()).weights_at(0.0)?
    };
    Portfolio::for_universe(universe, x)
}

/// Maximizes the diversification ratio; closed form `Σ⁻¹σ/(1ᵀΣ⁻¹σ)` under the budget alone.
pub fn most_diversified(universe: &AssetUniverse, constraints: &ConstraintSet) -> Result<Portfolio> {
    let sigma = universe.sigma();
    let x = if constraints.is_budget_only() {
        let y = solve(universe.cov(), sigma)?;
        let den = y.sum();
        if den.abs() <= 1e-12 * y.amax().max(1e-300) {
            return Err(Error::Singular("degenerate most diversified portfolio".into()));
        }
        y / den
    } else {
        max_ratio(universe.cov(), sigma, constraints)?
    };
    Portfolio::for_universe(universe, x)
}

fn benchmark_of(spec: &MvSpec) -> Result<DVector<f64>> {
    spec.benchmark.clone().ok_or_else(|| Error::invalid("tracking-error problems need a benchmark"))
}

/// `argmin ½xᵀΣx − xᵀ(γμ + Σb)` for each γ.
pub fn tracking_error_frontier(spec: &MvSpec, gammas: &[f64]) -> Result<Vec<Portfolio>> {
    spec.validate()?;
    benchmark_of(spec)?;
    gammas.iter().map(|&g| spec.portfolio(spec.weights_at(g)?)).collect()
}

/// Portfolio with tracking-error volatility `σ(x|b) = target`, and its γ.
pub fn solve_te_target(spec: &MvSpec, te_target: f64) -> Result<(Portfolio, f64)> {
    spec.validate()?;
    let b = benchmark_of(spec)?;
    let cov = spec.universe.cov();
    let (x, g) = bisect_gamma(spec, te_target, |x| volatility(&(x - &b), cov), "tracking error")?;
    Ok((spec.portfolio(x)?, g))
}

/// Largest tracking error over long-only fully-invested portfolios, attained at a vertex `e_i`.
pub fn max_tracking_error_long_only(b: &DVector<f64>, cov: &DMatrix<f64>) -> Result<(usize, f64)> {
    Error::check_dim(cov.nrows(), b.len())?;
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..b.len() {
        let mut e = -b.clone();
        e[i] += 1.0;
        let te = volatility(&e, cov);
        if te > best.1 {
            best = (i, te);
        }
    }
    Ok(best)
}

/// Embeds the problem in the variables `(x, x⁻, x⁺)` with `x − x⁺ + x⁻ = x⁰`.
fn trade_problem(spec: &MvSpec, x0: &DVector<f64>, cost_budget: Option<(&DVector<f64>, &DVector<f64>)>) -> Result<QpProblem> {
    let n = spec.universe.len();
    Error::check_dim(n, x0.len())?;
    let cs = &spec.constraints;
    let m = 3 * n;
    let mut q = DMatrix::zeros(m, m);
    q.view_mut((0, 0), (n, n)).copy_from(spec.universe.cov());
    let mut r = DVector::zeros(m);
    r.rows_mut(0, n).copy_from(&spec.linear_term(spec.gamma));
    if let Some((cm, cp)) = cost_budget {
        r.rows_mut(n, n).copy_from(&(-cm * spec.gamma));
        r.rows_mut(2 * n, n).copy_from(&(-cp * spec.gamma));
    }

    let k = cs.a.nrows();
    let budget_rows = usize::from(cs.budget);
    let mut a = DMatrix::zeros(n + k + budget_rows, m);
    let mut b = DVector::zeros(n + k + budget_rows);
    for i in 0..n {
        a[(i, i)] = 1.0;
        a[(i, n + i)] = 1.0;
        a[(i, 2 * n + i)] = -1.0;
        b[i] = x0[i];
    }
    if k > 0 {
        a.view_mut((n, 0), (k, n)).copy_from(&cs.a);
        b.rows_mut(n, k).copy_from(&cs.b);
    }
    if cs.budget {
        let row = n + k;
        for i in 0..n {
            a[(row, i)] = 1.0;
            if let Some((cm, cp)) = cost_budget {
                a[(row, n + i)] = cm[i];
                a[(row, 2 * n + i)] = cp[i];
            }
        }
        b[row] = 1.0;
    }

    let kc = cs.c.nrows();
    let mut c = DMatrix::zeros(kc, m);
    if kc > 0 {
        c.view_mut((0, 0), (kc, n)).copy_from(&cs.c);
    }
    let d = cs.d.clone();

    let mut lower = DVector::from_element(m, 0.0);
    let mut upper = DVector::from_element(m, f64::INFINITY);
    for i in 0..n {
        lower[i] = cs.lower.as_ref().map_or(f64::NEG_INFINITY, |l| l[i]);
        upper[i] = cs.upper.as_ref().map_or(f64::INFINITY, |u| u[i]);
    }
    Ok(QpProblem::new(q, r).with_eq(a, b).with_ineq(c, d).with_bounds(Some(lower), Some(upper)))
}

/// γ-problem with total turnover `Σ|x − x⁰| ≤ τ⁺`.
pub fn solve_turnover_constrained(spec: &MvSpec, x0: &DVector<f64>, max_turnover: f64) -> Result<Portfolio> {
    spec.validate()?;
    if !(max_turnover >= 0.0) {
        return Err(Error::invalid("turnover limit must be nonnegative"));
    }
    let n = spec.universe.len();
    let mut p = trade_problem(spec, x0, None)?;
    let kc = p.c.nrows();
    let mut c = DMatrix::zeros(kc + 1, 3 * n);
    let mut d = DVector::zeros(kc + 1);
    c.view_mut((0, 0), (kc, 3 * n)).copy_from(&p.c);
    d.rows_mut(0, kc).copy_from(&p.d);
    for j in n..3 * n {
        c[(kc, j)] = -1.0;
    }
    d[kc] = -max_turnover;
    p = p.with_ineq(c, d);
    let s = optimal(&p).map_err(|e| match e {
        Error::Infeasible(_) => Error::Infeasible(format!("no portfolio satisfies the constraints with turnover ≤ {max_turnover}")),
        e => e,
    })?;
    spec.portfolio(s.x.rows(0, n).into_owned())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostAwareSolution {
    pub portfolio: Portfolio,
    pub sells: DVector<f64>,
    pub buys: DVector<f64>,
    /// `C = c⁻ᵀx⁻ + c⁺ᵀx⁺`.
    pub cost: f64,
    pub gross_return: f64,
    pub net_return: f64,
}

/// γ-problem net of proportional transaction costs; the budget becomes `1ᵀx + C = 1`.
pub fn solve_with_transaction_costs(
    spec: &MvSpec,
    x0: &DVector<f64>,
    cost_sell: &DVector<f64>,
    cost_buy: &DVector<f64>,
) -> Result<CostAwareSolution> {
    spec.validate()?;
    let n = spec.universe.len();
    Error::check_dim(n, cost_sell.len())?;
    Error::check_dim(n, cost_buy.len())?;
    if cost_sell.iter().chain(cost_buy.iter()).any(|c| !(*c >= 0.0)) {
        return Err(Error::invalid("transaction costs must be nonnegative"));
    }
    let p = trade_problem(spec, x0, Some((cost_sell, cost_buy)))?;
    let s = optimal(&p)?;
    let x = s.x.rows(0, n).into_owned();
    let sells = s.x.rows(n, n).into_owned();
    let buys = s.x.rows(2 * n, n).into_owned();
    let cost = cost_sell.dot(&sells) + cost_buy.dot(&buys);
    let gross = spec.universe.mu().dot(&x);
    Ok(CostAwareSolution { portfolio: spec.portfolio(x)?, sells, buys, cost, gross_return: gross, net_return: gross - cost })
}

/// Views `Pμ = Q + ε`, `ε ~ N(0, Ω)`, with prior covariance `τΣ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlViews {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub omega: DMatrix<f64>,
    pub tau: f64,
}

impl BlViews {
    pub fn new(p: DMatrix<f64>, q: DVector<f64>, omega: DMatrix<f64>, tau: f64) -> Result<Self> {
        let k = p.nrows();
        Error::check_dim(k, q.len())?;
        Error::check_dim(k, omega.nrows())?;
        Error::check_dim(k, omega.ncols())?;
        if !(tau >= 0.0) {
            return Err(Error::invalid("τ must be nonnegative"));
        }
        if !crate::linalg::is_symmetric(&omega, 1e-12) {
            return Err(Error::invalid("Ω must be symmetric"));
        }
        if k > 0 {
            let lmin = min_eigenvalue(&omega);
            if lmin < -1e-12 * omega.amax().max(1.0) {
                return Err(Error::NotPsd { min_eigenvalue: lmin });
            }
        }
        Ok(Self { p, q, omega, tau })
    }

    /// Absolute views on every asset: `P = I`, `Q = μ̂`.
    pub fn trends(mu_hat: DVector<f64>, omega: DMatrix<f64>, tau: f64) -> Result<Self> {
        let n = mu_hat.len();
        Self::new(DMatrix::identity(n, n), mu_hat, omega, tau)
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        Self { tau, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlResult {
    /// Implied risk aversion φ.
    pub phi: f64,
    /// Implied returns μ̃.
    pub implied: DVector<f64>,
    /// Posterior returns μ̄.
    pub posterior: DVector<f64>,
    pub portfolio: Portfolio,
}

/// Posterior returns and the fully invested quadratic-utility portfolio at the implied φ.
pub fn black_litterman(
    universe: &AssetUniverse,
    b: &DVector<f64>,
    r: f64,
    sharpe: &SharpeSource,
    views: &BlViews,
) -> Result<BlResult> {
    let n = universe.len();
    Error::check_dim(n, b.len())?;
    Error::check_dim(n, views.p.ncols())?;
    let cov = universe.cov();
    let (phi, premia) = crate::analytics::implied_risk_premia(b, cov, sharpe)?;
    if !(phi > 0.0) {
        return Err(Error::invalid(format!("implied risk aversion {phi} is not positive")));
    }
    let implied = premia.add_scalar(r);
    let posterior = if views.tau == 0.0 || views.p.nrows() == 0 {
        implied.clone()
    } else {
        let tc = cov * views.tau;
        let m = &views.p * &tc * views.p.transpose() + &views.omega;
        let gain = inverse(&m).map_err(|_| Error::Singular("PτΣPᵀ + Ω is singular".into()))?;
        &implied + &tc * views.p.transpose() * gain * (&views.q - &views.p * &implied)
    };
    let p = QpProblem::new(cov.clone(), &posterior / phi).with_budget();
    let x = optimal(&p)?.x;
    Ok(BlResult { phi, implied, posterior, portfolio: Portfolio::for_universe(universe, x)? })
}

/// τ such that the BL portfolio has tracking error `target` against `b`.
pub fn bl_calibrate_tau(
    universe: &AssetUniverse,
    b: &DVector<f64>,
    r: f64,
    sharpe: &SharpeSource,
    views: &BlViews,
    te_target: f64,
) -> Result<f64> {
    if te_target <= 0.0 {
        return Ok(0.0);
    }
    let te = |tau: f64| -> Result<f64> {
        let res = black_litterman(universe, b, r, sharpe, &views.with_tau(tau))?;
        Ok(volatility(&(&res.portfolio.weights - b), universe.cov()))
    };
    let mut lo = 0.0;
    let mut hi = 1e-4;
    loop {
        let v = te(hi)?;
        if (v - te_target).abs() <= SIGMA_TOL {
            return Ok(hi);
        }
        if v > te_target {
            break;
        }
        if hi >= 1e8 {
            return Err(Error::Infeasible(format!(
                "tracking error target {te_target} above the bracket; τ = {hi} gives {v}"
            )));
        }
        lo = hi;
        hi *= 2.0;
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let v = te(mid)?;
        if (v - te_target).abs() <= SIGMA_TOL {
            break;
        }
        if v < te_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JmCovariance {
    /// Σ̃ = Σ − (v1ᵀ + 1vᵀ), `v` the multiplier-weighted constraint gradients.
    pub cov: DMatrix<f64>,
    /// `√Σ̃_ii`, NaN when the diagonal entry is negative.
    pub vols: DVector<f64>,
    pub corr: DMatrix<f64>,
    /// Σ̃ may be indefinite; this reports by how much.
    pub min_eigenvalue: f64,
    /// Constrained minimum-variance portfolio under Σ.
    pub constrained: DVector<f64>,
    pub shift: DVector<f64>,
}

/// Covariance under which the constrained minimum-variance portfolio is unconstrained-optimal.
pub fn jagannathan_ma_covariance(universe: &AssetUniverse, constraints: &ConstraintSet) -> Result<JmCovariance> {
    if !constraints.budget {
        return Err(Error::invalid("the implied covariance needs the budget constraint"));
    }
    let cov = universe.cov();
    let p = constraints.to_qp(cov.clone(), DVector::zeros(universe.len()))?;
    let s = optimal(&p)?;
    let k = constraints.a.nrows();
    let mut v = &s.lower - &s.upper;
    if constraints.c.nrows() > 0 {
        v += constraints.c.transpose() * &s.ineq;
    }
    if k > 0 {
        v += constraints.a.transpose() * s.eq.rows(0, k);
    }
    let n = universe.len();
    let ones = DVector::from_element(n, 1.0);
    let tilde = cov - &v * ones.transpose() - &ones * v.transpose();
    let vols = DVector::from_fn(n, |i, _| if tilde[(i, i)] >= 0.0 { tilde[(i, i)].sqrt() } else { f64::NAN });
    let corr = DMatrix::from_fn(n, n, |i, j| tilde[(i, j)] / (vols[i] * vols[j]));
    Ok(JmCovariance { min_eigenvalue: min_eigenvalue(&tilde), cov: tilde, vols, corr, constrained: s.x, shift: v })
}

/// Minimum-variance check that `x` is optimal under `cov` without constraints.
pub fn minimum_variance_residual(cov: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let g = cov * x;
    let m = g.mean();
    (g.add_scalar(-m)).amax() / quad(cov, x).abs().max(1e-300)
}

//! Equal risk contribution and risk budgeting.
//!
//! Three independent solvers are provided:
//!
//! - [`solve_erc_jacobi`]: the fixed point `x_i ∝ 1/β_i(x)`.
//! - [`solve_rb_least_squares`]: Levenberg-Marquardt on the pairwise budget
//!   residuals, for any supported risk measure.
//! - [`solve_erc_log_barrier`] and the Newton solver behind [`solve_rb`]: the convex
//!   programs `min σ(x) − λ Σ ln x_i` and `min ½xᵀΣx − Σ b_i ln x_i`.

use nalgebra::{DMatrix, DVector};

use crate::core::{volatility, RiskBudget, RiskDecomposition};
use crate::error::{Error, Result};
use crate::linalg::solve;
use crate::measures::{
    cornish_fisher_gradient, cornish_fisher_quantile, es_factor, normal, portfolio_tensor_moments,
    tensor_moment_gradients, CfOrder, MomentTensors,
};

/// Accepted gap `max |RC*_i − b_i|` for a returned solution.
pub const RB_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum RiskMeasure {
    Volatility,
    /// `ES = −μᵀx + φ(Φ⁻¹(α))/(1−α) σ(x)`.
    GaussianEs { alpha: f64, mu: DVector<f64> },
    /// Cornish-Fisher VaR computed from moment tensors.
    CornishFisherVar { alpha: f64, tensors: MomentTensors, order: CfOrder },
}

impl RiskMeasure {
    fn validate(&self, n: usize) -> Result<()> {
        match self {
            RiskMeasure::Volatility => Ok(()),
            RiskMeasure::GaussianEs { alpha, mu } => {
                check_alpha(*alpha)?;
                Error::check_dim(n, mu.len())
            }
            RiskMeasure::CornishFisherVar { alpha, tensors, .. } => {
                check_alpha(*alpha)?;
                Error::check_dim(n, tensors.dim())
            }
        }
    }

    /// Risk and its gradient at `x`.
    pub fn risk_gradient(&self, x: &DVector<f64>, cov: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
        match self {
            RiskMeasure::Volatility => {
                let s = positive_vol(x, cov)?;
                Ok((s, cov * x / s))
            }
            RiskMeasure::GaussianEs { alpha, mu } => {
                let s = positive_vol(x, cov)?;
                let k = es_factor(*alpha);
                Ok((-mu.dot(x) + k * s, -mu + cov * x * (k / s)))
            }
            RiskMeasure::CornishFisherVar { alpha, tensors, order } => {
                let m = portfolio_tensor_moments(x, tensors)?;
                let z0 = normal::quantile(*alpha);
                let z = cornish_fisher_quantile(z0, m.loss_skew, m.loss_exkurt, *order);
                let (dz_s, dz_k) = cornish_fisher_gradient(z0, m.loss_skew, *order);
                let (g1, g2, g3, g4) = tensor_moment_gradients(x, tensors);
                let sd = m.mu2.sqrt();
                let d_skew = -&g3 / m.mu2.powf(1.5) + &g2 * (1.5 * m.mu3 / m.mu2.powf(2.5));
                let d_kurt = &g4 / (m.mu2 * m.mu2) - &g2 * (2.0 * m.mu4 / m.mu2.powi(3));
                let grad = -g1 + (d_skew * dz_s + d_kurt * dz_k) * sd + &g2 * (z / (2.0 * sd));
                Ok((m.loss_mean + z * sd, grad))
            }
        }
    }

    pub fn decompose(&self, x: &DVector<f64>, cov: &DMatrix<f64>) -> Result<RiskDecomposition> {
        let (r, g) = self.risk_gradient(x, cov)?;
        Ok(RiskDecomposition::from_gradient(r, x.clone(), g))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.5..1.0).contains(&alpha) {
        return Err(Error::invalid(format!("confidence level {alpha} outside [0.5, 1)")));
    }
    Ok(())
}

fn positive_vol(x: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let s = volatility(x, cov);
    if !(s > 0.0) {
        return Err(Error::ZeroRisk);
    }
    Ok(s)
}

/// Norm used to pin the scale of a long-short solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LongShortScale {
    /// `Σ|x_i| = 1`.
    Gross,
    /// `RC_1 = c`.
    FirstContribution(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbProblem {
    pub cov: DMatrix<f64>,
    pub budgets: RiskBudget,
    pub measure: RiskMeasure,
    /// `±1` per asset; `None` means long-only.
    pub signs: Option<DVector<f64>>,
}

impl RbProblem {
    pub fn new(cov: DMatrix<f64>, budgets: RiskBudget) -> Result<Self> {
        let p = Self { cov, budgets, measure: RiskMeasure::Volatility, signs: None };
        p.validate()?;
        Ok(p)
    }

    pub fn with_measure(mut self, measure: RiskMeasure) -> Result<Self> {
        self.measure = measure;
        self.validate()?;
        Ok(self)
    }

    pub fn with_signs(mut self, signs: DVector<f64>) -> Result<Self> {
        self.signs = Some(signs);
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let n = self.cov.nrows();
        Error::check_dim(n, self.cov.ncols())?;
        Error::check_dim(n, self.budgets.len())?;
        self.measure.validate(n)?;
        if let Some(s) = &self.signs {
            Error::check_dim(n, s.len())?;
            if s.iter().any(|v| *v != 1.0 && *v != -1.0) {
                return Err(Error::invalid("signs must be +1 or -1"));
            }
        }
        Ok(())
    }

    fn n(&self) -> usize {
        self.cov.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbSolution {
    pub weights: DVector<f64>,
    pub decomposition: RiskDecomposition,
    pub iterations: usize,
    /// `max_i |RC*_i − b_i|`.
    pub residual: f64,
}

impl RbSolution {
    fn build(weights: DVector<f64>, measure: &RiskMeasure, cov: &DMatrix<f64>, b: &DVector<f64>, iterations: usize) -> Result<Self> {
        let decomposition = measure.decompose(&weights, cov)?;
        let residual = decomposition.budget_residual(b);
        Ok(Self { weights, decomposition, iterations, residual })
    }

    fn check(self) -> Result<Self> {
        if self.residual > RB_TOLERANCE || !self.residual.is_finite() {
            return Err(Error::NotConverged { iterations: self.iterations, last: self.weights.iter().cloned().collect() });
        }
        Ok(self)
    }
}

/// Jacobi power iteration `x_i ← β_i⁻¹ / Σβ_j⁻¹` from equal weights.
///
/// Damping `x ← ½(x + x_new)` switches on once successive updates point in opposite
/// directions.
pub fn solve_erc_jacobi(cov: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<RbSolution> {
    let n = cov.nrows();
    Error::check_dim(n, cov.ncols())?;
    if n == 0 {
        return Err(Error::invalid("empty universe"));
    }
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut prev_step: Option<DVector<f64>> = None;
    let mut damped = false;
    for it in 1..=max_iter {
        let sx = cov * &x;
        let var = sx.dot(&x);
        if !(var > 0.0) {
            return Err(Error::ZeroRisk);
        }
        if sx.iter().any(|v| *v <= 0.0) {
            return Err(Error::NotConverged { iterations: it, last: x.iter().cloned().collect() });
        }
        let inv_beta = sx.map(|v| var / v);
        let mut next = &inv_beta / inv_beta.sum();
        if damped {
            next = (&x + &next) * 0.5;
        }
        let step = &next - &x;
        if let Some(p) = &prev_step {
            if p.dot(&step) < 0.0 {
                damped = true;
            }
        }
        x = next;
        if step.amax() <= tol {
            let b = DVector::from_element(n, 1.0 / n as f64);
            return RbSolution::build(x, &RiskMeasure::Volatility, cov, &b, it);
        }
        prev_step = Some(step);
    }
    Err(Error::NotConverged { iterations: max_iter, last: x.iter().cloned().collect() })
}

/// ERC with the default solver: Jacobi, falling back to the convex log-barrier program.
pub fn solve_erc(cov: &DMatrix<f64>) -> Result<RbSolution> {
    match solve_erc_jacobi(cov, 1e-10, 2000).and_then(RbSolution::check) {
        Ok(s) => Ok(s),
        Err(Error::NotConverged { .. }) => solve_rb_volatility(cov, &RiskBudget::equal(cov.nrows())),
        Err(e) => Err(e),
    }
}

fn softmax_weights(theta: &DVector<f64>, free: &[usize], n: usize) -> DVector<f64> {
    let m = theta.max();
    let e = theta.map(|t| (t - m).exp());
    let s = e.sum();
    let mut x = DVector::zeros(n);
    for (k, &i) in free.iter().enumerate() {
        x[i] = e[k] / s;
    }
    x
}

/// Least-squares risk budgeting on the simplex, rescaled to `gross` exposure.
///
/// The residuals `RC_i/(b_i R(x)) − 1` over positive budgets are the pairwise terms
/// `RC_i/b_i − RC_j/b_j` in centred form. Zero-budget assets stay at zero.
pub fn solve_rb_least_squares(problem: &RbProblem, gross: f64) -> Result<RbSolution> {
    problem.validate()?;
    if problem.signs.is_some() {
        return solve_rb_long_short(problem, LongShortScale::Gross).map(|s| rescale(s, gross));
    }
    let b = problem.budgets.values();
    let sigma = DVector::from_fn(problem.n(), |i, _| problem.cov[(i, i)].max(1e-300).sqrt());
    let start = DVector::from_fn(problem.n(), |i, _| b[i].sqrt() / sigma[i]);
    least_squares_from(problem, &start).map(|s| rescale(s, gross))
}

fn rescale(mut s: RbSolution, gross: f64) -> RbSolution {
    let scale = gross / s.weights.abs().sum();
    s.weights *= scale;
    s.decomposition.weights *= scale;
    s.decomposition.contributions *= scale;
    s.decomposition.risk_total *= scale;
    s
}

fn least_squares_from(problem: &RbProblem, start: &DVector<f64>) -> Result<RbSolution> {
    let n = problem.n();
    let b = problem.budgets.values();
    let free: Vec<usize> = (0..n).filter(|&i| b[i] > 0.0).collect();
    let m = free.len();
    let cov = &problem.cov;
    let measure = &problem.measure;
    if m == 1 {
        let mut x = DVector::zeros(n);
        x[free[0]] = 1.0;
        return RbSolution::build(x, measure, cov, b, 0).and_then(RbSolution::check);
    }
    let residual = |theta: &DVector<f64>| -> Result<DVector<f64>> {
        let x = softmax_weights(theta, &free, n);
        let (r, g) = measure.risk_gradient(&x, cov)?;
        if !(r > 0.0) {
            return Err(Error::ZeroRisk);
        }
        Ok(DVector::from_fn(m, |k, _| {
            let i = free[k];
            x[i] * g[i] / (b[i] * r) - 1.0
        }))
    };
    let mut theta = DVector::from_fn(m, |k, _| start[free[k]].max(1e-300).ln());
    let mut r = residual(&theta)?;
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let h = 1e-6;
    let mut iterations = 0;
    for it in 1..=500 {
        iterations = it;
        if r.amax() <= 1e-13 {
            break;
        }
        let mut jac = DMatrix::zeros(m, m);
        for k in 0..m {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[k] += h;
            dn[k] -= h;
            let col = (residual(&up)? - residual(&dn)?) / (2.0 * h);
            jac.set_column(k, &col);
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..40 {
            let scale = jtj.diagonal().max().max(1e-12);
            let damped = &jtj + DMatrix::identity(m, m) * (lambda * scale);
            let step = match solve(&damped, &(-&jtr)) {
                Ok(s) => s,
                Err(_) => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let cand = &theta + &step;
            if let Ok(rc) = residual(&cand) {
                let c = rc.norm_squared();
                if c < cost {
                    theta = cand;
                    r = rc;
                    cost = c;
                    lambda = (lambda / 3.0).max(1e-15);
                    improved = true;
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    let x = softmax_weights(&theta, &free, n);
    RbSolution::build(x, measure, cov, b, iterations).and_then(RbSolution::check)
}

/// Minimizes `½yᵀΣy − Σ b_i ln y_i` over the active set `b_i > 0` or `free_i`.
///
/// Assets with `free_i` have zero budget and an unconstrained sign; all other
/// zero-budget assets are fixed at zero. Returns the unnormalized minimizer.
fn barrier_newton(cov: &DMatrix<f64>, b: &DVector<f64>, free: &[bool]) -> Result<(DVector<f64>, usize)> {
    let n = cov.nrows();
    let active: Vec<usize> = (0..n).filter(|&i| b[i] > 0.0 || free[i]).collect();
    let m = active.len();
    let s = DMatrix::from_fn(m, m, |i, j| cov[(active[i], active[j])]);
    let bb = DVector::from_fn(m, |i, _| b[active[i]]);
    let pos: Vec<bool> = (0..m).map(|i| bb[i] > 0.0).collect();
    let objective = |y: &DVector<f64>| -> f64 {
        let mut f = 0.5 * (&s * y).dot(y);
        for i in 0..m {
            if pos[i] {
                f -= bb[i] * y[i].ln();
            }
        }
        f
    };
    let mut y = DVector::from_fn(m, |i, _| if pos[i] { bb[i].sqrt() / s[(i, i)].max(1e-300).sqrt() } else { 0.0 });
    let q = (&s * &y).dot(&y);
    if !(q > 0.0) {
        return Err(Error::ZeroRisk);
    }
    y *= (bb.sum() / q).sqrt();
    let mut f = objective(&y);
    for it in 1..=200 {
        let sy = &s * &y;
        let grad = DVector::from_fn(m, |i, _| if pos[i] { sy[i] - bb[i] / y[i] } else { sy[i] });
        let hess = &s + DMatrix::from_diagonal(&DVector::from_fn(m, |i, _| if pos[i] { bb[i] / (y[i] * y[i]) } else { 0.0 }));
        let step = solve(&hess, &(-&grad)).map_err(|_| Error::Singular("barrier Hessian is singular".into()))?;
        let decrement = -grad.dot(&step);
        let done = |y: DVector<f64>| {
            let mut x = DVector::zeros(n);
            for (k, &i) in active.iter().enumerate() {
                x[i] = y[k];
            }
            Ok((x, it))
        };
        if decrement <= 1e-15 * (1.0 + f.abs()) {
            let full = &y + &step;
            if (0..m).all(|i| !pos[i] || full[i] > 0.0) {
                y = full;
            }
            return done(y);
        }
        let mut t: f64 = 1.0;
        for i in 0..m {
            if pos[i] && step[i] < 0.0 {
                t = t.min(-0.99 * y[i] / step[i]);
            }
        }
        loop {
            let cand = &y + &step * t;
            let fc = objective(&cand);
            if fc <= f - 1e-4 * t * decrement {
                y = cand;
                f = fc;
                break;
            }
            t *= 0.5;
            // No representable decrease left: y is optimal to rounding.
            if t < 1e-14 {
                return done(y);
            }
        }
    }
    Err(Error::NotConverged { iterations: 200, last: y.iter().cloned().collect() })
}

/// Volatility risk budgeting through the convex log-barrier program, normalized to `1ᵀx = 1`.
pub fn solve_rb_volatility(cov: &DMatrix<f64>, budgets: &RiskBudget) -> Result<RbSolution> {
    let n = cov.nrows();
    Error::check_dim(n, budgets.len())?;
    let (x, it) = barrier_newton(cov, budgets.values(), &vec![false; n])?;
    let x = &x / x.sum();
    RbSolution::build(x, &RiskMeasure::Volatility, cov, budgets.values(), it).and_then(RbSolution::check)
}

/// Default risk-budgeting entry point for every measure and sign pattern.
pub fn solve_rb(problem: &RbProblem) -> Result<RbSolution> {
    problem.validate()?;
    if problem.signs.is_some() {
        return solve_rb_long_short(problem, LongShortScale::Gross);
    }
    let vol = solve_rb_volatility(&problem.cov, &problem.budgets)?;
    match problem.measure {
        RiskMeasure::Volatility => Ok(vol),
        _ => least_squares_from(problem, &vol.weights),
    }
}

/// Risk budgeting under Gaussian expected shortfall.
pub fn solve_rb_es(cov: &DMatrix<f64>, mu: &DVector<f64>, budgets: &RiskBudget, alpha: f64) -> Result<RbSolution> {
    let p = RbProblem::new(cov.clone(), budgets.clone())?.with_measure(RiskMeasure::GaussianEs { alpha, mu: mu.clone() })?;
    solve_rb(&p)
}

/// Long-short risk budgeting through `y = Sx`, `S = diag(signs)`.
pub fn solve_rb_long_short(problem: &RbProblem, scale: LongShortScale) -> Result<RbSolution> {
    problem.validate()?;
    let n = problem.n();
    let signs = problem.signs.clone().unwrap_or_else(|| DVector::from_element(n, 1.0));
    let s = DMatrix::from_diagonal(&signs);
    let cov_y = &s * &problem.cov * &s;
    let measure_y = match &problem.measure {
        RiskMeasure::Volatility => RiskMeasure::Volatility,
        RiskMeasure::GaussianEs { alpha, mu } => RiskMeasure::GaussianEs { alpha: *alpha, mu: mu.component_mul(&signs) },
        RiskMeasure::CornishFisherVar { .. } => {
            return Err(Error::invalid("sign patterns are supported for volatility and Gaussian ES only"))
        }
    };
    let inner = RbProblem { cov: cov_y, budgets: problem.budgets.clone(), measure: measure_y, signs: None };
    let y = solve_rb(&inner)?;
    let mut x = y.weights.component_mul(&signs);
    match scale {
        LongShortScale::Gross => x /= x.abs().sum(),
        LongShortScale::FirstContribution(c) => {
            let d = problem.measure.decompose(&x, &problem.cov)?;
            if d.contributions[0].abs() < 1e-300 {
                return Err(Error::invalid("first risk contribution is zero; cannot pin it"));
            }
            x *= c / d.contributions[0];
        }
    }
    RbSolution::build(x, &problem.measure, &problem.cov, problem.budgets.values(), y.iterations).and_then(RbSolution::check)
}

/// `argmin σ(x) − λ_c Σ ln x_i`, returned unnormalized with `c = Σ ln x_i`.
pub fn solve_erc_log_barrier(cov: &DMatrix<f64>, lambda_c: f64) -> Result<(DVector<f64>, f64)> {
    let n = cov.nrows();
    Error::check_dim(n, cov.ncols())?;
    if !(lambda_c > 0.0) {
        return Err(Error::invalid("λ_c must be positive; λ_c = 0 gives the zero portfolio"));
    }
    let f = |x: &DVector<f64>| volatility(x, cov) - lambda_c * x.map(f64::ln).sum();
    let mut x = DVector::from_fn(n, |i, _| 1.0 / cov[(i, i)].max(1e-300).sqrt());
    x *= n as f64 * lambda_c / positive_vol(&x, cov)?;
    let mut fx = f(&x);
    for _ in 0..200 {
        let s = positive_vol(&x, cov)?;
        let g = cov * &x / s;
        let grad = &g - x.map(|v| lambda_c / v);
        let hess = (cov - &g * g.transpose()) / s + DMatrix::from_diagonal(&x.map(|v| lambda_c / (v * v)));
        let step = solve(&hess, &(-&grad))?;
        let decrement = -grad.dot(&step);
        if decrement <= 1e-20 * (1.0 + fx.abs()) {
            let full = &x + &step;
            if full.iter().all(|v| *v > 0.0) {
                x = full;
            }
            break;
        }
        let mut t: f64 = 1.0;
        for i in 0..n {
            if step[i] < 0.0 {
                t = t.min(-0.99 * x[i] / step[i]);
            }
        }
        loop {
            let cand = &x + &step * t;
            let fc = f(&cand);
            if fc <= fx - 1e-4 * t * decrement || t < 1e-14 {
                x = cand;
                fx = fc;
                break;
            }
            t *= 0.5;
        }
    }
    let c = x.map(f64::ln).sum();
    Ok((x, c))
}

/// Minimum-volatility portfolio with `Σ ln x_i ≥ c`: the normalized ERC scaled by `exp((c − c_erc)/n)`.
pub fn erc_for_log_budget(cov: &DMatrix<f64>, c: f64) -> Result<DVector<f64>> {
    let (x, _) = solve_erc_log_barrier(cov, 1.0)?;
    let x = &x / x.sum();
    let c_erc = x.map(f64::ln).sum();
    Ok(x * ((c - c_erc) / cov.nrows() as f64).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroBudgetSolution {
    /// Zero-budget assets held with a positive weight.
    pub included: Vec<usize>,
    pub solution: RbSolution,
}

/// Enumerates the RB portfolios generated by the `2ᵏ` choices of zero-budget assets
/// kept in the portfolio with zero marginal risk.
pub fn enumerate_zero_budget_solutions(cov: &DMatrix<f64>, budgets: &RiskBudget, max_count: usize) -> Result<Vec<ZeroBudgetSolution>> {
    let n = cov.nrows();
    Error::check_dim(n, budgets.len())?;
    let b = budgets.values();
    let zeros: Vec<usize> = (0..n).filter(|&i| b[i] == 0.0).collect();
    if zeros.len() > 20 {
        return Err(Error::invalid(format!("{} zero budgets is too many to enumerate", zeros.len())));
    }
    let mut out: Vec<ZeroBudgetSolution> = Vec::new();
    for mask in 0u32..(1u32 << zeros.len()) {
        if out.len() >= max_count {
            break;
        }
        let mut free = vec![false; n];
        let included: Vec<usize> = zeros.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &i)| i).collect();
        for &i in &included {
            free[i] = true;
        }
        let Ok((x, it)) = barrier_newton(cov, b, &free) else { continue };
        if included.iter().any(|&i| !(x[i] > 0.0)) {
            continue;
        }
        let x = &x / x.sum();
        let Ok(sol) = RbSolution::build(x, &RiskMeasure::Volatility, cov, b, it) else { continue };
        if sol.residual > RB_TOLERANCE {
            continue;
        }
        if out.iter().any(|o| (&o.solution.weights - &sol.weights).amax() <= 1e-5) {
            continue;
        }
        out.push(ZeroBudgetSolution { included, solution: sol });
    }
    Ok(out)
}

/// Parameter blocks of the closed-form portfolios.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedForm {
    /// `x_i ∝ √b_i/σ_i`.
    RbZeroCorrelation { sigma: DVector<f64>, budgets: DVector<f64> },
    /// `x_i ∝ 1/σ_i`.
    InverseVol { sigma: DVector<f64> },
    /// `x_i ∝ ((n−1)ρ+1)σ_i⁻² − ρσ_i⁻¹Σσ_j⁻¹`.
    MvConstantCorrelation { sigma: DVector<f64>, rho: f64 },
    /// `Σ = σ_m²ββᵀ + diag(σ̃²)`; `x_i ∝ (1 − β_i/β*)/σ̃_i²`.
    MvOneFactor { beta: DVector<f64>, sigma_m: f64, specific: DVector<f64> },
    /// `x_i ∝ (1 − ρ_i/ρ*)/(σ_i(1 − ρ_i²))` with `ρ_i` the correlation with the factor.
    MdpOneFactor { rho_m: DVector<f64>, sigma: DVector<f64> },
    /// `x_i ∝ (μ_i − r)/σ_i²`.
    TangencyZeroCorrelation { mu: DVector<f64>, sigma: DVector<f64>, r: f64 },
}

fn normalized(x: DVector<f64>) -> Result<DVector<f64>> {
    let s = x.sum();
    if !(s.abs() > 1e-300) || !s.is_finite() {
        return Err(Error::Singular("closed form weights sum to zero".into()));
    }
    Ok(x / s)
}

fn positive(v: &DVector<f64>, what: &str) -> Result<()> {
    if v.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::invalid(format!("{what} must be positive")));
    }
    Ok(())
}

pub fn closed_form(kind: &ClosedForm) -> Result<DVector<f64>> {
    match kind {
        ClosedForm::RbZeroCorrelation { sigma, budgets } => {
            positive(sigma, "volatilities")?;
            Error::check_dim(sigma.len(), budgets.len())?;
            normalized(budgets.map(f64::sqrt).component_div(sigma))
        }
        ClosedForm::InverseVol { sigma } => {
            positive(sigma, "volatilities")?;
            normalized(sigma.map(|s| 1.0 / s))
        }
        ClosedForm::MvConstantCorrelation { sigma, rho } => {
            positive(sigma, "volatilities")?;
            let n = sigma.len() as f64;
            if n > 1.0 && (*rho < -1.0 / (n - 1.0) - 1e-15 || *rho > 1.0) {
                return Err(Error::invalid(format!("correlation {rho} outside [−1/(n−1), 1]")));
            }
            let inv = sigma.map(|s| 1.0 / s);
            let total = inv.sum();
            normalized(inv.map(|v| ((n - 1.0) * rho + 1.0) * v * v - rho * v * total))
        }
        ClosedForm::MvOneFactor { beta, sigma_m, specific } => {
            positive(specific, "specific volatilities")?;
            Error::check_dim(beta.len(), specific.len())?;
            let s2 = specific.map(|s| s * s);
            let b_star = critical_beta(beta, *sigma_m, specific)?;
            normalized(DVector::from_fn(beta.len(), |i, _| (1.0 - beta[i] / b_star) / s2[i]))
        }
        ClosedForm::MdpOneFactor { rho_m, sigma } => {
            positive(sigma, "volatilities")?;
            Error::check_dim(rho_m.len(), sigma.len())?;
            let r_star = critical_correlation(&CriticalCorrelation::Mdp { rho_m: rho_m.clone() })?;
            normalized(DVector::from_fn(sigma.len(), |i, _| {
                (1.0 - rho_m[i] / r_star) / (sigma[i] * (1.0 - rho_m[i] * rho_m[i]))
            }))
        }
        ClosedForm::TangencyZeroCorrelation { mu, sigma, r } => {
            positive(sigma, "volatilities")?;
            Error::check_dim(mu.len(), sigma.len())?;
            normalized(DVector::from_fn(mu.len(), |i, _| (mu[i] - r) / (sigma[i] * sigma[i])))
        }
    }
}

/// `β* = (1 + σ_m² Σβ_j²/σ̃_j²)/(σ_m² Σβ_j/σ̃_j²)`.
pub fn critical_beta(beta: &DVector<f64>, sigma_m: f64, specific: &DVector<f64>) -> Result<f64> {
    Error::check_dim(beta.len(), specific.len())?;
    let sm2 = sigma_m * sigma_m;
    let mut num = 1.0;
    let mut den = 0.0;
    for i in 0..beta.len() {
        let s2 = specific[i] * specific[i];
        num += sm2 * beta[i] * beta[i] / s2;
        den += sm2 * beta[i] / s2;
    }
    if den.abs() < 1e-300 {
        return Err(Error::Singular("β* denominator is zero".into()));
    }
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CriticalCorrelation {
    /// Constant-correlation minimum variance: all weights positive iff `ρ ≤ ρ*`.
    Mv { sigma: DVector<f64> },
    /// One-factor MDP: `x_i > 0` iff `ρ_i < ρ*`.
    Mdp { rho_m: DVector<f64> },
}

pub fn critical_correlation(kind: &CriticalCorrelation) -> Result<f64> {
    match kind {
        CriticalCorrelation::Mv { sigma } => {
            positive(sigma, "volatilities")?;
            let n = sigma.len() as f64;
            let inv_max = 1.0 / sigma.max();
            let total: f64 = sigma.iter().map(|s| 1.0 / s).sum();
            let den = total - (n - 1.0) * inv_max;
            if !(den > 0.0) {
                return Err(Error::Singular("critical correlation denominator is not positive".into()));
            }
            Ok(inv_max / den)
        }
        CriticalCorrelation::Mdp { rho_m } => {
            if rho_m.iter().any(|r| r.abs() >= 1.0) {
                return Err(Error::invalid("factor correlations must lie in (−1, 1)"));
            }
            let num = 1.0 + rho_m.iter().map(|r| r * r / (1.0 - r * r)).sum::<f64>();
            let den: f64 = rho_m.iter().map(|r| r / (1.0 - r * r)).sum();
            if den.abs() < 1e-300 {
                return Err(Error::Singular("ρ* denominator is zero".into()));
            }
            Ok(num / den)
        }
    }
}

//! Risk measures and loss-distribution machinery.
//!
//! Losses follow the convention `L = −R`: a positive value is a loss.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::psd_factor;

pub mod normal {
    //! Standard normal density, distribution and quantile functions.
    //!
    //! The quantile starts from Acklam's rational approximation (relative error
    //! about 1.15e−9) and applies one Halley step against the `erfc`-based CDF,
    //! which brings the error close to machine precision.

    use std::f64::consts::{PI, SQRT_2};

    pub fn pdf(x: f64) -> f64 {
        (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
    }

    pub fn cdf(x: f64) -> f64 {
        0.5 * libm::erfc(-x / SQRT_2)
    }

    pub fn quantile(p: f64) -> f64 {
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        const A: [f64; 6] = [
            -3.969683028665376e1,
            2.209460984245205e2,
            -2.759285104469687e2,
            1.383577518672690e2,
            -3.066479806614716e1,
            2.506628277459239,
        ];
        const B: [f64; 5] = [
            -5.447609879822406e1,
            1.615858368580409e2,
            -1.556989798598866e2,
            6.680131188771972e1,
            -1.328068155288572e1,
        ];
        const C: [f64; 6] = [
            -7.784894002430293e-3,
            -3.223964580411365e-1,
            -2.400758277161838,
            -2.549732539343734,
            4.374664141464968,
            2.938163982698783,
        ];
        const D: [f64; 4] = [
            7.784695709041462e-3,
            3.224671290700398e-1,
            2.445134137142996,
            3.754408661907416,
        ];
        let lo = 0.02425;
        let x = if p < lo {
            let q = (-2.0 * p.ln()).sqrt();
            (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
                / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
        } else if p <= 1.0 - lo {
            let q = p - 0.5;
            let r = q * q;
            (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
                / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
        } else {
            let q = (-2.0 * (1.0 - p).ln()).sqrt();
            -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
                / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
        };
        // Halley refinement; use the upper tail for p > ½ to avoid cancellation.
        let e = if p > 0.5 { (1.0 - p) - cdf(-x) } else { cdf(x) - p };
        let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
        x - u / (1.0 + 0.5 * x * u)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.5..1.0).contains(&alpha) {
        return Err(Error::invalid(format!("confidence level {alpha} outside [0.5, 1)")));
    }
    Ok(())
}

/// Gaussian loss `L ~ N(μ(L), σ(L)²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianLoss {
    pub mean: f64,
    pub sd: f64,
}

impl GaussianLoss {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        if !(sd >= 0.0) {
            return Err(Error::invalid("loss standard deviation must be nonnegative"));
        }
        Ok(Self { mean, sd })
    }

    /// Loss of a portfolio with Gaussian returns: `μ(L) = −xᵀμ`, `σ(L) = √(xᵀΣx)`.
    pub fn of_portfolio(x: &DVector<f64>, mu: &DVector<f64>, cov: &DMatrix<f64>) -> Self {
        Self { mean: -mu.dot(x), sd: crate::core::volatility(x, cov) }
    }
}

pub fn var_gaussian(loss: GaussianLoss, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(loss.mean + normal::quantile(alpha) * loss.sd)
}

pub fn es_gaussian(loss: GaussianLoss, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(loss.mean + loss.sd * es_factor(alpha))
}

/// `φ(Φ⁻¹(α)) / (1 − α)`.
pub fn es_factor(alpha: f64) -> f64 {
    normal::pdf(normal::quantile(alpha)) / (1.0 - alpha)
}

/// Pareto loss with scale `x₋` and tail index `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoLoss {
    pub scale: f64,
    pub theta: f64,
}

impl ParetoLoss {
    pub fn new(scale: f64, theta: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::invalid("Pareto scale must be positive"));
        }
        if !(theta > 1.0) {
            return Err(Error::invalid("Pareto tail index must exceed 1 for ES to exist"));
        }
        Ok(Self { scale, theta })
    }
}

pub fn var_es_pareto(loss: ParetoLoss, alpha: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid(format!("confidence level {alpha} outside [0, 1)")));
    }
    if !(loss.theta > 1.0) {
        return Err(Error::invalid("ES undefined for tail index ≤ 1"));
    }
    let var = loss.scale * (1.0 - alpha).powf(-1.0 / loss.theta);
    Ok((var, loss.theta / (loss.theta - 1.0) * var))
}

/// Finite loss distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLoss {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteLoss {
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        Error::check_dim(support.len(), probs.len())?;
        if support.is_empty() {
            return Err(Error::invalid("empty distribution"));
        }
        if support.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("support must be strictly increasing"));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::invalid("probabilities must be nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("probabilities sum to {total}")));
        }
        Ok(Self { support, probs })
    }

    /// Builds a distribution from unsorted atoms, merging equal values.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        let mut v: Vec<(f64, f64)> = atoms.to_vec();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::new();
        let mut probs: Vec<f64> = Vec::new();
        for (l, p) in v {
            if support.last() == Some(&l) {
                *probs.last_mut().unwrap() += p;
            } else {
                support.push(l);
                probs.push(p);
            }
        }
        Self::new(support, probs)
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `inf{ℓ : P(L ≤ ℓ) ≥ α}`.
    pub fn quantile(&self, alpha: f64) -> f64 {
        let mut cum = 0.0;
        for (l, p) in self.support.iter().zip(&self.probs) {
            cum += p;
            if cum >= alpha - 1e-12 {
                return *l;
            }
        }
        *self.support.last().unwrap()
    }
}

/// VaR is the lower `α`-quantile; ES is `E[L | L ≥ VaR]`.
pub fn var_es_discrete(loss: &DiscreteLoss, alpha: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("confidence level {alpha} outside [0, 1]")));
    }
    let var = loss.quantile(alpha);
    // Weights relative to the smallest tail probability keep common tables exact.
    let tail: Vec<(f64, f64)> = loss
        .support
        .iter()
        .zip(&loss.probs)
        .filter(|(l, p)| **l >= var && **p > 0.0)
        .map(|(l, p)| (*l, *p))
        .collect();
    let pmin = tail.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    let (mut num, mut den) = (0.0, 0.0);
    for (l, p) in tail {
        let w = p / pmin;
        num += l * w;
        den += w;
    }
    Ok((var, num / den))
}

/// VaR is the `⌈αT⌉`-th smallest loss; ES is the mean of losses at or above it.
pub fn var_es_empirical(samples: &[f64], alpha: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid(format!("confidence level {alpha} outside [0, 1)")));
    }
    let t = samples.len();
    if (t as f64) < 1.0 / (1.0 - alpha) - 1e-9 {
        return Err(Error::invalid(format!(
            "{t} samples are too few for α = {alpha} (need at least {})",
            (1.0 / (1.0 - alpha)).ceil()
        )));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("loss samples must be finite"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = empirical_rank(t, alpha);
    let var = sorted[rank - 1];
    let tail: Vec<f64> = sorted.iter().cloned().filter(|l| *l >= var).collect();
    Ok((var, tail.iter().sum::<f64>() / tail.len() as f64))
}

fn empirical_rank(t: usize, alpha: f64) -> usize {
    ((alpha * t as f64) - 1e-9).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CfOrder {
    Three,
    #[default]
    Four,
}

/// Cornish-Fisher adjusted quantile.
///
/// `z + (z²−1)γ₁/6 + (z³−3z)γ₂/24 − (2z³−5z)γ₁²/36`; order 3 drops the last term.
pub fn cornish_fisher_quantile(z: f64, skew: f64, exkurt: f64, order: CfOrder) -> f64 {
    let mut q = z + (z * z - 1.0) * skew / 6.0 + (z.powi(3) - 3.0 * z) * exkurt / 24.0;
    if order == CfOrder::Four {
        q -= (2.0 * z.powi(3) - 5.0 * z) * skew * skew / 36.0;
    }
    q
}

/// Partial derivatives `(∂z/∂γ₁, ∂z/∂γ₂)` of the Cornish-Fisher quantile.
pub fn cornish_fisher_gradient(z: f64, skew: f64, order: CfOrder) -> (f64, f64) {
    let mut ds = (z * z - 1.0) / 6.0;
    if order == CfOrder::Four {
        ds -= 2.0 * (2.0 * z.powi(3) - 5.0 * z) * skew / 36.0;
    }
    (ds, (z.powi(3) - 3.0 * z) / 24.0)
}

/// Centered moment tensors `M₁` (n), `M₂` (n×n), `M₃` (n×n²), `M₄` (n×n³).
///
/// Column `j·n + k` of `M₃` holds `E[c_i c_j c_k]`, matching `x ⊗ x`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTensors {
    pub m1: DVector<f64>,
    pub m2: DMatrix<f64>,
    pub m3: DMatrix<f64>,
    pub m4: DMatrix<f64>,
}

impl MomentTensors {
    pub fn new(m1: DVector<f64>, m2: DMatrix<f64>, m3: DMatrix<f64>, m4: DMatrix<f64>) -> Result<Self> {
        let n = m1.len();
        Error::check_dim(n, m2.nrows())?;
        Error::check_dim(n, m2.ncols())?;
        Error::check_dim(n, m3.nrows())?;
        Error::check_dim(n * n, m3.ncols())?;
        Error::check_dim(n, m4.nrows())?;
        Error::check_dim(n * n * n, m4.ncols())?;
        if !crate::linalg::is_symmetric(&m2, 1e-10) {
            return Err(Error::invalid("M2 must be symmetric"));
        }
        Ok(Self { m1, m2, m3, m4 })
    }

    /// Sample tensors from a `T × n` return panel (denominator `T`).
    pub fn from_returns(returns: &DMatrix<f64>) -> Result<Self> {
        let (t, n) = returns.shape();
        if t == 0 {
            return Err(Error::invalid("empty return panel"));
        }
        let m1 = DVector::from_fn(n, |i, _| returns.column(i).mean());
        let c = DMatrix::from_fn(t, n, |s, i| returns[(s, i)] - m1[i]);
        let tf = t as f64;
        let mut m2 = DMatrix::zeros(n, n);
        let mut m3 = DMatrix::zeros(n, n * n);
        let mut m4 = DMatrix::zeros(n, n * n * n);
        for s in 0..t {
            let r = c.row(s);
            for i in 0..n {
                for j in 0..n {
                    let ij = r[i] * r[j];
                    m2[(i, j)] += ij / tf;
                    for k in 0..n {
                        let ijk = ij * r[k];
                        m3[(i, j * n + k)] += ijk / tf;
                        for l in 0..n {
                            m4[(i, (j * n + k) * n + l)] += ijk * r[l] / tf;
                        }
                    }
                }
            }
        }
        Self::new(m1, m2, m3, m4)
    }

    pub fn dim(&self) -> usize {
        self.m1.len()
    }
}

fn kron(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(a.len() * b.len(), |idx, _| a[idx / b.len()] * b[idx % b.len()])
}

/// Portfolio P&L moments and the implied loss statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorMoments {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu4: f64,
    pub loss_mean: f64,
    pub loss_sd: f64,
    pub loss_skew: f64,
    pub loss_exkurt: f64,
}

/// `μ_r(Π) = x M_r (⊗ʳ x)`.
pub fn portfolio_tensor_moments(x: &DVector<f64>, t: &MomentTensors) -> Result<TensorMoments> {
    Error::check_dim(t.dim(), x.len())?;
    let xx = kron(x, x);
    let xxx = kron(&xx, x);
    let mu1 = t.m1.dot(x);
    let mu2 = (&t.m2 * x).dot(x);
    let mu3 = (&t.m3 * &xx).dot(x);
    let mu4 = (&t.m4 * &xxx).dot(x);
    if !(mu2 > 0.0) {
        return Err(Error::ZeroRisk);
    }
    Ok(TensorMoments {
        mu1,
        mu2,
        mu3,
        mu4,
        loss_mean: -mu1,
        loss_sd: mu2.sqrt(),
        loss_skew: -mu3 / mu2.powf(1.5),
        loss_exkurt: mu4 / (mu2 * mu2) - 3.0,
    })
}

/// Gradients `(∇μ₁, ∇μ₂, ∇μ₃, ∇μ₄)` for symmetric tensors.
pub(crate) fn tensor_moment_gradients(
    x: &DVector<f64>,
    t: &MomentTensors,
) -> (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>) {
    let xx = kron(x, x);
    let xxx = kron(&xx, x);
    (t.m1.clone(), &t.m2 * x * 2.0, &t.m3 * xx * 3.0, &t.m4 * xxx * 4.0)
}

/// Cornish-Fisher VaR of a portfolio from its moment tensors.
pub fn var_cornish_fisher(x: &DVector<f64>, t: &MomentTensors, alpha: f64, order: CfOrder) -> Result<f64> {
    check_alpha(alpha)?;
    let m = portfolio_tensor_moments(x, t)?;
    let z = cornish_fisher_quantile(normal::quantile(alpha), m.loss_skew, m.loss_exkurt, order);
    Ok(m.loss_mean + z * m.loss_sd)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadFormMoments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// Moments of `Y = XᵀAX` with `X ~ N(0, Σ)`; `kurtosis` is the excess kurtosis.
pub fn quadratic_form_moments(a: &DMatrix<f64>, cov: &DMatrix<f64>) -> Result<QuadFormMoments> {
    Error::check_dim(cov.nrows(), a.nrows())?;
    if !crate::linalg::is_symmetric(a, 1e-12) {
        return Err(Error::invalid("A must be symmetric"));
    }
    let m = a * cov;
    let m2 = &m * &m;
    let t1 = m.trace();
    let t2 = m2.trace();
    let t3 = (&m2 * &m).trace();
    let t4 = (&m2 * &m2).trace();
    if t2 == 0.0 {
        return Err(Error::invalid("tr((AΣ)²) = 0: skewness and kurtosis undefined"));
    }
    Ok(QuadFormMoments {
        mean: t1,
        variance: 2.0 * t2,
        skewness: 2.0 * 2f64.sqrt() * t3 / t2.powf(1.5),
        kurtosis: 12.0 * t4 / (t2 * t2),
    })
}

/// Book of options on `n` underlyings.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionBook {
    pub positions: DVector<f64>,
    pub prices: DVector<f64>,
    pub deltas: DVector<f64>,
    pub gammas: DMatrix<f64>,
    pub cov: DMatrix<f64>,
}

impl OptionBook {
    pub fn new(
        positions: DVector<f64>,
        prices: DVector<f64>,
        deltas: DVector<f64>,
        gammas: DMatrix<f64>,
        cov: DMatrix<f64>,
    ) -> Result<Self> {
        let n = positions.len();
        for len in [prices.len(), deltas.len(), gammas.nrows(), gammas.ncols(), cov.nrows(), cov.ncols()] {
            Error::check_dim(n, len)?;
        }
        if !crate::linalg::is_symmetric(&gammas, 1e-12) {
            return Err(Error::invalid("gamma matrix must be symmetric"));
        }
        Ok(Self { positions, prices, deltas, gammas, cov })
    }

    /// Dollar delta exposures `Δ̃_i = x_i Δ_i S_i`.
    pub fn delta_exposures(&self) -> DVector<f64> {
        self.positions.component_mul(&self.deltas).component_mul(&self.prices)
    }

    /// Dollar gamma exposures `Γ̃_ij = x_i x_j Γ_ij S_i S_j`.
    pub fn gamma_exposures(&self) -> DMatrix<f64> {
        let w = self.positions.component_mul(&self.prices);
        DMatrix::from_fn(w.len(), w.len(), |i, j| w[i] * w[j] * self.gammas[(i, j)])
    }

    /// Mean, standard deviation, skewness and excess kurtosis of the delta-gamma loss.
    pub fn loss_moments(&self) -> (f64, f64, f64, f64) {
        let d = self.delta_exposures();
        let g = self.gamma_exposures();
        let s = &self.cov;
        let gs = &g * s;
        let gs2 = &gs * &gs;
        let t1 = gs.trace();
        let t2 = gs2.trace();
        let t3 = (&gs2 * &gs).trace();
        let t4 = (&gs2 * &gs2).trace();
        let sd_ = s * &d;
        let dsd = d.dot(&sd_);
        let dsgsd = sd_.dot(&(&g * &sd_));
        let dsgsgsd = sd_.dot(&(&g * s * &g * &sd_));
        let var = dsd + 0.5 * t2;
        let mean = -0.5 * t1;
        let skew = if var > 0.0 {
            -(6.0 * 2f64.sqrt() * dsgsd + 2.0 * 2f64.sqrt() * t3) / (2.0 * dsd + t2).powf(1.5)
        } else {
            0.0
        };
        let exkurt = if var > 0.0 { (3.0 * t4 + 12.0 * dsgsgsd) / (var * var) } else { 0.0 };
        (mean, var.sqrt(), skew, exkurt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionVarMethod {
    Delta,
    DeltaGamma,
    CornishFisher(CfOrder),
}

pub fn delta_gamma_var(book: &OptionBook, alpha: f64, method: OptionVarMethod) -> Result<f64> {
    check_alpha(alpha)?;
    let z = normal::quantile(alpha);
    match method {
        OptionVarMethod::Delta => {
            let d = book.delta_exposures();
            Ok(z * crate::core::volatility(&d, &book.cov))
        }
        OptionVarMethod::DeltaGamma => {
            let (mean, sd, _, _) = book.loss_moments();
            Ok(mean + z * sd)
        }
        OptionVarMethod::CornishFisher(order) => {
            let (mean, sd, skew, exkurt) = book.loss_moments();
            Ok(mean + cornish_fisher_quantile(z, skew, exkurt, order) * sd)
        }
    }
}

/// Draws `T` Gaussian return vectors as a `T × n` matrix.
///
/// Samples are produced in fixed-size chunks, each with its own ChaCha stream
/// derived from `seed`, so results do not depend on how chunks are scheduled.
pub fn simulate_gaussian_returns(mu: &DVector<f64>, cov: &DMatrix<f64>, t: usize, seed: u64) -> DMatrix<f64> {
    const CHUNK: usize = 65_536;
    let n = mu.len();
    let l = psd_factor(cov);
    let mut out = DMatrix::zeros(t, n);
    let mut z = vec![0.0; n];
    for (c, start) in (0..t).step_by(CHUNK).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        for s in start..(start + CHUNK).min(t) {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            for i in 0..n {
                let mut acc = mu[i];
                for (k, zk) in z.iter().enumerate() {
                    acc += l[(i, k)] * zk;
                }
                out[(s, i)] = acc;
            }
        }
    }
    out
}

/// Monte-Carlo ES and its per-asset contributions with batch-means standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct McEsContributions {
    pub var: f64,
    pub es: f64,
    pub contributions: DVector<f64>,
    pub std_errors: DVector<f64>,
}

fn tail_contributions(x: &DVector<f64>, returns: &DMatrix<f64>, rows: std::ops::Range<usize>, alpha: f64) -> (f64, DVector<f64>) {
    let n = x.len();
    let losses: Vec<f64> = rows
        .clone()
        .map(|s| -(0..n).map(|i| x[i] * returns[(s, i)]).sum::<f64>())
        .collect();
    let mut sorted = losses.clone();
    sorted.sort_by(f64::total_cmp);
    let var = sorted[empirical_rank(losses.len(), alpha) - 1];
    let mut rc = DVector::zeros(n);
    let mut count = 0usize;
    for (k, s) in rows.enumerate() {
        if losses[k] >= var {
            count += 1;
            for i in 0..n {
                rc[i] -= x[i] * returns[(s, i)];
            }
        }
    }
    (var, rc / count as f64)
}

/// `RC_i = E[−x_i R_i | L ≥ VaR_α]` estimated from simulated returns.
pub fn mc_es_contributions(x: &DVector<f64>, returns: &DMatrix<f64>, alpha: f64, batches: usize) -> Result<McEsContributions> {
    check_alpha(alpha)?;
    let (t, n) = returns.shape();
    Error::check_dim(n, x.len())?;
    let batches = batches.max(2);
    let per = t / batches;
    if (per as f64) < 1.0 / (1.0 - alpha) {
        return Err(Error::invalid("too few samples per batch for the confidence level"));
    }
    let (var, contributions) = tail_contributions(x, returns, 0..t, alpha);
    let mut estimates = Vec::with_capacity(batches);
    for b in 0..batches {
        estimates.push(tail_contributions(x, returns, b * per..(b + 1) * per, alpha).1);
    }
    let mut std_errors = DVector::zeros(n);
    for i in 0..n {
        let mean = estimates.iter().map(|e| e[i]).sum::<f64>() / batches as f64;
        let var_b = estimates.iter().map(|e| (e[i] - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
        std_errors[i] = (var_b / batches as f64).sqrt();
    }
    Ok(McEsContributions { var, es: contributions.sum(), contributions, std_errors })
}

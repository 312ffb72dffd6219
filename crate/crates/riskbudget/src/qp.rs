//! Dense convex quadratic programming.
//!
//! Solves
//!
//! ```text
//! min ½xᵀQx − xᵀR   s.t.  Ax = B,  Cx ≥ D,  lower ≤ x ≤ upper
//! ```
//!
//! with a primal active-set method. Each iteration works in the null space of the
//! current working set; the reduced Hessian is eigen-decomposed so that directions
//! of zero curvature (semi-definite `Q`, linear programs) are followed until a
//! constraint blocks them. A feasible starting point comes from an elastic phase 1
//! that minimizes a single slack `t` added to every inequality row.
//!
//! At the solution the multipliers satisfy
//! `Qx − R − Aᵀν − Cᵀλ − λ⁻ + λ⁺ = 0` with `λ, λ⁻, λ⁺ ≥ 0`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, null_space};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub q: DMatrix<f64>,
    pub r: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    /// Infinite entries mean "no bound".
    pub lower: Option<DVector<f64>>,
    pub upper: Option<DVector<f64>>,
}

impl QpProblem {
    pub fn new(q: DMatrix<f64>, r: DVector<f64>) -> Self {
        let n = r.len();
        Self {
            q,
            r,
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
            c: DMatrix::zeros(0, n),
            d: DVector::zeros(0),
            lower: None,
            upper: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    pub fn with_eq(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a = a;
        self.b = b;
        self
    }

    pub fn with_ineq(mut self, c: DMatrix<f64>, d: DVector<f64>) -> Self {
        self.c = c;
        self.d = d;
        self
    }

    pub fn with_bounds(mut self, lower: Option<DVector<f64>>, upper: Option<DVector<f64>>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    /// Appends the budget row `1ᵀx = 1`.
    pub fn with_budget(mut self) -> Self {
        let n = self.dim();
        let k = self.a.nrows();
        let mut a = DMatrix::zeros(k + 1, n);
        a.view_mut((0, 0), (k, n)).copy_from(&self.a);
        a.row_mut(k).fill(1.0);
        let mut b = DVector::zeros(k + 1);
        b.rows_mut(0, k).copy_from(&self.b);
        b[k] = 1.0;
        self.a = a;
        self.b = b;
        self
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.q * x).dot(x) - self.r.dot(x)
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        Error::check_dim(n, self.q.nrows())?;
        Error::check_dim(n, self.q.ncols())?;
        Error::check_dim(n, self.a.ncols())?;
        Error::check_dim(self.a.nrows(), self.b.len())?;
        Error::check_dim(n, self.c.ncols())?;
        Error::check_dim(self.c.nrows(), self.d.len())?;
        for v in [&self.lower, &self.upper].into_iter().flatten() {
            Error::check_dim(n, v.len())?;
        }
        if !crate::linalg::is_symmetric(&self.q, 1e-9) {
            return Err(Error::invalid("Q must be symmetric"));
        }
        let lmin = min_eigenvalue(&self.q);
        if lmin < -1e-9 * self.q.amax().max(1.0) {
            return Err(Error::NotPsd { min_eigenvalue: lmin });
        }
        if let (Some(l), Some(u)) = (&self.lower, &self.upper) {
            if l.iter().zip(u.iter()).any(|(a, b)| a > b) {
                return Err(Error::Infeasible("lower bound above upper bound".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers ν of the equality rows.
    pub eq: DVector<f64>,
    /// Multipliers λ ≥ 0 of the inequality rows.
    pub ineq: DVector<f64>,
    /// Multipliers λ⁻ ≥ 0 of the lower bounds (zero when inactive).
    pub lower: DVector<f64>,
    /// Multipliers λ⁺ ≥ 0 of the upper bounds (zero when inactive).
    pub upper: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub objective: f64,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }

    /// `‖Qx − R − Aᵀν − Cᵀλ − λ⁻ + λ⁺‖∞`.
    pub fn kkt_residual(&self, p: &QpProblem) -> f64 {
        let g = &p.q * &self.x - &p.r - p.a.transpose() * &self.eq - p.c.transpose() * &self.ineq
            - &self.lower
            + &self.upper;
        g.amax()
    }

    /// `max |λ_i (c_i·x − d_i)|` over inequality rows and bounds.
    pub fn complementarity(&self, p: &QpProblem) -> f64 {
        let mut worst: f64 = 0.0;
        let cx = &p.c * &self.x;
        for i in 0..p.c.nrows() {
            worst = worst.max((self.ineq[i] * (cx[i] - p.d[i])).abs());
        }
        if let Some(l) = &p.lower {
            for i in 0..self.x.len() {
                if l[i].is_finite() {
                    worst = worst.max((self.lower[i] * (self.x[i] - l[i])).abs());
                }
            }
        }
        if let Some(u) = &p.upper {
            for i in 0..self.x.len() {
                if u[i].is_finite() {
                    worst = worst.max((self.upper[i] * (u[i] - self.x[i])).abs());
                }
            }
        }
        worst
    }

    /// Returns `(λ⁻, λ⁺)`.
    pub fn extract_bound_multipliers(&self) -> Result<(DVector<f64>, DVector<f64>)> {
        if !self.is_optimal() {
            return Err(Error::invalid(format!("QP status is {:?}, not optimal", self.status)));
        }
        Ok((self.lower.clone(), self.upper.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Eq(usize),
    Ineq(usize),
    Lower(usize),
    Upper(usize),
    Slack,
}

#[derive(Debug, Clone)]
struct Row {
    a: DVector<f64>,
    rhs: f64,
    kind: Kind,
}

impl Row {
    fn is_eq(&self) -> bool {
        matches!(self.kind, Kind::Eq(_))
    }
}

fn build_rows(p: &QpProblem) -> Vec<Row> {
    let n = p.dim();
    let mut rows = Vec::new();
    for i in 0..p.a.nrows() {
        rows.push(Row { a: p.a.row(i).transpose(), rhs: p.b[i], kind: Kind::Eq(i) });
    }
    for i in 0..p.c.nrows() {
        rows.push(Row { a: p.c.row(i).transpose(), rhs: p.d[i], kind: Kind::Ineq(i) });
    }
    if let Some(l) = &p.lower {
        for i in 0..n {
            if l[i].is_finite() {
                let mut a = DVector::zeros(n);
                a[i] = 1.0;
                rows.push(Row { a, rhs: l[i], kind: Kind::Lower(i) });
            }
        }
    }
    if let Some(u) = &p.upper {
        for i in 0..n {
            if u[i].is_finite() {
                let mut a = DVector::zeros(n);
                a[i] = -1.0;
                rows.push(Row { a, rhs: -u[i], kind: Kind::Upper(i) });
            }
        }
    }
    rows
}

enum Outcome {
    Optimal { x: DVector<f64>, working: Vec<usize>, lambda: Vec<f64>, iterations: usize },
    MaxIterations { x: DVector<f64>, iterations: usize },
}

fn working_matrix(rows: &[Row], working: &[usize], n: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(working.len(), n);
    for (k, &i) in working.iter().enumerate() {
        w.row_mut(k).copy_from(&rows[i].a.transpose());
    }
    w
}

fn is_independent(rows: &[Row], working: &[usize], cand: &DVector<f64>, n: usize) -> bool {
    let z = null_space(&working_matrix(rows, working, n), n);
    let proj = z.transpose() * cand;
    proj.norm() > 1e-9 * cand.norm().max(1e-300)
}

/// Equality rows plus active inequality rows, keeping the set linearly independent.
fn initial_working(rows: &[Row], x: &DVector<f64>, tol: f64) -> Vec<usize> {
    let n = x.len();
    let mut working: Vec<usize> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let active = row.is_eq() || (row.a.dot(x) - row.rhs).abs() <= tol * (1.0 + row.rhs.abs());
        if active && is_independent(rows, &working, &row.a, n) {
            working.push(i);
        }
    }
    working
}

/// Primal active-set iterations from a feasible point.
fn active_set(
    q: &DMatrix<f64>,
    r: &DVector<f64>,
    rows: &[Row],
    mut x: DVector<f64>,
    mut working: Vec<usize>,
    max_iter: usize,
) -> Result<Outcome> {
    let n = x.len();
    let q_scale = q.amax();
    let tol_h = 1e-10 * q_scale;
    for iter in 0..max_iter {
        let g = q * &x - r;
        let w = working_matrix(rows, &working, n);
        let z = null_space(&w, n);
        let x_scale = 1.0 + x.amax();
        let tol_g = 1e-11 * (1.0 + r.amax() + q_scale * x_scale);

        let mut p = DVector::zeros(n);
        let mut max_step = 1.0;
        if z.ncols() > 0 {
            let gz = z.transpose() * &g;
            let h = z.transpose() * q * &z;
            let eig = SymmetricEigen::new((&h + h.transpose()) * 0.5);
            let mut flat = DVector::zeros(z.ncols());
            let mut newton = DVector::zeros(z.ncols());
            for k in 0..z.ncols() {
                let v = eig.eigenvectors.column(k);
                let c = v.dot(&gz);
                if eig.eigenvalues[k] <= tol_h {
                    flat += v * c;
                } else {
                    newton += v * (c / eig.eigenvalues[k]);
                }
            }
            if flat.amax() > tol_g {
                p = -(&z * flat);
                max_step = f64::INFINITY;
            } else {
                p = -(&z * newton);
            }
        }

        if p.amax() <= 1e-12 * x_scale {
            let lambda = if working.is_empty() {
                Vec::new()
            } else {
                let gram = &w * w.transpose();
                let rhs = &w * &g;
                crate::linalg::solve(&gram, &rhs)?.iter().cloned().collect::<Vec<_>>()
            };
            let tol_l = 1e-10 * (1.0 + g.amax());
            let mut drop: Option<(usize, f64)> = None;
            for (k, &i) in working.iter().enumerate() {
                if rows[i].is_eq() {
                    continue;
                }
                if lambda[k] < -tol_l && drop.map_or(true, |(_, v)| lambda[k] < v) {
                    drop = Some((k, lambda[k]));
                }
            }
            match drop {
                Some((k, _)) => {
                    working.remove(k);
                }
                None => {
                    return Ok(Outcome::Optimal { x, working, lambda, iterations: iter + 1 });
                }
            }
            continue;
        }

        let pn = p.norm();
        let mut step = max_step;
        let mut blocking: Option<usize> = None;
        for (i, row) in rows.iter().enumerate() {
            if row.is_eq() || working.contains(&i) {
                continue;
            }
            let ap = row.a.dot(&p);
            if ap < -1e-14 * row.a.norm() * pn {
                let slack = (row.a.dot(&x) - row.rhs).max(0.0);
                let t = slack / -ap;
                if t < step {
                    step = t;
                    blocking = Some(i);
                }
            }
        }
        if !step.is_finite() {
            return Err(Error::Unbounded);
        }
        x += &p * step;
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    Ok(Outcome::MaxIterations { x, iterations: max_iter })
}

fn iteration_cap(n: usize, rows: usize) -> usize {
    50 * (n + rows).max(1)
}

/// Finds a feasible point, or `None` when the constraints are inconsistent.
fn phase_one(p: &QpProblem, rows: &[Row]) -> Result<Option<DVector<f64>>> {
    let n = p.dim();
    let mut xc = DVector::zeros(n);
    for i in 0..n {
        let lo = p.lower.as_ref().map_or(f64::NEG_INFINITY, |l| l[i]);
        let hi = p.upper.as_ref().map_or(f64::INFINITY, |u| u[i]);
        xc[i] = 0.0f64.max(lo).min(hi);
    }
    let x0 = if p.a.nrows() > 0 {
        let resid = &p.b - &p.a * &xc;
        let svd = p.a.clone().svd(true, true);
        let corr = svd
            .solve(&resid, 1e-12 * p.a.amax().max(1e-300))
            .map_err(|e| Error::Singular(e.to_string()))?;
        let x0 = &xc + corr;
        let err = (&p.a * &x0 - &p.b).amax();
        if err > 1e-9 * (1.0 + p.b.amax()) {
            return Ok(None);
        }
        x0
    } else {
        xc
    };

    let scale = 1.0 + rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
    let viol = rows
        .iter()
        .filter(|r| !r.is_eq())
        .map(|r| r.rhs - r.a.dot(&x0))
        .fold(0.0, f64::max);
    if viol <= 1e-12 * scale {
        return Ok(Some(x0));
    }

    // Elastic problem over (x, t): every inequality row gets +t, t ≥ 0, minimize t.
    let m = n + 1;
    let mut ext = Vec::with_capacity(rows.len() + 1);
    for row in rows {
        let mut a = DVector::zeros(m);
        a.rows_mut(0, n).copy_from(&row.a);
        if !row.is_eq() {
            a[n] = 1.0;
        }
        ext.push(Row { a, rhs: row.rhs, kind: row.kind });
    }
    let mut a = DVector::zeros(m);
    a[n] = 1.0;
    ext.push(Row { a, rhs: 0.0, kind: Kind::Slack });

    let mut z0 = DVector::zeros(m);
    z0.rows_mut(0, n).copy_from(&x0);
    z0[n] = viol;
    let q = DMatrix::zeros(m, m);
    let mut r = DVector::zeros(m);
    r[n] = -1.0;
    let working = initial_working(&ext, &z0, 1e-12);
    let outcome = active_set(&q, &r, &ext, z0, working, iteration_cap(m, ext.len()))?;
    let z = match outcome {
        Outcome::Optimal { x, .. } => x,
        Outcome::MaxIterations { x, .. } => x,
    };
    if z[n] > 1e-9 * scale {
        return Ok(None);
    }
    Ok(Some(z.rows(0, n).into_owned()))
}

/// Solves a convex QP. Infeasibility and the iteration cap are reported through
/// [`QpStatus`]; an unbounded objective is an error.
pub fn solve_qp(problem: &QpProblem) -> Result<QpSolution> {
    problem.validate()?;
    let n = problem.dim();
    let rows = build_rows(problem);
    let zero_sol = |x: DVector<f64>, status, iterations| QpSolution {
        objective: problem.objective(&x),
        x,
        eq: DVector::zeros(problem.a.nrows()),
        ineq: DVector::zeros(problem.c.nrows()),
        lower: DVector::zeros(n),
        upper: DVector::zeros(n),
        status,
        iterations,
    };

    let x0 = match phase_one(problem, &rows)? {
        Some(x) => x,
        None => return Ok(zero_sol(DVector::zeros(n), QpStatus::Infeasible, 0)),
    };
    let working = initial_working(&rows, &x0, 1e-10);
    let outcome = active_set(&problem.q, &problem.r, &rows, x0, working, iteration_cap(n, rows.len()))?;
    match outcome {
        Outcome::MaxIterations { x, iterations } => Ok(zero_sol(x, QpStatus::MaxIterations, iterations)),
        Outcome::Optimal { x, working, lambda, iterations } => {
            let mut sol = zero_sol(x, QpStatus::Optimal, iterations);
            for (k, &i) in working.iter().enumerate() {
                match rows[i].kind {
                    Kind::Eq(j) => sol.eq[j] = lambda[k],
                    Kind::Ineq(j) => sol.ineq[j] = lambda[k].max(0.0),
                    Kind::Lower(j) => sol.lower[j] = lambda[k].max(0.0),
                    Kind::Upper(j) => sol.upper[j] = lambda[k].max(0.0),
                    Kind::Slack => {}
                }
            }
            Ok(sol)
        }
    }
}

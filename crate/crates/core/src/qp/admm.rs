//! Operator-splitting iteration with Ruiz equilibration, adaptive step size,
//! infeasibility detection and active-set polishing.

use nalgebra::{DMatrix, DVector};

use super::dense::Cholesky;
use super::{kkt_residuals_of, QpProblem, QpSolution, SolveStatus, SolverSettings, WarmStart};
use crate::error::QpError;

const CHECK_INTERVAL: usize = 10;
const EQUALITY_WEIGHT: f64 = 1e3;
const FREE_WEIGHT: f64 = 1e-6;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_CHANGE_FACTOR: f64 = 5.0;
const SCALE_MIN: f64 = 1e-4;
const SCALE_MAX: f64 = 1e4;
const POLISH_START: f64 = 1e-3;
const POLISH_MAX_ATTEMPTS: usize = 10;
const POLISH_DELTAS: [f64; 4] = [1e-7, 1e-6, 1e-5, 1e-4];
const POLISH_REFINE_STEPS: usize = 25;
const POLISH_ROUNDS: usize = 2;
const POLISH_SIGN_TOL: f64 = 1e-11;
const POLISH_FEAS_TOL: f64 = 1e-11;

struct Scaled {
    p: DMatrix<f64>,
    q: DVector<f64>,
    a: DMatrix<f64>,
    l: DVector<f64>,
    u: DVector<f64>,
    /// Variable scaling: x = d ∘ x̄.
    d: DVector<f64>,
    /// Constraint scaling: Ā = diag(e) A diag(d).
    e: DVector<f64>,
    /// Objective scaling.
    c: f64,
}

fn clamp_scale(norm: f64) -> f64 {
    if norm < SCALE_MIN {
        1.0
    } else {
        1.0 / norm.min(SCALE_MAX).sqrt()
    }
}

fn column_amax(m: &DMatrix<f64>, j: usize) -> f64 {
    m.column(j).iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn row_amax(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = vec![0.0f64; m.nrows()];
    for col in m.column_iter() {
        for (o, v) in out.iter_mut().zip(col.iter()) {
            *o = o.max(v.abs());
        }
    }
    out
}

fn scale(problem: &QpProblem, iters: usize) -> Scaled {
    let n = problem.n_variables();
    let m = problem.n_constraints();
    let mut p = problem.quadratic_term().clone();
    let mut q = problem.linear_term().clone();
    let mut a = problem.constraint_matrix().clone();
    let mut d = DVector::from_element(n, 1.0);
    let mut e = DVector::from_element(m, 1.0);
    let mut c = 1.0;
    for _ in 0..iters {
        let dd = DVector::from_fn(n, |j, _| clamp_scale(column_amax(&p, j).max(column_amax(&a, j))));
        let ee = DVector::from_iterator(m, row_amax(&a).into_iter().map(clamp_scale));
        for j in 0..n {
            for i in 0..n {
                p[(i, j)] *= dd[i] * dd[j];
            }
            for i in 0..m {
                a[(i, j)] *= ee[i] * dd[j];
            }
            q[j] *= dd[j];
        }
        d.component_mul_assign(&dd);
        e.component_mul_assign(&ee);
        let mean_col = if n > 0 {
            (0..n).map(|j| column_amax(&p, j)).sum::<f64>() / n as f64
        } else {
            0.0
        };
        let gamma = clamp_scale(mean_col.max(q.amax())).powi(2);
        p *= gamma;
        q *= gamma;
        c *= gamma;
    }
    let l = problem.lower_limits().component_mul(&e);
    let u = problem.upper_limits().component_mul(&e);
    Scaled { p, q, a, l, u, d, e, c }
}

struct Workspace<'a> {
    s: &'a Scaled,
    weights: DVector<f64>,
    /// Āᵀ diag(weights) Ā.
    gram: DMatrix<f64>,
    sigma: f64,
    rho: f64,
    rho_vec: DVector<f64>,
    factor: Cholesky,
}

impl<'a> Workspace<'a> {
    fn new(s: &'a Scaled, settings: &SolverSettings) -> Result<Self, QpError> {
        let m = s.a.nrows();
        let weights = DVector::from_fn(m, |i, _| {
            let (l, u) = (s.l[i], s.u[i]);
            if l == u {
                EQUALITY_WEIGHT
            } else if l.is_infinite() && u.is_infinite() {
                FREE_WEIGHT
            } else {
                1.0
            }
        });
        let mut weighted_t = s.a.transpose();
        for (i, mut col) in weighted_t.column_iter_mut().enumerate() {
            col *= weights[i];
        }
        let n = s.p.nrows();
        let mut gram = DMatrix::zeros(n, n);
        if m > 0 {
            gram.gemm(1.0, &weighted_t, &s.a, 0.0);
        }
        drop(weighted_t);
        let rho = settings.rho.clamp(RHO_MIN, RHO_MAX);
        let factor = Self::factorize(s, &gram, settings.sigma, rho)?;
        Ok(Self {
            s,
            rho_vec: &weights * rho,
            weights,
            gram,
            sigma: settings.sigma,
            rho,
            factor,
        })
    }

    fn factorize(s: &Scaled, gram: &DMatrix<f64>, sigma: f64, rho: f64) -> Result<Cholesky, QpError> {
        let mut mat = &s.p + gram * rho;
        for i in 0..mat.nrows() {
            mat[(i, i)] += sigma;
        }
        Cholesky::new(mat)
    }

    fn set_rho(&mut self, rho: f64) -> Result<(), QpError> {
        self.rho = rho;
        self.rho_vec = &self.weights * rho;
        self.factor = Self::factorize(self.s, &self.gram, self.sigma, rho)?;
        Ok(())
    }
}

struct Residuals {
    /// Unscaled ‖A x − z‖∞.
    primal: f64,
    /// Unscaled ‖P x + q + Aᵀ y‖∞.
    dual: f64,
    /// Scaled residual norms and their normalizers, for step-size adaptation.
    primal_scaled: f64,
    dual_scaled: f64,
    primal_norm: f64,
    dual_norm: f64,
}

fn residuals(s: &Scaled, x: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>, ax: &DVector<f64>) -> Residuals {
    let mut primal: f64 = 0.0;
    let mut primal_scaled: f64 = 0.0;
    for i in 0..z.len() {
        let r = ax[i] - z[i];
        primal_scaled = primal_scaled.max(r.abs());
        primal = primal.max((r / s.e[i]).abs());
    }
    let px = &s.p * x;
    let aty = if y.len() > 0 { s.a.tr_mul(y) } else { DVector::zeros(x.len()) };
    let grad = &px + &s.q + &aty;
    let mut dual: f64 = 0.0;
    for j in 0..x.len() {
        dual = dual.max((grad[j] / s.d[j]).abs());
    }
    Residuals {
        primal,
        dual: dual / s.c,
        primal_scaled,
        dual_scaled: grad.amax(),
        primal_norm: ax.amax().max(z.amax()),
        dual_norm: px.amax().max(aty.amax()).max(s.q.amax()),
    }
}

/// Checks whether `dy` certifies primal infeasibility.
fn infeasibility_certificate(s: &Scaled, dy: &DVector<f64>, eps: f64) -> bool {
    let norm = dy.component_mul(&s.e).amax();
    if !(norm > 1e-30) {
        return false;
    }
    let aty = s.a.tr_mul(dy);
    let mut lhs: f64 = 0.0;
    for j in 0..aty.len() {
        lhs = lhs.max((aty[j] / s.d[j]).abs());
    }
    if lhs > eps * norm {
        return false;
    }
    let mut support = 0.0;
    for i in 0..dy.len() {
        let v = dy[i];
        let small = (v * s.e[i]).abs() <= eps * norm;
        if v > 0.0 {
            if s.u[i].is_finite() {
                support += s.u[i] * v;
            } else if !small {
                return false;
            }
        } else if v < 0.0 {
            if s.l[i].is_finite() {
                support += s.l[i] * v;
            } else if !small {
                return false;
            }
        }
    }
    support < -eps * norm
}

fn unscale(s: &Scaled, x: &DVector<f64>, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let xu = x.component_mul(&s.d);
    let yu = y.component_mul(&s.e) / s.c;
    (xu, yu)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Side {
    Lower,
    Upper,
    Both,
}

/// Initial active-set guess from the ADMM iterate.
fn guess_active(s: &Scaled, z: &DVector<f64>, y: &DVector<f64>) -> Vec<Option<Side>> {
    (0..s.a.nrows())
        .map(|i| {
            let (l, u) = (s.l[i], s.u[i]);
            if l == u {
                Some(Side::Both)
            } else if z[i] - l < -y[i] {
                Some(Side::Lower)
            } else if u - z[i] < y[i] {
                Some(Side::Upper)
            } else {
                None
            }
        })
        .collect()
}

/// Solves the equality-constrained problem of one active set through a
/// regularized KKT system with iterative refinement, starting from `(x, y)`.
fn solve_active_set(
    s: &Scaled,
    sides: &[Option<Side>],
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = s.p.nrows();
    let m = s.a.nrows();
    let active: Vec<usize> = (0..m).filter(|&i| sides[i].is_some()).collect();
    let targets: Vec<f64> = active
        .iter()
        .map(|&i| match sides[i] {
            Some(Side::Lower) | Some(Side::Both) => s.l[i],
            _ => s.u[i],
        })
        .collect();
    let k = active.len();
    let a_act = DMatrix::from_fn(k, n, |r, j| s.a[(active[r], j)]);
    let b = DVector::from_vec(targets);
    let gram = (k > 0).then(|| a_act.transpose() * &a_act);
    // the Schur complement loses definiteness in floating point when the
    // active rows are badly scaled; retry with stronger regularization
    let (delta, factor) = POLISH_DELTAS.iter().find_map(|&delta| {
        let mut kmat = s.p.clone();
        if let Some(g) = &gram {
            kmat += g * (1.0 / delta);
        }
        for i in 0..n {
            kmat[(i, i)] += delta;
        }
        let f = Cholesky::new(kmat).ok();
        f.map(|f| (delta, f))
    })?;
    let inv_delta = 1.0 / delta;
    let mut xp = x.clone();
    let mut yp = DVector::from_fn(k, |r, _| y[active[r]]);
    for _ in 0..=POLISH_REFINE_STEPS {
        let mut r1 = -(&s.q) - &s.p * &xp;
        let r2 = &b - &a_act * &xp;
        if k > 0 {
            r1.gemv_tr(-1.0, &a_act, &yp, 1.0);
        }
        if r1.amax() == 0.0 && r2.amax() == 0.0 {
            break;
        }
        let mut rhs = r1;
        if k > 0 {
            rhs.gemv_tr(inv_delta, &a_act, &r2, 1.0);
        }
        factor.solve_in_place(&mut rhs);
        let dx = rhs;
        let dy = (&a_act * &dx - &r2) * inv_delta;
        xp += dx;
        yp += dy;
    }
    if xp.iter().chain(yp.iter()).any(|v| !v.is_finite()) {
        return None;
    }
    let mut y_full = DVector::zeros(m);
    for (r, &i) in active.iter().enumerate() {
        y_full[i] = yp[r];
    }
    Some((xp, y_full))
}

/// Active-set polish: starting from the guess implied by the ADMM iterate,
/// solves the equality-constrained problem, then releases rows whose
/// multipliers have the wrong sign and adds rows that are violated, until
/// the set stops changing. Returns the solution of every round.
fn polish(s: &Scaled, x: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>) -> Vec<(DVector<f64>, DVector<f64>)> {
    let mut sides = guess_active(s, z, y);
    let mut out = Vec::new();
    let (mut xc, mut yc) = (x.clone(), y.clone());
    for _ in 0..POLISH_ROUNDS {
        let Some((xp, yp)) = solve_active_set(s, &sides, &xc, &yc) else {
            break;
        };
        let ax = &s.a * &xp;
        let mut changed = false;
        for i in 0..sides.len() {
            let (l, u) = (s.l[i], s.u[i]);
            match sides[i] {
                Some(Side::Lower) if yp[i] > POLISH_SIGN_TOL => {
                    sides[i] = None;
                    changed = true;
                }
                Some(Side::Upper) if yp[i] < -POLISH_SIGN_TOL => {
                    sides[i] = None;
                    changed = true;
                }
                None if ax[i] < l - POLISH_FEAS_TOL * (1.0 + l.abs()) => {
                    sides[i] = Some(Side::Lower);
                    changed = true;
                }
                None if ax[i] > u + POLISH_FEAS_TOL * (1.0 + u.abs()) => {
                    sides[i] = Some(Side::Upper);
                    changed = true;
                }
                _ => {}
            }
        }
        xc = xp.clone();
        yc = yp.clone();
        out.push((xp, yp));
        if !changed {
            break;
        }
    }
    out
}

pub(super) fn solve(
    problem: &QpProblem,
    settings: &SolverSettings,
    warm: Option<&WarmStart>,
) -> Result<QpSolution, QpError> {
    let s = scale(problem, settings.scaling_iters);
    let n = problem.n_variables();
    let m = problem.n_constraints();
    let mut ws = Workspace::new(&s, settings)?;

    let (mut x, mut y) = match warm {
        Some(w) => (
            w.primal.component_div(&s.d),
            w.dual.component_div(&s.e) * s.c,
        ),
        None => (DVector::zeros(n), DVector::zeros(m)),
    };
    let mut ax = &s.a * &x;
    let mut z = DVector::from_fn(m, |i, _| ax[i].clamp(s.l[i], s.u[i]));

    let alpha = settings.alpha;
    let tol_close = settings.tol_feas.max(settings.tol_opt);
    let mut polish_attempts = 0;
    let mut last_polish_level = f64::INFINITY;
    let mut rhs = DVector::zeros(n);
    let mut tmp_m = DVector::zeros(m);

    let finish = |x: &DVector<f64>, y: &DVector<f64>, status: SolveStatus, iterations: usize, polished: bool| {
        let (xu, yu) = unscale(&s, x, y);
        finish_solution(problem, xu, yu, status, iterations, polished, settings)
    };
    let try_polish = |x: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>, iterations: usize| -> Option<QpSolution> {
        polish(&s, x, z, y).into_iter().find_map(|(xp, yp)| {
            let (xu, yu) = unscale(&s, &xp, &yp);
            let r = kkt_residuals_of(problem, &xu, &yu);
            let ok =
                r.stationarity <= settings.tol_opt && r.feasibility <= settings.tol_feas && r.complementarity <= tol_close;
            ok.then(|| finish_solution(problem, xu, yu, SolveStatus::Optimal, iterations, true, settings))
        })
    };

    for iter in 1..=settings.max_iters {
        let check = iter % CHECK_INTERVAL == 0 || iter == 1 || iter == settings.max_iters;
        let y_prev = if check { Some(y.clone()) } else { None };

        // rhs = σ x − q + Āᵀ(ρ ∘ z − y)
        for i in 0..m {
            tmp_m[i] = ws.rho_vec[i] * z[i] - y[i];
        }
        rhs.copy_from(&x);
        rhs *= ws.sigma;
        rhs -= &s.q;
        if m > 0 {
            rhs.gemv_tr(1.0, &s.a, &tmp_m, 1.0);
        }
        ws.factor.solve_in_place(&mut rhs);
        let x_tilde = &rhs;
        let z_tilde = &s.a * x_tilde;

        for j in 0..n {
            x[j] = alpha * x_tilde[j] + (1.0 - alpha) * x[j];
        }
        for i in 0..m {
            let z_relax = alpha * z_tilde[i] + (1.0 - alpha) * z[i];
            let z_new = (z_relax + y[i] / ws.rho_vec[i]).clamp(s.l[i], s.u[i]);
            y[i] += ws.rho_vec[i] * (z_relax - z_new);
            z[i] = z_new;
            ax[i] = alpha * z_tilde[i] + (1.0 - alpha) * ax[i];
        }

        if !check {
            continue;
        }
        // Refresh A x to avoid drift in the running update.
        ax = &s.a * &x;
        let r = residuals(&s, &x, &z, &y, &ax);
        if !(r.primal.is_finite() && r.dual.is_finite()) {
            return Err(QpError::NotANumber);
        }
        if r.primal <= settings.tol_feas && r.dual <= settings.tol_opt {
            if settings.polish {
                if let Some(sol) = try_polish(&x, &z, &y, iter) {
                    return Ok(sol);
                }
            }
            let sol = finish(&x, &y, SolveStatus::Optimal, iter, false);
            if sol.status == SolveStatus::Optimal {
                return Ok(sol);
            }
        }
        if let Some(prev) = y_prev {
            let dy = &y - prev;
            if infeasibility_certificate(&s, &dy, settings.infeasibility_tol) {
                return Ok(finish(&x, &y, SolveStatus::Infeasible, iter, false));
            }
        }
        let level = (r.primal_scaled / (1.0 + r.primal_norm)).max(r.dual_scaled / (1.0 + r.dual_norm));
        if settings.polish && polish_attempts < POLISH_MAX_ATTEMPTS && level <= POLISH_START && level <= 0.1 * last_polish_level {
            polish_attempts += 1;
            last_polish_level = level;
            if let Some(sol) = try_polish(&x, &z, &y, iter) {
                return Ok(sol);
            }
        }
        if iter % settings.adaptive_rho_interval == 0 && m > 0 {
            let num = r.primal_scaled / r.primal_norm.max(1e-30);
            let den = r.dual_scaled / r.dual_norm.max(1e-30);
            if num > 0.0 && den > 0.0 {
                let new_rho = (ws.rho * (num / den).sqrt()).clamp(RHO_MIN, RHO_MAX);
                if new_rho > ws.rho * RHO_CHANGE_FACTOR || new_rho < ws.rho / RHO_CHANGE_FACTOR {
                    ws.set_rho(new_rho)?;
                }
            }
        }
    }
    if settings.polish {
        if let Some(sol) = try_polish(&x, &z, &y, settings.max_iters) {
            return Ok(sol);
        }
    }
    Ok(finish(&x, &y, SolveStatus::MaxIters, settings.max_iters, false))
}

fn finish_solution(
    problem: &QpProblem,
    x: DVector<f64>,
    y: DVector<f64>,
    status: SolveStatus,
    iterations: usize,
    polished: bool,
    settings: &SolverSettings,
) -> QpSolution {
    let r = kkt_residuals_of(problem, &x, &y);
    let status = if status == SolveStatus::Optimal
        && !(r.feasibility <= settings.tol_feas && r.stationarity <= settings.tol_opt)
    {
        SolveStatus::MaxIters
    } else {
        status
    };
    QpSolution {
        objective: problem.objective(&x),
        primal: x,
        dual: y,
        primal_residual: r.feasibility,
        dual_residual: r.stationarity,
        status,
        iterations,
        polished,
    }
}

//! Dense convex quadratic programming.
//!
//! Solves
//! ```text
//!     min  ½ xᵀP x + qᵀx
//!     s.t. A x = b,   G x ≤ h,   lb ≤ x ≤ ub
//! ```
//! with `P` symmetric positive semidefinite (possibly zero — the LP case).
//!
//! The method is a primal-dual interior point iteration with Mehrotra
//! predictor-corrector steps. Bounds are folded into the inequality block
//! internally; fixed variables (`lb == ub`) are eliminated by presolve. Each
//! iteration factors the regularized KKT system
//! ```text
//!     [ P + Gᵀ(Z/S)G + ρI   Aᵀ  ] [dx]
//!     [ A                  −γI  ] [dy]
//! ```
//! once (dense LU) and reuses it for the predictor and corrector solves,
//! with one round of iterative refinement against the unregularized matrix.
//!
//! When an iteration-limited solve leaves primal residuals, a phase-1
//! feasibility problem (`min Σt` over `Gx − t ≤ h, t ≥ 0`) decides between
//! `IterationLimit` and a genuine `PrimalInfeasible` verdict.
//!
//! [`lazy_solve`] works a large inequality pool incrementally: solve with an
//! active subset, pull in every pool row closer to the boundary than the
//! activation threshold, and repeat. The active set only grows, so the loop
//! terminates after at most `pool` rounds.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    PrimalInfeasible,
    IterationLimit,
}

/// Convex QP in standard inequality/equality form.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
}

impl QpProblem {
    /// Assemble and validate a problem; `p` is symmetrized.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        p: DMatrix<f64>,
        q: DVector<f64>,
        a_eq: DMatrix<f64>,
        b_eq: DVector<f64>,
        a_in: DMatrix<f64>,
        b_in: DVector<f64>,
        lb: DVector<f64>,
        ub: DVector<f64>,
    ) -> Result<Self, QpError> {
        let n = q.len();
        if p.nrows() != n || p.ncols() != n {
            return Err(QpError::Dimension(format!(
                "P is {}×{}, expected {n}×{n}",
                p.nrows(),
                p.ncols()
            )));
        }
        if a_eq.ncols() != n && a_eq.nrows() > 0 {
            return Err(QpError::Dimension(format!(
                "A_eq has {} columns, expected {n}",
                a_eq.ncols()
            )));
        }
        if a_eq.nrows() != b_eq.len() {
            return Err(QpError::Dimension("A_eq/b_eq row mismatch".into()));
        }
        if a_in.ncols() != n && a_in.nrows() > 0 {
            return Err(QpError::Dimension(format!(
                "A_in has {} columns, expected {n}",
                a_in.ncols()
            )));
        }
        if a_in.nrows() != b_in.len() {
            return Err(QpError::Dimension("A_in/b_in row mismatch".into()));
        }
        if lb.len() != n || ub.len() != n {
            return Err(QpError::Dimension("bound length mismatch".into()));
        }
        let p = (&p + p.transpose()) * 0.5;
        #[cfg(debug_assertions)]
        {
            // PSD sanity: Cholesky of P with a small diagonal shift.
            let shift = 1e-8 * (1.0 + p.diagonal().amax());
            let shifted = &p + DMatrix::<f64>::identity(n, n) * shift;
            debug_assert!(
                nalgebra::linalg::Cholesky::new(shifted).is_some(),
                "QP Hessian is not positive semidefinite"
            );
        }
        Ok(QpProblem { p, q, a_eq, b_eq, a_in, b_in, lb, ub })
    }

    /// Problem with unbounded variables and no rows, `min ½xᵀPx + qᵀx`.
    pub fn unconstrained(p: DMatrix<f64>, q: DVector<f64>) -> Result<Self, QpError> {
        let n = q.len();
        QpProblem::new(
            p,
            q,
            DMatrix::zeros(0, n),
            DVector::zeros(0),
            DMatrix::zeros(0, n),
            DVector::zeros(0),
            DVector::from_element(n, f64::NEG_INFINITY),
            DVector::from_element(n, f64::INFINITY),
        )
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.p * x).dot(x) + self.q.dot(x)
    }

    /// Sparse triplet text dump (`tag row col value` lines) for
    /// cross-checking against external solvers.
    pub fn dump_triplets(&self) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# n {} p {} m {}",
            self.q.len(),
            self.a_eq.nrows(),
            self.a_in.nrows()
        );
        let mut emit = |tag: &str, m: &DMatrix<f64>, out: &mut String| {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    if m[(i, j)] != 0.0 {
                        let _ = writeln!(out, "{tag} {i} {j} {:.17e}", m[(i, j)]);
                    }
                }
            }
        };
        emit("P", &self.p, &mut out);
        emit("A", &self.a_eq, &mut out);
        emit("G", &self.a_in, &mut out);
        let mut emit_vec = |tag: &str, v: &DVector<f64>, out: &mut String| {
            for (i, &x) in v.iter().enumerate() {
                if x != 0.0 && x.is_finite() {
                    let _ = writeln!(out, "{tag} {i} 0 {x:.17e}");
                }
            }
        };
        emit_vec("q", &self.q, &mut out);
        emit_vec("b", &self.b_eq, &mut out);
        emit_vec("h", &self.b_in, &mut out);
        emit_vec("l", &self.lb, &mut out);
        emit_vec("u", &self.ub, &mut out);
        out
    }
}

/// Primal-dual solution with multipliers and KKT residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub eq_mult: DVector<f64>,
    /// Multipliers of the `a_in` rows (≥ 0 at optimality).
    pub in_mult: DVector<f64>,
    pub lb_mult: DVector<f64>,
    pub ub_mult: DVector<f64>,
    pub status: QpStatus,
    pub objective: f64,
    /// ‖Px + q + Aᵀy + Gᵀz − z_lb + z_ub‖∞.
    pub stationarity: f64,
    /// max(‖Ax − b‖∞, largest inequality/bound violation).
    pub primal_residual: f64,
    /// Largest complementarity product over inequality rows and bounds.
    pub complementarity: f64,
    /// `sᵀz`, the primal-dual objective gap at feasibility.
    pub duality_gap: f64,
    pub iterations: usize,
}

struct Expanded {
    /// Inequality matrix with bound rows appended.
    g: DMatrix<f64>,
    h: DVector<f64>,
    /// Row origin: index into `a_in`, lower-bound var, or upper-bound var.
    origin: Vec<RowOrigin>,
}

#[derive(Clone, Copy)]
enum RowOrigin {
    Ineq(usize),
    Lower(usize),
    Upper(usize),
}

fn expand_rows(
    a_in: &DMatrix<f64>,
    b_in: &DVector<f64>,
    lb: &DVector<f64>,
    ub: &DVector<f64>,
) -> Expanded {
    let n = lb.len();
    let fin_lb: Vec<usize> = (0..n).filter(|&i| lb[i].is_finite()).collect();
    let fin_ub: Vec<usize> = (0..n).filter(|&i| ub[i].is_finite()).collect();
    let rows = a_in.nrows() + fin_lb.len() + fin_ub.len();

    let mut g = DMatrix::zeros(rows, n);
    let mut h = DVector::zeros(rows);
    let mut origin = Vec::with_capacity(rows);
    if a_in.nrows() > 0 {
        g.view_mut((0, 0), (a_in.nrows(), n)).copy_from(a_in);
        h.rows_mut(0, b_in.len()).copy_from(b_in);
    }
    origin.extend((0..a_in.nrows()).map(RowOrigin::Ineq));
    let mut r = a_in.nrows();
    for &i in &fin_ub {
        g[(r, i)] = 1.0;
        h[r] = ub[i];
        origin.push(RowOrigin::Upper(i));
        r += 1;
    }
    for &i in &fin_lb {
        g[(r, i)] = -1.0;
        h[r] = -lb[i];
        origin.push(RowOrigin::Lower(i));
        r += 1;
    }
    Expanded { g, h, origin }
}

/// Warm-start data; shapes that do not match the problem are ignored.
pub struct WarmStart<'a> {
    pub x: &'a DVector<f64>,
    pub in_mult: Option<&'a DVector<f64>>,
}

const MAX_ITERS: usize = 120;
const FRACTION_TO_BOUNDARY: f64 = 0.995;
const REG_PRIMAL: f64 = 1e-11;
const REG_DUAL: f64 = 1e-11;

/// Solve a convex QP to the given KKT tolerance (default 1e-8 when `None`).
pub fn solve(
    problem: &QpProblem,
    warm: Option<WarmStart<'_>>,
    tol: Option<f64>,
) -> Result<QpSolution, QpError> {
    let tol = tol.unwrap_or(1e-8);
    // Presolve: eliminate variables fixed by their bounds.
    let n = problem.q.len();
    let fixed: Vec<usize> = (0..n).filter(|&i| problem.lb[i] == problem.ub[i]).collect();
    if fixed.is_empty() {
        return solve_inner(problem, warm, tol, true);
    }

    let free: Vec<usize> = (0..n).filter(|&i| problem.lb[i] != problem.ub[i]).collect();
    let xf = DVector::from_iterator(fixed.len(), fixed.iter().map(|&i| problem.lb[i]));
    let pick_cols = |m: &DMatrix<f64>, cols: &[usize]| -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
    };
    let p_ff = DMatrix::from_fn(free.len(), free.len(), |r, c| problem.p[(free[r], free[c])]);
    let p_fx = DMatrix::from_fn(free.len(), fixed.len(), |r, c| problem.p[(free[r], fixed[c])]);
    let q_f = DVector::from_iterator(free.len(), free.iter().map(|&i| problem.q[i])) + &p_fx * &xf;
    let a_eq_f = pick_cols(&problem.a_eq, &free);
    let b_eq_f = &problem.b_eq - pick_cols(&problem.a_eq, &fixed) * &xf;
    let a_in_f = pick_cols(&problem.a_in, &free);
    let b_in_f = &problem.b_in - pick_cols(&problem.a_in, &fixed) * &xf;
    let lb_f = DVector::from_iterator(free.len(), free.iter().map(|&i| problem.lb[i]));
    let ub_f = DVector::from_iterator(free.len(), free.iter().map(|&i| problem.ub[i]));

    let sub = QpProblem::new(p_ff, q_f, a_eq_f, b_eq_f, a_in_f, b_in_f, lb_f, ub_f)?;
    let warm_x_f = warm
        .as_ref()
        .filter(|w| w.x.len() == n)
        .map(|w| DVector::from_iterator(free.len(), free.iter().map(|&i| w.x[i])));
    let sub_warm = warm_x_f
        .as_ref()
        .map(|x| WarmStart { x, in_mult: warm.as_ref().and_then(|w| w.in_mult) });
    let sol = solve_inner(&sub, sub_warm, tol, true)?;

    // Scatter back, recovering bound multipliers of the fixed variables
    // from the stationarity residual.
    let mut x = DVector::zeros(n);
    let mut lb_mult = DVector::zeros(n);
    let mut ub_mult = DVector::zeros(n);
    for (fi, &i) in free.iter().enumerate() {
        x[i] = sol.x[fi];
        lb_mult[i] = sol.lb_mult[fi];
        ub_mult[i] = sol.ub_mult[fi];
    }
    for &i in &fixed {
        x[i] = problem.lb[i];
    }
    let grad = &problem.p * &x
        + &problem.q
        + problem.a_eq.tr_mul(&sol.eq_mult)
        + problem.a_in.tr_mul(&sol.in_mult);
    for &i in &fixed {
        let r = grad[i];
        if r > 0.0 {
            lb_mult[i] = r;
        } else {
            ub_mult[i] = -r;
        }
    }
    let objective = problem.objective(&x);
    Ok(QpSolution { x, objective, lb_mult, ub_mult, ..sol })
}

fn solve_inner(
    problem: &QpProblem,
    warm: Option<WarmStart<'_>>,
    tol: f64,
    allow_phase1: bool,
) -> Result<QpSolution, QpError> {
    let n = problem.q.len();
    let p_eq = problem.a_eq.nrows();
    let exp = expand_rows(&problem.a_in, &problem.b_in, &problem.lb, &problem.ub);
    let mt = exp.g.nrows();

    if mt == 0 {
        return solve_equality_only(problem, tol);
    }

    let scale_d = 1.0 + problem.q.amax().max(problem.p.amax());
    let scale_p = 1.0 + exp.h.amax().max(if p_eq > 0 { problem.b_eq.amax() } else { 0.0 });

    // Starting point.
    let mut x = match &warm {
        Some(w) if w.x.len() == n => w.x.clone(),
        _ => DVector::from_fn(n, |i, _| {
            let (l, u) = (problem.lb[i], problem.ub[i]);
            match (l.is_finite(), u.is_finite()) {
                (true, true) => 0.5 * (l + u),
                (true, false) => l + 1.0,
                (false, true) => u - 1.0,
                (false, false) => 0.0,
            }
        }),
    };
    // Keep strictly inside the bounds.
    for i in 0..n {
        let (l, u) = (problem.lb[i], problem.ub[i]);
        if l.is_finite() && x[i] < l + 1e-8 {
            x[i] = l + if u.is_finite() { 0.25 * (u - l).min(1.0) } else { 1.0 };
        }
        if u.is_finite() && x[i] > u - 1e-8 {
            x[i] = u - if l.is_finite() { 0.25 * (u - l).min(1.0) } else { 1.0 };
        }
    }
    let mut y = DVector::zeros(p_eq);
    let gx = &exp.g * &x;
    let mut s = DVector::from_fn(mt, |i, _| (exp.h[i] - gx[i]).max(1.0));
    let mut z = DVector::from_element(mt, 1.0);
    if let Some(w) = &warm {
        if let Some(zw) = w.in_mult {
            if zw.len() == problem.a_in.nrows() {
                for (r, o) in exp.origin.iter().enumerate() {
                    if let RowOrigin::Ineq(j) = o {
                        z[r] = zw[*j].max(1e-4);
                    }
                }
            }
        }
    }

    let mut iterations = 0;
    let mut stalls = 0;
    let kkt_dim = n + p_eq;

    for iter in 0..MAX_ITERS {
        iterations = iter + 1;
        let rd = &problem.p * &x + &problem.q + problem.a_eq.tr_mul(&y) + exp.g.tr_mul(&z);
        let rp = if p_eq > 0 { &problem.a_eq * &x - &problem.b_eq } else { DVector::zeros(0) };
        let rg = &exp.g * &x + &s - &exp.h;
        let mu = s.dot(&z) / mt as f64;

        if rd.amax() / scale_d <= tol
            && (p_eq == 0 || rp.amax() / scale_p <= tol)
            && rg.amax() / scale_p <= tol
            && mu <= tol * 0.1
        {
            return Ok(finish(problem, &exp, x, y, z, s, QpStatus::Optimal, iterations));
        }

        // KKT matrix with W = Z/S folded into the (1,1) block.
        let w_diag = DVector::from_fn(mt, |i, _| (z[i] / s[i]).clamp(1e-14, 1e14));
        let mut wg = exp.g.clone();
        for i in 0..mt {
            wg.row_mut(i).scale_mut(w_diag[i]);
        }
        let m_block = &problem.p + exp.g.tr_mul(&wg);
        let mut kkt = DMatrix::zeros(kkt_dim, kkt_dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&m_block);
        for i in 0..n {
            kkt[(i, i)] += REG_PRIMAL * scale_d;
        }
        if p_eq > 0 {
            kkt.view_mut((0, n), (n, p_eq)).copy_from(&problem.a_eq.transpose());
            kkt.view_mut((n, 0), (p_eq, n)).copy_from(&problem.a_eq);
            for i in 0..p_eq {
                kkt[(n + i, n + i)] = -REG_DUAL * scale_p;
            }
        }
        // Unregularized copy for one round of iterative refinement.
        let mut kkt0 = kkt.clone();
        for i in 0..n {
            kkt0[(i, i)] -= REG_PRIMAL * scale_d;
        }
        for i in 0..p_eq {
            kkt0[(n + i, n + i)] = 0.0;
        }
        let lu = kkt.lu();
        let solve_kkt = |rhs: &DVector<f64>| -> Option<DVector<f64>> {
            let mut sol = lu.solve(rhs)?;
            let resid = rhs - &kkt0 * &sol;
            if let Some(corr) = lu.solve(&resid) {
                sol += corr;
            }
            Some(sol)
        };

        let assemble_rhs = |rc: &DVector<f64>| -> DVector<f64> {
            // r1 = −rd − GᵀW rg + Gᵀ(rc/s)
            let mut scaled = DVector::zeros(mt);
            for i in 0..mt {
                scaled[i] = -w_diag[i] * rg[i] + rc[i] / s[i];
            }
            let r1 = -&rd + exp.g.tr_mul(&scaled);
            let mut rhs = DVector::zeros(kkt_dim);
            rhs.rows_mut(0, n).copy_from(&r1);
            if p_eq > 0 {
                rhs.rows_mut(n, p_eq).copy_from(&(-&rp));
            }
            rhs
        };
        let recover = |sol: &DVector<f64>, rc: &DVector<f64>| {
            let dx = sol.rows(0, n).into_owned();
            let dy = if p_eq > 0 { sol.rows(n, p_eq).into_owned() } else { DVector::zeros(0) };
            let gdx = &exp.g * &dx;
            let mut dz = DVector::zeros(mt);
            let mut ds = DVector::zeros(mt);
            for i in 0..mt {
                dz[i] = w_diag[i] * (gdx[i] + rg[i]) - rc[i] / s[i];
                ds[i] = -(rc[i] + s[i] * dz[i]) / z[i];
            }
            (dx, dy, dz, ds)
        };
        let step_len = |v: &DVector<f64>, dv: &DVector<f64>| -> f64 {
            let mut a: f64 = 1.0;
            for i in 0..v.len() {
                if dv[i] < 0.0 {
                    a = a.min(-v[i] / dv[i]);
                }
            }
            a
        };

        // Predictor (affine scaling) direction.
        let rc_aff = DVector::from_fn(mt, |i, _| s[i] * z[i]);
        let Some(sol_aff) = solve_kkt(&assemble_rhs(&rc_aff)) else {
            break; // numerical breakdown: settle it through phase-1 below
        };
        let (_dx_a, _dy_a, dz_a, ds_a) = recover(&sol_aff, &rc_aff);
        let ap_aff = step_len(&s, &ds_a);
        let ad_aff = step_len(&z, &dz_a);
        let mu_aff = {
            let mut acc = 0.0;
            for i in 0..mt {
                acc += (s[i] + ap_aff * ds_a[i]) * (z[i] + ad_aff * dz_a[i]);
            }
            acc / mt as f64
        };
        let sigma = {
            let ratio = (mu_aff / mu).clamp(0.0, 1.0);
            ratio * ratio * ratio
        };

        // Corrector with centering.
        let rc = DVector::from_fn(mt, |i, _| s[i] * z[i] + ds_a[i] * dz_a[i] - sigma * mu);
        let Some(sol_cc) = solve_kkt(&assemble_rhs(&rc)) else {
            break;
        };
        let (dx, dy, dz, ds) = recover(&sol_cc, &rc);

        let ap = (FRACTION_TO_BOUNDARY * step_len(&s, &ds)).min(1.0);
        let ad = (FRACTION_TO_BOUNDARY * step_len(&z, &dz)).min(1.0);
        x += &dx * ap;
        s += &ds * ap;
        y += &dy * ad;
        z += &dz * ad;

        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
        // Diverging duals with a stuck primal residual indicate an
        // infeasible problem; stop early and let phase-1 decide.
        if z.amax() > 1e13 * scale_d && rg.amax() > tol * scale_p {
            break;
        }
        for i in 0..mt {
            if s[i] < 1e-300 {
                s[i] = 1e-300;
            }
            if z[i] < 1e-300 {
                z[i] = 1e-300;
            }
        }
    }

    // Ran out of iterations (or stalled). Distinguish a hard problem from an
    // infeasible one with a phase-1 feasibility solve.
    let limited = finish(problem, &exp, x, y, z, s, QpStatus::IterationLimit, iterations);
    if !allow_phase1 {
        return Ok(limited);
    }
    let min_violation = phase1_min_violation(problem, &exp, tol)?;
    if min_violation > 1e-6 * scale_p {
        return Ok(QpSolution { status: QpStatus::PrimalInfeasible, ..limited });
    }
    Ok(limited)
}

/// Minimum total inequality violation subject to the equalities; positive
/// at optimum certifies primal infeasibility.
fn phase1_min_violation(problem: &QpProblem, exp: &Expanded, tol: f64) -> Result<f64, QpError> {
    let n = problem.q.len();
    let mt = exp.g.nrows();
    let nn = n + mt;
    let mut a_in = DMatrix::zeros(mt, nn);
    a_in.view_mut((0, 0), (mt, n)).copy_from(&exp.g);
    for i in 0..mt {
        a_in[(i, n + i)] = -1.0;
    }
    let mut a_eq = DMatrix::zeros(problem.a_eq.nrows(), nn);
    if problem.a_eq.nrows() > 0 {
        a_eq.view_mut((0, 0), (problem.a_eq.nrows(), n)).copy_from(&problem.a_eq);
    }
    let mut q = DVector::zeros(nn);
    for i in 0..mt {
        q[n + i] = 1.0;
    }
    let mut lb = DVector::from_element(nn, f64::NEG_INFINITY);
    let ub = DVector::from_element(nn, f64::INFINITY);
    for i in 0..mt {
        lb[n + i] = 0.0;
    }
    // Large-but-finite box on x keeps the LP bounded in degenerate cases.
    let box_size = 1e6 * (1.0 + exp.h.amax());
    for i in 0..n {
        lb[i] = -box_size;
    }
    let mut ub = ub;
    for i in 0..n {
        ub[i] = box_size;
    }
    let phase1 = QpProblem::new(
        DMatrix::zeros(nn, nn),
        q,
        a_eq,
        problem.b_eq.clone(),
        a_in,
        exp.h.clone(),
        lb,
        ub,
    )?;
    let sol = solve_inner(&phase1, None, tol.max(1e-9), false)?;
    Ok(sol.objective)
}

fn solve_equality_only(problem: &QpProblem, tol: f64) -> Result<QpSolution, QpError> {
    let n = problem.q.len();
    let p_eq = problem.a_eq.nrows();
    let dim = n + p_eq;
    let mut kkt = DMatrix::zeros(dim, dim);
    kkt.view_mut((0, 0), (n, n)).copy_from(&problem.p);
    for i in 0..n {
        kkt[(i, i)] += REG_PRIMAL;
    }
    if p_eq > 0 {
        kkt.view_mut((0, n), (n, p_eq)).copy_from(&problem.a_eq.transpose());
        kkt.view_mut((n, 0), (p_eq, n)).copy_from(&problem.a_eq);
        for i in 0..p_eq {
            kkt[(n + i, n + i)] -= REG_DUAL;
        }
    }
    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, n).copy_from(&(-&problem.q));
    if p_eq > 0 {
        rhs.rows_mut(n, p_eq).copy_from(&problem.b_eq);
    }
    let lu = kkt.lu();
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| QpError::Numerical("singular equality KKT system".into()))?;
    let x = sol.rows(0, n).into_owned();
    let y = if p_eq > 0 { sol.rows(n, p_eq).into_owned() } else { DVector::zeros(0) };

    let rd = (&problem.p * &x + &problem.q + problem.a_eq.tr_mul(&y)).amax();
    let rp = if p_eq > 0 { (&problem.a_eq * &x - &problem.b_eq).amax() } else { 0.0 };
    let status = if rd <= tol.max(1e-7) && rp <= tol.max(1e-7) {
        QpStatus::Optimal
    } else {
        QpStatus::IterationLimit
    };
    Ok(QpSolution {
        objective: problem.objective(&x),
        x,
        eq_mult: y,
        in_mult: DVector::zeros(0),
        lb_mult: DVector::zeros(n),
        ub_mult: DVector::zeros(n),
        status,
        stationarity: rd,
        primal_residual: rp,
        complementarity: 0.0,
        duality_gap: 0.0,
        iterations: 1,
    })
}

fn finish(
    problem: &QpProblem,
    exp: &Expanded,
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    s: DVector<f64>,
    status: QpStatus,
    iterations: usize,
) -> QpSolution {
    let n = problem.q.len();
    let mut in_mult = DVector::zeros(problem.a_in.nrows());
    let mut lb_mult = DVector::zeros(n);
    let mut ub_mult = DVector::zeros(n);
    for (r, o) in exp.origin.iter().enumerate() {
        match *o {
            RowOrigin::Ineq(j) => in_mult[j] = z[r],
            RowOrigin::Lower(i) => lb_mult[i] = z[r],
            RowOrigin::Upper(i) => ub_mult[i] = z[r],
        }
    }
    let rd = &problem.p * &x + &problem.q + problem.a_eq.tr_mul(&y) + exp.g.tr_mul(&z);
    let rp_eq = if problem.a_eq.nrows() > 0 {
        (&problem.a_eq * &x - &problem.b_eq).amax()
    } else {
        0.0
    };
    let gx = &exp.g * &x;
    let mut viol: f64 = 0.0;
    let mut comp: f64 = 0.0;
    for i in 0..exp.g.nrows() {
        viol = viol.max(gx[i] - exp.h[i]);
        comp = comp.max((z[i] * (exp.h[i] - gx[i])).abs());
    }
    QpSolution {
        objective: problem.objective(&x),
        x,
        eq_mult: y,
        in_mult,
        lb_mult,
        ub_mult,
        status,
        stationarity: rd.amax(),
        primal_residual: rp_eq.max(viol),
        complementarity: comp,
        duality_gap: s.dot(&z),
        iterations,
    }
}

/// Solve a QP whose inequality pool is handled lazily.
///
/// Rows of `problem.a_in` form the pool; solving starts from
/// `initial_active` and each round adds every pool row with value above
/// `−threshold` at the current optimum. The returned multiplier vector has
/// zeros for rows never activated, and the final point satisfies the whole
/// pool to solver feasibility tolerance.
pub fn lazy_solve(
    problem: &QpProblem,
    initial_active: &[usize],
    threshold: f64,
    tol: Option<f64>,
) -> Result<(QpSolution, Vec<usize>), QpError> {
    let pool = problem.a_in.nrows();
    let n = problem.q.len();
    let mut active: Vec<usize> = initial_active.to_vec();
    active.sort_unstable();
    active.dedup();
    let mut in_active = vec![false; pool];
    for &r in &active {
        if r >= pool {
            return Err(QpError::Dimension(format!("active row {r} outside pool of {pool}")));
        }
        in_active[r] = true;
    }

    let mut last_x: Option<DVector<f64>> = None;
    for _round in 0..=pool {
        let sub_a = DMatrix::from_fn(active.len(), n, |r, c| problem.a_in[(active[r], c)]);
        let sub_b = DVector::from_iterator(active.len(), active.iter().map(|&r| problem.b_in[r]));
        let sub = QpProblem::new(
            problem.p.clone(),
            problem.q.clone(),
            problem.a_eq.clone(),
            problem.b_eq.clone(),
            sub_a,
            sub_b,
            problem.lb.clone(),
            problem.ub.clone(),
        )?;
        let sol = solve(
            &sub,
            last_x.as_ref().map(|x| WarmStart { x, in_mult: None }),
            tol,
        )?;
        if sol.status == QpStatus::PrimalInfeasible {
            let mut scattered = scatter(sol, &active, pool);
            scattered.status = QpStatus::PrimalInfeasible;
            return Ok((scattered, active));
        }

        let values = &problem.a_in * &sol.x - &problem.b_in;
        let mut added = false;
        for r in 0..pool {
            if !in_active[r] && values[r] > -threshold {
                in_active[r] = true;
                active.push(r);
                added = true;
            }
        }
        if !added {
            let scattered = scatter(sol, &active, pool);
            return Ok((scattered, active));
        }
        active.sort_unstable();
        last_x = Some(sol.x);
    }
    Err(QpError::Numerical("lazy row generation failed to terminate".into()))
}

fn scatter(sol: QpSolution, active: &[usize], pool: usize) -> QpSolution {
    let mut in_mult = DVector::zeros(pool);
    for (k, &r) in active.iter().enumerate() {
        if k < sol.in_mult.len() {
            in_mult[r] = sol.in_mult[k];
        }
    }
    QpSolution { in_mult, ..sol }
}

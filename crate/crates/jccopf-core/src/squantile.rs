//! Kernel-smoothed quantile of a sample vector.
//!
//! The indicator `1(y ≤ 0)` is replaced by the twice continuously
//! differentiable surrogate `Γ_ε` built from the quartic kernel; the smooth
//! `(1−α)`-quantile `Q_ε(z)` of a sample `z ∈ R^N` is then the root of the
//! counting equation `Σ_i Γ_ε(z_i − Q) = N(1−α)`. Because `Σ Γ_ε` is
//! monotone and piecewise polynomial in `Q`, a bracketed Newton iteration
//! with bisection fallback is globally safe and locally quadratic.
//!
//! First and second derivatives of `Q_ε` with respect to `z` follow from
//! implicit differentiation of the root equation; only sample points inside
//! the active window `|z_i − Q| < ε` contribute, so the Hessian is stored as
//! a dense block over that window.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuantileError {
    #[error("smoothing width ε must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("α must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),
    #[error("empty sample")]
    EmptySample,
    #[error("quantile target N(1−α) falls outside (0, N)")]
    TargetOutOfRange,
    #[error("degenerate quantile: no sample point inside the smoothing window; increase ε")]
    Degenerate,
    #[error("symmetric eigendecomposition did not converge")]
    Eigen,
}

/// The smooth indicator `Γ_ε`: 1 below `−ε`, 0 above `ε`, quartic-kernel
/// interpolation in between, C² everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothIndicator {
    eps: f64,
}

impl SmoothIndicator {
    pub fn new(eps: f64) -> Result<Self, QuantileError> {
        if !(eps > 0.0) {
            return Err(QuantileError::InvalidEpsilon(eps));
        }
        Ok(SmoothIndicator { eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `Γ_ε(y)`.
    pub fn eval(&self, y: f64) -> f64 {
        if y <= -self.eps {
            1.0
        } else if y >= self.eps {
            0.0
        } else {
            let u = y / self.eps;
            let u2 = u * u;
            (15.0 / 16.0) * (-0.2 * u2 * u2 * u + (2.0 / 3.0) * u2 * u - u + 8.0 / 15.0)
        }
    }

    /// `(Γ_ε, Γ_ε′, Γ_ε″)` at `y`. Outside `(−ε, ε)` both derivatives are
    /// exactly zero, matching the one-sided limits of the kernel branch.
    pub fn eval_with_derivatives(&self, y: f64) -> (f64, f64, f64) {
        if y <= -self.eps {
            (1.0, 0.0, 0.0)
        } else if y >= self.eps {
            (0.0, 0.0, 0.0)
        } else {
            let e = self.eps;
            let u = y / e;
            let u2 = u * u;
            let gamma = (15.0 / 16.0) * (-0.2 * u2 * u2 * u + (2.0 / 3.0) * u2 * u - u + 8.0 / 15.0);
            let one_minus = 1.0 - u2;
            let d1 = -(15.0 / 16.0) * one_minus * one_minus / e;
            let d2 = (15.0 / 4.0) * u * one_minus / (e * e);
            (gamma, d1, d2)
        }
    }
}

/// Value, gradient and window Hessian of the smooth quantile at a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileEval {
    pub value: f64,
    /// Full-length gradient; zero outside the active window, nonnegative,
    /// sums to one.
    pub grad: DVector<f64>,
    /// Indices with `|z_i − Q| < ε`, the only nonzero Hessian support.
    pub window: Vec<usize>,
    /// Dense Hessian block over `window × window`.
    pub window_hessian: DMatrix<f64>,
}

impl QuantileEval {
    /// Materialize the full N×N Hessian (test/diagnostic use).
    pub fn dense_hessian(&self, n: usize) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(n, n);
        for (wi, &i) in self.window.iter().enumerate() {
            for (wj, &j) in self.window.iter().enumerate() {
                h[(i, j)] = self.window_hessian[(wi, wj)];
            }
        }
        h
    }
}

fn counting_fn(z: &DVector<f64>, ind: &SmoothIndicator, q: f64) -> (f64, f64) {
    let mut g = 0.0;
    let mut dg = 0.0;
    for &zi in z.iter() {
        let (v, d1, _) = ind.eval_with_derivatives(zi - q);
        g += v;
        dg -= d1; // d/dq Γ(z−q) = −Γ′
    }
    (g, dg)
}

/// Root of `Σ Γ_ε(z_i − Q) = N(1−α)`.
///
/// Returns the interval midpoint when the root equation is flat at the
/// target (possible when sample gaps exceed `2ε` and `N(1−α)` is integral).
pub fn solve_quantile(z: &DVector<f64>, eps: f64, alpha: f64) -> Result<f64, QuantileError> {
    let ind = SmoothIndicator::new(eps)?;
    let n = z.len();
    if n == 0 {
        return Err(QuantileError::EmptySample);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(QuantileError::InvalidAlpha(alpha));
    }
    let target = n as f64 * (1.0 - alpha);
    if !(target > 0.0 && target < n as f64) {
        return Err(QuantileError::TargetOutOfRange);
    }

    let zmin = z.min();
    let zmax = z.max();
    let mut lo = zmin - eps; // Σ Γ = 0 here
    let mut hi = zmax + eps; // Σ Γ = N here
    let tol = 1e-10 * n as f64;

    // Start from the matching order statistic.
    let mut sorted: Vec<f64> = z.iter().cloned().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = (crate::fmath::ceil(target) as usize).clamp(1, n);
    let mut q = sorted[k - 1].clamp(lo, hi);

    // Bracketed Newton, run to full convergence of q itself; the loose
    // |Σ Γ − target| criterion alone would stall short of plateau edges.
    for _ in 0..300 {
        let (g, dg) = counting_fn(z, &ind, q);
        if g > target {
            hi = q;
        } else if g < target {
            lo = q;
        } else {
            break; // exact hit; plateau interiors land here
        }
        let newton = if dg > 0.0 { q - (g - target) / dg } else { f64::NAN };
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let scale = 1.0 + q.abs();
        if (next - q).abs() <= 1e-15 * scale {
            q = next;
            break;
        }
        q = next;
        if hi - lo <= 1e-15 * (1.0 + hi.abs() + lo.abs()) {
            break;
        }
    }

    // Flat root interval: when the gap around q exceeds 2ε and the counting
    // function sits exactly at the target there, the level set is the whole
    // interval [z_left + ε, z_right − ε]; report its midpoint.
    let left = z.iter().cloned().filter(|&v| v <= q).fold(f64::NEG_INFINITY, f64::max);
    let right = z.iter().cloned().filter(|&v| v > left).fold(f64::INFINITY, f64::min);
    if left.is_finite() && right.is_finite() && right - left > 2.0 * eps {
        let mid = 0.5 * (left + right);
        if (counting_fn(z, &ind, mid).0 - target).abs() <= tol {
            return Ok(mid);
        }
    }

    // For very small ε the counting function is so steep that one ulp of q
    // moves it by more than the tolerance; the bracket having collapsed to
    // float resolution means the root is as good as representable.
    #[cfg(debug_assertions)]
    {
        let (g, dg) = counting_fn(z, &ind, q);
        let ulp_limit = dg * 4.0 * f64::EPSILON * (1.0 + q.abs());
        let bracket_collapsed = hi - lo <= 1e-12 * (1.0 + q.abs());
        debug_assert!(
            (g - target).abs() <= tol.max(ulp_limit) || bracket_collapsed,
            "quantile root residual {} above tolerance {tol}",
            (g - target).abs()
        );
    }
    Ok(q)
}

/// Smoothed empirical CDF `F_ε^N(t) = (1/N) Σ Γ_ε(z_i − t)`.
pub fn smooth_cdf(z: &DVector<f64>, eps: f64, t: f64) -> Result<f64, QuantileError> {
    let ind = SmoothIndicator::new(eps)?;
    if z.is_empty() {
        return Err(QuantileError::EmptySample);
    }
    Ok(z.iter().map(|&zi| ind.eval(zi - t)).sum::<f64>() / z.len() as f64)
}

/// Gradient and Hessian of `Q_ε` at a previously solved root `q`.
///
/// From the implicit function theorem on the root equation,
/// `(∇Q)_i = Γ′(z_i − Q) / Σ_j Γ′(z_j − Q)`; differentiating once more gives
/// the window Hessian `(diag(t) − t wᵀ − w tᵀ + (Σt) w wᵀ) / D` with
/// `t_i = Γ″(z_i − Q)` and `D = Σ Γ′`.
pub fn quantile_derivatives(
    z: &DVector<f64>,
    eps: f64,
    q: f64,
) -> Result<QuantileEval, QuantileError> {
    let ind = SmoothIndicator::new(eps)?;
    let n = z.len();
    if n == 0 {
        return Err(QuantileError::EmptySample);
    }

    let mut window = Vec::new();
    let mut s = Vec::new(); // Γ′ on the window
    let mut t = Vec::new(); // Γ″ on the window
    let mut denom = 0.0;
    for (i, &zi) in z.iter().enumerate() {
        let (_, d1, d2) = ind.eval_with_derivatives(zi - q);
        if d1 != 0.0 || d2 != 0.0 {
            window.push(i);
            s.push(d1);
            t.push(d2);
            denom += d1;
        }
    }
    if denom == 0.0 {
        return Err(QuantileError::Degenerate);
    }

    let mut grad = DVector::zeros(n);
    let nw = window.len();
    let mut w = DVector::zeros(nw);
    for (wi, &i) in window.iter().enumerate() {
        let wv = s[wi] / denom;
        grad[i] = wv;
        w[wi] = wv;
    }

    let t_sum: f64 = t.iter().sum();
    let mut h = DMatrix::zeros(nw, nw);
    for a in 0..nw {
        for b in 0..nw {
            let mut v = -t[a] * w[b] - w[a] * t[b] + w[a] * w[b] * t_sum;
            if a == b {
                v += t[a];
            }
            h[(a, b)] = v / denom;
        }
    }

    let eval = QuantileEval { value: q, grad, window, window_hessian: h };

    #[cfg(debug_assertions)]
    validate_by_finite_differences(z, eps, &eval);

    Ok(eval)
}

/// Debug-mode cross-check of the implicit gradient against central finite
/// differences of the root solve.
#[cfg(debug_assertions)]
fn validate_by_finite_differences(z: &DVector<f64>, eps: f64, eval: &QuantileEval) {
    let n = z.len();
    let range = z.max() - z.min();
    let h = 1e-6 * (1.0 + range);
    // Recover α from the root equation to re-solve perturbed systems.
    let ind = SmoothIndicator::new(eps).unwrap();
    let target: f64 = z.iter().map(|&zi| ind.eval(zi - eval.value)).sum();
    let alpha = 1.0 - target / n as f64;
    if !(alpha > 1e-12 && alpha < 1.0 - 1e-12) {
        return;
    }
    for &i in eval.window.iter().take(4) {
        let mut zp = z.clone();
        zp[i] += h;
        let mut zm = z.clone();
        zm[i] -= h;
        let (Ok(qp), Ok(qm)) = (solve_quantile(&zp, eps, alpha), solve_quantile(&zm, eps, alpha))
        else {
            return;
        };
        let fd = (qp - qm) / (2.0 * h);
        debug_assert!(
            (fd - eval.grad[i]).abs() <= 1e-4 * (1.0 + fd.abs()),
            "quantile gradient check failed at {i}: fd {fd} vs {}",
            eval.grad[i]
        );
    }
}

/// Nearest positive semidefinite matrix in Frobenius norm: symmetrize,
/// then clamp negative eigenvalues to zero.
pub fn psd_project(h: &DMatrix<f64>) -> Result<DMatrix<f64>, QuantileError> {
    if h.nrows() == 0 {
        return Ok(h.clone());
    }
    let sym = (h + h.transpose()) * 0.5;
    let eig = nalgebra::linalg::SymmetricEigen::try_new(sym, 1e-14, 0)
        .ok_or(QuantileError::Eigen)?;
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        scaled.column_mut(j).scale_mut(lam.max(0.0));
    }
    Ok(scaled * eig.eigenvectors.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn kernel_identities() {
        let ind = SmoothIndicator::new(0.7).unwrap();
        assert_eq!(ind.eval(-0.7), 1.0);
        assert_eq!(ind.eval(0.7), 0.0);
        assert!((ind.eval(0.0) - 0.5).abs() < 1e-16);
        // Γ(ε/2) = 53/512 by direct evaluation of the quartic kernel.
        assert!((ind.eval(0.35) - 0.103515625).abs() < 1e-15);
        // Strictly decreasing inside the window.
        let mut prev = f64::INFINITY;
        for k in 0..=100 {
            let y = -0.7 + 1.4 * k as f64 / 100.0;
            let v = ind.eval(y);
            assert!(v < prev || (k == 0 && v <= 1.0));
            prev = v;
        }
    }

    #[test]
    fn kernel_is_c2_at_the_seams() {
        let eps = 0.3;
        let ind = SmoothIndicator::new(eps).unwrap();
        let h = 1e-7;
        for y in [-eps, eps] {
            let (_, d1, d2) = ind.eval_with_derivatives(y);
            let fd1 = (ind.eval(y + h) - ind.eval(y - h)) / (2.0 * h);
            let fd2 = (ind.eval(y + h) - 2.0 * ind.eval(y) + ind.eval(y - h)) / (h * h);
            assert!((d1 - fd1).abs() < 1e-6);
            assert!((d2 - fd2).abs() < 1e-4);
            assert_eq!(d1, 0.0);
            assert_eq!(d2, 0.0);
        }
    }

    #[test]
    fn constant_sample_at_half_target() {
        let z = DVector::from_element(9, 3.25);
        let q = solve_quantile(&z, 0.5, 0.5).unwrap();
        assert!((q - 3.25).abs() < 1e-12);
    }

    #[test]
    fn two_point_sample_hand_root() {
        // z = (0, 10), ε = 1, α = 0.25: target 1.5 = Γ(−10) + Γ(0) at Q = 10.
        let z = DVector::from_vec(vec![0.0, 10.0]);
        let q = solve_quantile(&z, 1.0, 0.25).unwrap();
        assert!((q - 10.0).abs() < 1e-9, "q = {q}");
    }

    #[test]
    fn flat_interval_returns_midpoint() {
        // Gap of 10 with ε = 1 and integral target: level set is flat.
        let z = DVector::from_vec(vec![0.0, 10.0]);
        let q = solve_quantile(&z, 1.0, 0.5).unwrap();
        assert!((q - 5.0).abs() < 1e-9, "q = {q}");
    }

    #[test]
    fn tiny_eps_recovers_order_statistics() {
        let rng = CounterRng::new(5150);
        let mut ctr = 0u64;
        for n in [10usize, 100, 1000] {
            for rep in 0..5 {
                let z = DVector::from_fn(n, |_, _| {
                    ctr += 1;
                    4.0 * rng.uniform(ctr) - 2.0
                });
                let alpha = 0.05 + 0.4 * rng.uniform(1_000_000 + rep);
                let range = z.max() - z.min();
                let eps = 1e-8 * range;
                let q = solve_quantile(&z, eps, alpha).unwrap();
                let mut sorted: Vec<f64> = z.iter().cloned().collect();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let k = (n as f64 * (1.0 - alpha)).ceil() as usize;
                assert!(
                    (q - sorted[k - 1]).abs() <= 1e-6 * range,
                    "n={n} rep={rep}: {q} vs {}",
                    sorted[k - 1]
                );
            }
        }
    }

    #[test]
    fn consistency_with_smooth_cdf() {
        let rng = CounterRng::new(77);
        let z = DVector::from_fn(40, |i, _| rng.uniform(i as u64) * 3.0);
        for alpha in [0.05, 0.25, 0.5, 0.9] {
            let q = solve_quantile(&z, 0.2, alpha).unwrap();
            let f = smooth_cdf(&z, 0.2, q).unwrap();
            assert!((f - (1.0 - alpha)).abs() <= 1e-10);
        }
    }

    #[test]
    fn smooth_cdf_saturates() {
        let z = DVector::from_vec(vec![0.0, 1.0, 2.0]);
        assert_eq!(smooth_cdf(&z, 0.5, 2.6).unwrap(), 1.0);
        assert_eq!(smooth_cdf(&z, 0.5, -0.6).unwrap(), 0.0);
    }

    #[test]
    fn smooth_cdf_limits_to_empirical_cdf() {
        let z = DVector::from_vec(vec![-1.0, -0.3, 0.2, 0.9, 1.4]);
        let t = 0.5; // no sample point within ε of t
        let f_eps = smooth_cdf(&z, 1e-9, t).unwrap();
        let f_emp = crate::cons::empirical_cdf(&z, t);
        assert_eq!(f_eps, f_emp);
    }

    #[test]
    fn uniform_gradient_for_identical_samples() {
        let n = 8;
        let z = DVector::from_element(n, 1.0);
        let q = solve_quantile(&z, 0.4, 0.5).unwrap();
        let eval = quantile_derivatives(&z, 0.4, q).unwrap();
        for i in 0..n {
            assert!((eval.grad[i] - 1.0 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_is_a_probability_vector_with_window_sparsity() {
        let rng = CounterRng::new(31337);
        let mut checked = 0;
        for rep in 0..20 {
            let z = DVector::from_fn(50, |i, _| rng.uniform((rep * 64 + i) as u64) * 2.0);
            let eps = 0.05;
            let q = solve_quantile(&z, eps, 0.1).unwrap();
            let eval = match quantile_derivatives(&z, eps, q) {
                Ok(e) => e,
                // Sample gap wider than 2ε around the root: legitimately
                // degenerate, nothing to check.
                Err(QuantileError::Degenerate) => continue,
                Err(e) => panic!("{e}"),
            };
            checked += 1;
            assert!((eval.grad.sum() - 1.0).abs() <= 1e-12);
            for i in 0..50 {
                assert!(eval.grad[i] >= 0.0);
                if (z[i] - q).abs() >= eps {
                    assert_eq!(eval.grad[i], 0.0);
                }
            }
        }
        assert!(checked >= 10, "too many degenerate draws: {checked}");
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let rng = CounterRng::new(99);
        let n = 20;
        let alpha = 0.2;
        let eps = 0.25;
        for rep in 0..10u64 {
            let z = DVector::from_fn(n, |i, _| 2.0 * rng.uniform(rep * 64 + i as u64) - 1.0);
            let q = solve_quantile(&z, eps, alpha).unwrap();
            let eval = quantile_derivatives(&z, eps, q).unwrap();
            let range = z.max() - z.min();
            let h = 1e-5 * (1.0 + range);

            // Gradient vs central differences.
            for i in 0..n {
                let mut zp = z.clone();
                zp[i] += h;
                let mut zm = z.clone();
                zm[i] -= h;
                let fd = (solve_quantile(&zp, eps, alpha).unwrap()
                    - solve_quantile(&zm, eps, alpha).unwrap())
                    / (2.0 * h);
                assert!(
                    (fd - eval.grad[i]).abs() <= 1e-6 * (1.0 + q.abs()),
                    "rep {rep} grad[{i}]: fd {fd} vs {}",
                    eval.grad[i]
                );
            }

            // Hessian vs central differences of the gradient.
            let dense = eval.dense_hessian(n);
            for i in 0..n {
                let mut zp = z.clone();
                zp[i] += h;
                let mut zm = z.clone();
                zm[i] -= h;
                let qp = solve_quantile(&zp, eps, alpha).unwrap();
                let qm = solve_quantile(&zm, eps, alpha).unwrap();
                let gp = quantile_derivatives(&zp, eps, qp).unwrap().grad;
                let gm = quantile_derivatives(&zm, eps, qm).unwrap().grad;
                for j in 0..n {
                    let fd = (gp[j] - gm[j]) / (2.0 * h);
                    assert!(
                        (fd - dense[(j, i)]).abs() <= 1e-4 * (1.0 + fd.abs()),
                        "rep {rep} hess[{j},{i}]: fd {fd} vs {}",
                        dense[(j, i)]
                    );
                }
            }
        }
    }

    #[test]
    fn degenerate_window_is_an_error() {
        let z = DVector::from_vec(vec![0.0, 10.0]);
        // Midpoint of the flat interval: nothing within ε of q.
        let q = solve_quantile(&z, 0.5, 0.5).unwrap();
        assert_eq!(quantile_derivatives(&z, 0.5, q), Err(QuantileError::Degenerate));
    }

    #[test]
    fn psd_projection_basics() {
        let id = DMatrix::<f64>::identity(4, 4);
        assert_eq!(psd_project(&id).unwrap(), id);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -2.0]));
        let p = psd_project(&d).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-14);
        assert!(p[(1, 1)].abs() < 1e-14);
    }

    /// Tiny cyclic Jacobi eigensolver, independent of nalgebra, used as the
    /// projection oracle.
    fn jacobi_clamp(mut a: DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let mut v = DMatrix::<f64>::identity(n, n);
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[(p, q)] * a[(p, q)];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[(k, p)], a[(k, q)]);
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut lam = DMatrix::zeros(n, n);
        for i in 0..n {
            lam[(i, i)] = a[(i, i)].max(0.0);
        }
        &v * lam * v.transpose()
    }

    #[test]
    fn psd_projection_matches_independent_oracle() {
        let rng = CounterRng::new(4242);
        for rep in 0..5u64 {
            let raw = DMatrix::from_fn(10, 10, |i, j| rng.uniform(rep * 128 + (i * 10 + j) as u64) - 0.5);
            let sym = (&raw + raw.transpose()) * 0.5;
            let ours = psd_project(&sym).unwrap();
            let oracle = jacobi_clamp(sym.clone());
            assert!((&ours - &oracle).amax() < 1e-9, "rep {rep}");
            // Result is PSD and idempotent on PSD input.
            let eig = nalgebra::linalg::SymmetricEigen::new(ours.clone());
            assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-10));
            let again = psd_project(&ours).unwrap();
            assert!((&again - &ours).amax() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn translation_equivariance(
            raw in proptest::collection::vec(-50.0f64..50.0, 3..40),
            shift in -25.0f64..25.0,
            alpha in 0.02f64..0.98,
        ) {
            let z = DVector::from_vec(raw);
            let eps = 0.3;
            let q0 = solve_quantile(&z, eps, alpha).unwrap();
            let shifted = z.add_scalar(shift);
            let q1 = solve_quantile(&shifted, eps, alpha).unwrap();
            prop_assert!((q1 - (q0 + shift)).abs() <= 1e-12 * (1.0 + q0.abs() + shift.abs()));
        }

        #[test]
        fn monotone_in_each_coordinate(
            raw in proptest::collection::vec(-10.0f64..10.0, 4..24),
            idx in 0usize..24,
            bump in 0.0f64..5.0,
            alpha in 0.05f64..0.95,
        ) {
            let z = DVector::from_vec(raw);
            let i = idx % z.len();
            let eps = 0.4;
            let q0 = solve_quantile(&z, eps, alpha).unwrap();
            let mut zb = z.clone();
            zb[i] += bump;
            let q1 = solve_quantile(&zb, eps, alpha).unwrap();
            prop_assert!(q1 >= q0 - 1e-9 * (1.0 + q0.abs()));
        }
    }
}

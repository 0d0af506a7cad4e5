//! Net-load uncertainty model, scenario sampling, and out-of-sample
//! violation probability.
//!
//! Fluctuations are zero-mean Gaussian with a covariance built so that
//! `Σ_ii = ζ·d_i` on every bus carrying load; buses without load do not
//! fluctuate. Sampling is counter-based (see [`crate::rng`]): a scenario is
//! a pure function of `(Σ, seed, scenario index)`, so block or parallel
//! evaluation cannot change results.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::cons::DispatchPoint;
use crate::net::{GridCase, NetError, PtdfMatrix};
use crate::rng::CounterRng;

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("scale ζ must be nonnegative, got {0}")]
    NegativeScale(f64),
    #[error("correlation seed matrix has zero diagonal at loaded bus {bus}")]
    DegenerateDiagonal { bus: usize },
    #[error("covariance factorization failed")]
    Factorization,
    #[error(transparent)]
    Net(#[from] NetError),
}

/// How the sampling factor `L` (with `L Lᵀ = Σ`) was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorMethod {
    Cholesky,
    /// Cholesky failed; eigen-decomposition with negative eigenvalues
    /// clamped to zero was used instead. Worth surfacing as a warning.
    EigenClamped,
}

/// Gaussian fluctuation model of the net load.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioModel {
    /// Full bus-indexed covariance (zero rows/columns on load-free buses).
    pub sigma: DMatrix<f64>,
    pub zeta: f64,
    pub seed: u64,
    /// Variance of the aggregate fluctuation, `V(Ω) = 1ᵀ Σ 1`.
    pub var_omega: f64,
    /// Buses with nonzero load, the only coordinates that fluctuate.
    active: Vec<usize>,
    /// Lower-triangular-ish factor over the active buses, `L Lᵀ = Σ_act`.
    factor: DMatrix<f64>,
    pub factor_method: FactorMethod,
}

impl ScenarioModel {
    pub fn n_buses(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn active_buses(&self) -> &[usize] {
        &self.active
    }

    /// Factor over active buses only; `ω_act = L z` for standard normal `z`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Fluctuation vector of scenario `s` from the stream with `seed`.
    pub fn draw(&self, seed: u64, s: u64) -> DVector<f64> {
        let k = self.active.len();
        let rng = CounterRng::new(seed);
        let z = DVector::from_fn(k, |j, _| rng.standard_normal(s * k as u64 + j as u64));
        let w_act = &self.factor * z;
        let mut w = DVector::zeros(self.n_buses());
        for (aj, &bus) in self.active.iter().enumerate() {
            w[bus] = w_act[aj];
        }
        w
    }
}

/// Construct the uncertainty model for `case` at scale `ζ`.
///
/// A matrix `A` with entries uniform in [-1, 1] is drawn from `seed`,
/// `Â = A Aᵀ` supplies correlations, and entries are rescaled so that
/// `Σ_ij = ζ · Â_ij / √(Â_ii Â_jj) · √(d_i d_j)`, with `Σ_ij = 0` whenever
/// either bus carries no load. The result is positive semidefinite by
/// construction.
pub fn build_covariance(case: &GridCase, zeta: f64, seed: u64) -> Result<ScenarioModel, SampleError> {
    if zeta < 0.0 {
        return Err(SampleError::NegativeScale(zeta));
    }
    let n = case.n_buses();
    let d = &case.load;

    let rng = CounterRng::new(seed);
    let a = DMatrix::from_fn(n, n, |i, j| rng.uniform_symmetric((i * n + j) as u64));
    let a_hat = &a * a.transpose();

    let active: Vec<usize> = (0..n).filter(|&i| d[i] != 0.0).collect();
    for &i in &active {
        if a_hat[(i, i)] <= 0.0 {
            return Err(SampleError::DegenerateDiagonal { bus: i });
        }
    }

    let mut sigma = DMatrix::zeros(n, n);
    for &i in &active {
        for &j in &active {
            let corr = a_hat[(i, j)] / crate::fmath::sqrt(a_hat[(i, i)] * a_hat[(j, j)]);
            sigma[(i, j)] = zeta * corr * crate::fmath::sqrt(d[i] * d[j]);
        }
    }

    let k = active.len();
    let mut sigma_act = DMatrix::zeros(k, k);
    for (ai, &i) in active.iter().enumerate() {
        for (aj, &j) in active.iter().enumerate() {
            sigma_act[(ai, aj)] = sigma[(i, j)];
        }
    }

    let (factor, factor_method) = match nalgebra::linalg::Cholesky::new(sigma_act.clone()) {
        Some(c) => (c.unpack(), FactorMethod::Cholesky),
        None => {
            // Semidefinite or slightly indefinite from rounding: clamp the
            // spectrum at zero and factor as Q·diag(√λ⁺).
            let eig = nalgebra::linalg::SymmetricEigen::new(sigma_act);
            let mut l = eig.eigenvectors;
            for (j, &lam) in eig.eigenvalues.iter().enumerate() {
                let s = crate::fmath::sqrt(lam.max(0.0));
                l.column_mut(j).scale_mut(s);
            }
            (l, FactorMethod::EigenClamped)
        }
    };

    let ones = DVector::from_element(n, 1.0);
    let var_omega = (&sigma * &ones).dot(&ones);

    Ok(ScenarioModel {
        sigma,
        zeta,
        seed,
        var_omega,
        active,
        factor,
        factor_method,
    })
}

/// A drawn sample of fluctuation vectors with per-scenario aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    /// N×|B| matrix of fluctuation draws, one scenario per row.
    pub w: DMatrix<f64>,
    /// Row sums of `w`: the aggregate imbalance Ω of each scenario.
    pub omega: DVector<f64>,
    pub seed: u64,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.w.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.w.nrows() == 0
    }
}

/// Draw `n` i.i.d. scenarios from `model` using `seed`.
pub fn sample(model: &ScenarioModel, n: usize, seed: u64) -> ScenarioSet {
    let nb = model.n_buses();
    let mut w = DMatrix::zeros(n, nb);
    for s in 0..n {
        let row = model.draw(seed, s as u64);
        w.row_mut(s).copy_from(&row.transpose());
    }
    let omega = DVector::from_fn(n, |s, _| w.row(s).sum());
    ScenarioSet { w, omega, seed }
}

/// Streaming evaluator of the joint-feasibility probability of a fixed
/// dispatch point over a fresh Monte Carlo sample.
///
/// The evaluator checks the full engineering constraint set: both flow
/// bounds on every capacity-limited line and both output bounds on every
/// generator (including non-dispatchable ones). Scenario draws are streamed
/// in blocks, so memory stays `O(block × |B|)`.
pub struct OosEvaluator {
    /// `T` with per-scenario flow noise `Φ ω_s = T z_s`.
    t_noise: DMatrix<f64>,
    /// `wz` with per-scenario aggregate `Ω_s = wzᵀ z_s`.
    wz: DVector<f64>,
    /// Flow sensitivity of limited lines to the dispatch, `Φ_L' · GenMap`.
    fg: DMatrix<f64>,
    /// `Φ_L' · d`.
    flow_load: DVector<f64>,
    fub: DVector<f64>,
    gen_lb: DVector<f64>,
    gen_ub: DVector<f64>,
    n_scenarios: usize,
    seed: u64,
    k: usize,
}

const OOS_BLOCK: usize = 4096;

impl OosEvaluator {
    pub fn new(
        case: &GridCase,
        ptdf: &PtdfMatrix,
        model: &ScenarioModel,
        n_scenarios: usize,
        seed: u64,
    ) -> Self {
        let limited: Vec<usize> = case
            .lines
            .iter()
            .enumerate()
            .filter(|(_, l)| l.in_service && l.limit.is_finite())
            .map(|(i, _)| i)
            .collect();
        let nl = limited.len();
        let nb = case.n_buses();
        let k = model.active_buses().len();

        let mut phi_lim = DMatrix::zeros(nl, nb);
        for (r, &l) in limited.iter().enumerate() {
            phi_lim.row_mut(r).copy_from(&ptdf.phi.row(l));
        }
        let mut phi_act = DMatrix::zeros(nl, k);
        for (c, &bus) in model.active_buses().iter().enumerate() {
            phi_act.column_mut(c).copy_from(&phi_lim.column(bus));
        }
        let t_noise = &phi_act * model.factor();
        let wz = model.factor().transpose() * DVector::from_element(k, 1.0);

        OosEvaluator {
            t_noise,
            wz,
            fg: &phi_lim * &case.gen_map().0,
            flow_load: &phi_lim * &case.load,
            fub: DVector::from_iterator(nl, limited.iter().map(|&l| case.lines[l].limit)),
            gen_lb: DVector::from_iterator(case.n_gens(), case.gens.iter().map(|g| g.lb)),
            gen_ub: DVector::from_iterator(case.n_gens(), case.gens.iter().map(|g| g.ub)),
            n_scenarios,
            seed,
            k,
        }
    }

    /// Fraction of scenarios on which every constraint holds.
    pub fn probability(&self, point: &DispatchPoint) -> f64 {
        let nl = self.fub.len();
        let ng = self.gen_lb.len();

        // Flow value on limited line r is
        //   (fg·g − flow_load)_r − Ω_s (fg·β)_r − (T z_s)_r.
        let flow_nom = &self.fg * &point.g - &self.flow_load;
        let flow_beta = &self.fg * &point.beta;

        // Generator feasibility g_i − β_i Ω ∈ [lb_i, ub_i] is an interval
        // condition on Ω (or a static pass/fail when β_i = 0).
        let mut omega_lo = f64::NEG_INFINITY;
        let mut omega_hi = f64::INFINITY;
        let mut static_violation = false;
        for i in 0..ng {
            let (g, b) = (point.g[i], point.beta[i]);
            let (lo, hi) = (self.gen_lb[i], self.gen_ub[i]);
            if b == 0.0 {
                if g < lo || g > hi {
                    static_violation = true;
                }
            } else {
                // lo ≤ g − bΩ ≤ hi  ⇔  (g−hi)/b ≤ Ω ≤ (g−lo)/b for b > 0.
                let (a1, a2) = ((g - hi) / b, (g - lo) / b);
                let (a1, a2) = if b > 0.0 { (a1, a2) } else { (a2, a1) };
                omega_lo = omega_lo.max(a1);
                omega_hi = omega_hi.min(a2);
            }
        }
        if static_violation {
            return 0.0;
        }

        let rng = CounterRng::new(self.seed);
        let k = self.k;
        let mut feasible: u64 = 0;
        let mut s0 = 0usize;
        let mut z = DMatrix::zeros(OOS_BLOCK, k);
        while s0 < self.n_scenarios {
            let bs = OOS_BLOCK.min(self.n_scenarios - s0);
            for r in 0..bs {
                let s = (s0 + r) as u64;
                for j in 0..k {
                    z[(r, j)] = rng.standard_normal(s * k as u64 + j as u64);
                }
            }
            let zb = z.rows(0, bs);
            let noise = &zb * self.t_noise.transpose(); // bs × nl
            let omega = &zb * &self.wz; // bs × 1
            'scen: for r in 0..bs {
                let om = omega[r];
                if om < omega_lo || om > omega_hi {
                    continue 'scen;
                }
                for l in 0..nl {
                    let f = flow_nom[l] - om * flow_beta[l] - noise[(r, l)];
                    if f > self.fub[l] || f < -self.fub[l] {
                        continue 'scen;
                    }
                }
                feasible += 1;
            }
            s0 += bs;
        }
        feasible as f64 / self.n_scenarios as f64
    }
}

/// Monte Carlo estimate of `P(C(g, β; ω) ≤ 0)` on a fresh sample.
///
/// Convenience wrapper that builds an [`OosEvaluator`]; reuse the evaluator
/// directly when scoring many points against the same sample.
pub fn out_of_sample_probability(
    point: &DispatchPoint,
    case: &GridCase,
    ptdf: &PtdfMatrix,
    model: &ScenarioModel,
    n_oos: usize,
    seed: u64,
) -> f64 {
    OosEvaluator::new(case, ptdf, model, n_oos, seed).probability(point)
}

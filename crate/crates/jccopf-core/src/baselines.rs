//! Deterministic and scenario-approach baselines.
//!
//! The nominal problem dispatches against the forecast (`ω = 0`) with no
//! reserve policy; the scenario approach enforces every engineering limit
//! on each drawn scenario, with the sample size driven by the classical
//! `(2/α)(ln(1/σ) + n)` bound. Both reduce to convex QPs solved by
//! [`crate::qp`]; the scenario approach uses lazy row generation over its
//! `N^SA · m` row pool.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::cons::{ConstraintSystem, DispatchPoint};
use crate::net::{GridCase, NetError, PtdfMatrix};
use crate::qp::{self, QpError, QpStatus};
use crate::stochastic::{sample, ScenarioModel};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("nominal dispatch problem is infeasible")]
    Infeasible,
}

/// Scenario-approach configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaConfig {
    pub alpha: f64,
    /// Confidence parameter σ of the sample-size bound.
    pub sigma: f64,
    /// Sample size; see [`sa_sample_size`] for the default rule.
    pub n_sa: usize,
}

impl SaConfig {
    pub fn new(alpha: f64, n_gens: usize) -> Self {
        let sigma = 1e-4;
        SaConfig { alpha, sigma, n_sa: sa_sample_size(alpha, sigma, n_gens) }
    }
}

/// Smallest integer `N` with `N ≥ (2/α)(ln(1/σ) + 2·n_gens)`.
pub fn sa_sample_size(alpha: f64, sigma: f64, n_gens: usize) -> usize {
    let n = 2.0 * n_gens as f64;
    crate::fmath::ceil((2.0 / alpha) * (crate::fmath::ln(1.0 / sigma) + n)) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct NominalSolution {
    /// Dispatch with zero participation factors.
    pub point: DispatchPoint,
    /// Generation cost in $/h.
    pub objective: f64,
}

/// Minimum-cost dispatch at the forecast: balance, generator boxes, and
/// line limits at `ω = 0`.
pub fn solve_nominal(case: &GridCase, ptdf: &PtdfMatrix) -> Result<NominalSolution, BaselineError> {
    let sys = ConstraintSystem::build(case, ptdf);
    let gf = sys.n_free();
    let nl = sys.limited.len();

    let p = DMatrix::from_fn(gf, gf, |r, c| {
        if r == c {
            case.gens[sys.free[r]].cost_quad
        } else {
            0.0
        }
    });
    let q = DVector::from_iterator(gf, sys.free.iter().map(|&i| case.gens[i].cost_lin));

    let pinned_total: f64 = case.gens.iter().filter(|g| !g.is_dispatchable()).map(|g| g.lb).sum();
    let a_eq = DMatrix::from_element(1, gf, 1.0);
    let b_eq = DVector::from_element(1, case.total_load() - pinned_total);

    // Flow rows ±(fg·g + flow_fixed) ≤ fub.
    let mut a_in = DMatrix::zeros(2 * nl, gf);
    let mut b_in = DVector::zeros(2 * nl);
    for l in 0..nl {
        let flow_fixed = sys.flow_fixed_row(l);
        a_in.row_mut(l).copy_from(&sys.fg.row(l));
        b_in[l] = sys.fub[l] - flow_fixed;
        a_in.row_mut(nl + l).copy_from(&(-sys.fg.row(l)));
        b_in[nl + l] = sys.fub[l] + flow_fixed;
    }

    let problem = qp::QpProblem::new(p, q, a_eq, b_eq, a_in, b_in, sys.glb.clone(), sys.gub.clone())?;
    let sol = qp::solve(&problem, None, None)?;
    if sol.status == QpStatus::PrimalInfeasible {
        return Err(BaselineError::Infeasible);
    }
    let point = DispatchPoint::from_free(case, &sys.free, &sol.x, &DVector::zeros(gf));
    Ok(NominalSolution { objective: case.cost(&point.g), point })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaStatus {
    Feasible,
    /// The sampled constraint set admits no dispatch; a legitimate outcome
    /// of the scenario approach, not an error.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaSolution {
    pub point: DispatchPoint,
    /// Generation cost `cost(g)` (the scenario-approach objective).
    pub objective: f64,
    /// Expected cost including the participation variance term, for
    /// comparability with the chance-constrained solutions.
    pub expected_objective: f64,
    pub status: SaStatus,
    /// Rows of the scenario pool active at termination.
    pub active_rows: usize,
    pub n_sa: usize,
}

/// Violation tolerance of the scenario approach: every sampled row must
/// hold with at most this slack at the returned point.
const SA_ROW_TOL: f64 = 1e-7;

/// Safety box on the decision variables; never active at meaningful
/// solutions, but keeps degenerate directions (cost-free participation
/// shifts) bounded for the solver.
const SA_BOX: f64 = 1e3;

/// Scenario approach: minimize `cost(g)` subject to balance, `Σβ = 1`, and
/// all constraint rows of `n_sa` drawn scenarios.
pub fn solve_sa(
    case: &GridCase,
    ptdf: &PtdfMatrix,
    model: &ScenarioModel,
    n_sa: usize,
    seed: u64,
) -> Result<SaSolution, BaselineError> {
    let sys = ConstraintSystem::build(case, ptdf);
    let gf = sys.n_free();
    let n_var = 2 * gf;
    let m = sys.m();

    let scenarios = sample(model, n_sa, seed);
    let cache = sys.cache(&scenarios);

    // Row pool: c_j(g, β; ω_s) ≤ 0 as a_j·g + Ω_s b_j·β ≤ −c_j(0, 0; ω_s).
    let zero_point =
        DispatchPoint::from_free(case, &sys.free, &DVector::zeros(gf), &DVector::zeros(gf));
    let mut a_pool = DMatrix::zeros(n_sa * m, n_var);
    let mut b_pool = DVector::zeros(n_sa * m);
    for s in 0..n_sa {
        let c0 = sys.eval_c(&zero_point, &cache, s);
        let om = cache.omega[s];
        for j in 0..m {
            let r = s * m + j;
            for k in 0..gf {
                a_pool[(r, k)] = sys.a[(j, k)];
                a_pool[(r, gf + k)] = om * sys.b[(j, k)];
            }
            b_pool[r] = -c0[j];
        }
    }

    let mut p = DMatrix::zeros(n_var, n_var);
    let mut q = DVector::zeros(n_var);
    for (k, &gi) in sys.free.iter().enumerate() {
        p[(k, k)] = case.gens[gi].cost_quad;
        q[k] = case.gens[gi].cost_lin;
    }

    let pinned_total: f64 = case.gens.iter().filter(|g| !g.is_dispatchable()).map(|g| g.lb).sum();
    let mut a_eq = DMatrix::zeros(2, n_var);
    for k in 0..gf {
        a_eq[(0, k)] = 1.0;
        a_eq[(1, gf + k)] = 1.0;
    }
    let b_eq = DVector::from_vec(alloc::vec![case.total_load() - pinned_total, 1.0]);

    let lb = DVector::from_element(n_var, -SA_BOX);
    let ub = DVector::from_element(n_var, SA_BOX);
    let problem = qp::QpProblem::new(p, q, a_eq, b_eq, a_pool, b_pool, lb, ub)?;

    // Seed the active set with rows near-violated at the nominal dispatch
    // with uniform participation.
    let nominal = solve_nominal(case, ptdf)?;
    let (g0, _) = sys.pack(&nominal.point);
    let beta0 = DVector::from_element(gf, 1.0 / gf.max(1) as f64);
    let start = DispatchPoint::from_free(case, &sys.free, &g0, &beta0);
    let mut initial: Vec<usize> = Vec::new();
    for s in 0..n_sa {
        let c = sys.eval_c(&start, &cache, s);
        for j in 0..m {
            if c[j] > -SA_ROW_TOL {
                initial.push(s * m + j);
            }
        }
    }

    let (sol, active) = qp::lazy_solve(&problem, &initial, SA_ROW_TOL, None)?;
    let status = match sol.status {
        QpStatus::PrimalInfeasible => SaStatus::Infeasible,
        _ => SaStatus::Feasible,
    };
    let g_f = sol.x.rows(0, gf).into_owned();
    let b_f = sol.x.rows(gf, gf).into_owned();
    let point = DispatchPoint::from_free(case, &sys.free, &g_f, &b_f);
    let objective = case.cost(&point.g);
    let var_beta = {
        let m_diag = case.cost_quad_diag();
        0.5 * model.var_omega
            * point.beta.iter().zip(m_diag.iter()).map(|(b, m)| m * b * b).sum::<f64>()
    };
    Ok(SaSolution {
        point,
        objective,
        expected_objective: objective + var_beta,
        status,
        active_rows: active.len(),
        n_sa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{build_ptdf, Generator, Line};
    use crate::stochastic::build_covariance;
    use alloc::vec;

    fn two_gen_case() -> GridCase {
        GridCase {
            bus_ids: vec![1, 2, 3],
            lines: vec![
                Line { from: 0, to: 1, reactance: 1.0, limit: 5.0, in_service: true },
                Line { from: 1, to: 2, reactance: 1.0, limit: 5.0, in_service: true },
                Line { from: 0, to: 2, reactance: 1.0, limit: 5.0, in_service: true },
            ],
            gens: vec![
                Generator { bus: 0, lb: 0.0, ub: 4.0, cost_quad: 0.0, cost_lin: 10.0, cost_const: 0.0 },
                Generator { bus: 2, lb: 0.0, ub: 4.0, cost_quad: 0.0, cost_lin: 25.0, cost_const: 0.0 },
            ],
            load: DVector::from_vec(vec![0.0, 1.5, 0.5]),
            base_mva: 100.0,
            slack: 0,
        }
    }

    #[test]
    fn single_generator_serves_the_load() {
        let mut case = two_gen_case();
        case.gens.truncate(1);
        case.gens[0].ub = 10.0;
        let ptdf = build_ptdf(&case, 0).unwrap();
        let sol = solve_nominal(&case, &ptdf).unwrap();
        assert!((sol.point.g[0] - 2.0).abs() < 1e-7);
        assert!((sol.objective - 20.0).abs() < 1e-6);
        assert_eq!(sol.point.beta.amax(), 0.0);
    }

    #[test]
    fn cheap_generator_dispatches_first() {
        let case = two_gen_case();
        let ptdf = build_ptdf(&case, 0).unwrap();
        let sol = solve_nominal(&case, &ptdf).unwrap();
        assert!((sol.point.g[0] - 2.0).abs() < 1e-6, "{}", sol.point.g[0]);
        assert!(sol.point.g[1].abs() < 1e-6);
        assert!((sol.objective - 20.0).abs() < 1e-5);
    }

    #[test]
    fn line_limit_forces_expensive_generation() {
        let mut case = two_gen_case();
        // Load sits across the ring from the cheap unit; tight limits make
        // the transfer infeasible without local (expensive) support.
        for l in &mut case.lines {
            l.limit = 0.4;
        }
        let ptdf = build_ptdf(&case, 0).unwrap();
        let sol = solve_nominal(&case, &ptdf).unwrap();
        assert!(sol.point.g[1] > 0.1, "expensive unit must run: {}", sol.point.g[1]);
        assert!(sol.objective > 20.0 + 1e-3);
    }

    #[test]
    fn sample_size_formula() {
        assert_eq!(sa_sample_size(0.05, 1e-4, 5), 769);
        assert_eq!(sa_sample_size(0.05, 1e-4, 1), 449);
        // Halving when α doubles, up to rounding.
        let n1 = sa_sample_size(0.05, 1e-4, 3);
        let n2 = sa_sample_size(0.10, 1e-4, 3);
        assert!((n1 as f64 / 2.0 - n2 as f64).abs() <= 1.0);
    }

    #[test]
    fn sa_with_zero_covariance_matches_nominal() {
        let case = two_gen_case();
        let ptdf = build_ptdf(&case, 0).unwrap();
        let model = build_covariance(&case, 0.0, 7).unwrap();
        let nominal = solve_nominal(&case, &ptdf).unwrap();
        for n_sa in [1usize, 8] {
            let sa = solve_sa(&case, &ptdf, &model, n_sa, 3).unwrap();
            assert_eq!(sa.status, SaStatus::Feasible);
            assert!(
                (sa.objective - nominal.objective).abs() <= 1e-5 * (1.0 + nominal.objective),
                "n_sa={n_sa}: {} vs {}",
                sa.objective,
                nominal.objective
            );
            assert!((sa.point.beta.sum() - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn sa_satisfies_every_sampled_scenario() {
        let case = two_gen_case();
        let ptdf = build_ptdf(&case, 0).unwrap();
        let model = build_covariance(&case, 0.05, 11).unwrap();
        let sa = solve_sa(&case, &ptdf, &model, 60, 5).unwrap();
        assert_eq!(sa.status, SaStatus::Feasible);
        let sys = ConstraintSystem::build(&case, &ptdf);
        let scen = sample(&model, 60, 5);
        let cache = sys.cache(&scen);
        let cn = sys.eval_cn(&sa.point, &cache);
        assert!(cn.values.max() <= SA_ROW_TOL, "max violation {}", cn.values.max());
    }

    #[test]
    fn sa_is_costlier_than_nominal_under_uncertainty() {
        let case = two_gen_case();
        let ptdf = build_ptdf(&case, 0).unwrap();
        let model = build_covariance(&case, 0.05, 11).unwrap();
        let nominal = solve_nominal(&case, &ptdf).unwrap();
        let sa = solve_sa(&case, &ptdf, &model, 60, 5).unwrap();
        assert!(sa.objective >= nominal.objective - 1e-9);
    }
}

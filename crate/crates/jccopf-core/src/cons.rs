//! The joint constraint vector `c(g, β; ω)` and its scenario-wise maximum.
//!
//! Constraint rows are ordered `[upper flows; lower flows; upper gen;
//! lower gen]` over capacity-limited lines and dispatchable generators.
//! Every row is affine in the decision `(g, β)` with a factored gradient:
//! `∇ c_j(·; ω_s) = (a_j, Ω_s · b_j)`, so per-scenario gradients are never
//! materialized; only the two `m × |G'|` coefficient blocks are stored.
//!
//! Generators pinned by their data (`lb == ub`) are fixed at that output
//! with zero participation. Their constraint rows are then identically zero
//! and are excluded from the row set; the out-of-sample evaluator in
//! [`crate::stochastic`] still checks every generator.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::net::{GridCase, PtdfMatrix};
use crate::stochastic::ScenarioSet;

/// Decision vector: generator outputs and participation factors, both
/// indexed over all generators of the case.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchPoint {
    pub g: DVector<f64>,
    pub beta: DVector<f64>,
}

impl DispatchPoint {
    /// Assemble a full-size point from values on the dispatchable subset;
    /// pinned generators sit at their fixed output with zero participation.
    pub fn from_free(case: &GridCase, free: &[usize], g_f: &DVector<f64>, b_f: &DVector<f64>) -> Self {
        let ng = case.n_gens();
        let mut g = DVector::from_iterator(ng, case.gens.iter().map(|gen| gen.lb));
        let mut beta = DVector::zeros(ng);
        for (fi, &gi) in free.iter().enumerate() {
            g[gi] = g_f[fi];
            beta[gi] = b_f[fi];
        }
        DispatchPoint { g, beta }
    }
}

/// Per-scenario max of the constraint vector with argmax bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioMaxVector {
    pub values: DVector<f64>,
    /// Row index attaining the maximum (first encountered on ties).
    pub argmax: Vec<usize>,
    /// Number of scenarios where the maximum was attained by several rows.
    pub ties: usize,
}

/// Cache of scenario-dependent constants for one `(system, sample)` pair:
/// the aggregate imbalances and the flow noise `Φ_L' ω_s`.
#[derive(Debug, Clone)]
pub struct ScenarioCache {
    pub omega: DVector<f64>,
    /// N × |L'|.
    pub flow_noise: DMatrix<f64>,
}

/// Precomputed affine structure of the constraint rows.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    /// In-service line indices with a finite flow limit.
    pub limited: Vec<usize>,
    /// Dispatchable generator indices; these are the gradient coordinates.
    pub free: Vec<usize>,
    /// Free-generator positions with a finite upper (resp. lower) bound;
    /// only those get constraint rows.
    pub gen_upper: Vec<usize>,
    pub gen_lower: Vec<usize>,
    /// |L'| × |B| PTDF rows of the limited lines.
    phi_lim: DMatrix<f64>,
    /// |L'| × |G'| flow sensitivity to dispatchable generator outputs.
    pub fg: DMatrix<f64>,
    /// |L'| constant flow from pinned generation minus load.
    flow_fixed: DVector<f64>,
    pub fub: DVector<f64>,
    pub glb: DVector<f64>,
    pub gub: DVector<f64>,
    /// m × |G'| gradient blocks: row j of (a, b) gives ∇c_j = (a_j, Ω·b_j).
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl ConstraintSystem {
    /// Number of constraint rows.
    pub fn m(&self) -> usize {
        2 * self.limited.len() + self.gen_upper.len() + self.gen_lower.len()
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Constant flow contribution (pinned generation minus load) on the
    /// `l`-th limited line.
    pub fn flow_fixed_row(&self, l: usize) -> f64 {
        self.flow_fixed[l]
    }

    pub fn build(case: &GridCase, ptdf: &PtdfMatrix) -> Self {
        let nb = case.n_buses();
        let limited: Vec<usize> = case
            .lines
            .iter()
            .enumerate()
            .filter(|(_, l)| l.in_service && l.limit.is_finite())
            .map(|(i, _)| i)
            .collect();
        let free = case.dispatchable();
        let nl = limited.len();
        let gf = free.len();

        let mut phi_lim = DMatrix::zeros(nl, nb);
        for (r, &l) in limited.iter().enumerate() {
            phi_lim.row_mut(r).copy_from(&ptdf.phi.row(l));
        }

        let mut fg = DMatrix::zeros(nl, gf);
        for (c, &gi) in free.iter().enumerate() {
            fg.column_mut(c).copy_from(&phi_lim.column(case.gens[gi].bus));
        }

        // Pinned generators inject their fixed output.
        let mut pinned_inj = DVector::zeros(nb);
        for g in case.gens.iter().filter(|g| !g.is_dispatchable()) {
            pinned_inj[g.bus] += g.lb;
        }
        let flow_fixed = &phi_lim * (pinned_inj - &case.load);

        let fub = DVector::from_iterator(nl, limited.iter().map(|&l| case.lines[l].limit));
        let glb = DVector::from_iterator(gf, free.iter().map(|&i| case.gens[i].lb));
        let gub = DVector::from_iterator(gf, free.iter().map(|&i| case.gens[i].ub));
        let gen_upper: Vec<usize> = (0..gf).filter(|&k| gub[k].is_finite()).collect();
        let gen_lower: Vec<usize> = (0..gf).filter(|&k| glb[k].is_finite()).collect();

        let m = 2 * nl + gen_upper.len() + gen_lower.len();
        let mut a = DMatrix::zeros(m, gf);
        let mut b = DMatrix::zeros(m, gf);
        for r in 0..nl {
            a.row_mut(r).copy_from(&fg.row(r));
            b.row_mut(r).copy_from(&(-fg.row(r)));
            a.row_mut(nl + r).copy_from(&(-fg.row(r)));
            b.row_mut(nl + r).copy_from(&fg.row(r));
        }
        for (r, &k) in gen_upper.iter().enumerate() {
            a[(2 * nl + r, k)] = 1.0;
            b[(2 * nl + r, k)] = -1.0;
        }
        for (r, &k) in gen_lower.iter().enumerate() {
            a[(2 * nl + gen_upper.len() + r, k)] = -1.0;
            b[(2 * nl + gen_upper.len() + r, k)] = 1.0;
        }

        ConstraintSystem {
            limited,
            free,
            gen_upper,
            gen_lower,
            phi_lim,
            fg,
            flow_fixed,
            fub,
            glb,
            gub,
            a,
            b,
        }
    }

    /// Restrict a full dispatch point to the free coordinates.
    pub fn pack(&self, point: &DispatchPoint) -> (DVector<f64>, DVector<f64>) {
        let gf = self.free.len();
        (
            DVector::from_iterator(gf, self.free.iter().map(|&i| point.g[i])),
            DVector::from_iterator(gf, self.free.iter().map(|&i| point.beta[i])),
        )
    }

    /// Scenario-dependent constants for a drawn sample.
    pub fn cache(&self, set: &ScenarioSet) -> ScenarioCache {
        ScenarioCache {
            omega: set.omega.clone(),
            flow_noise: &set.w * self.phi_lim.transpose(),
        }
    }

    /// Constraint vector for one scenario.
    pub fn eval_c(&self, point: &DispatchPoint, cache: &ScenarioCache, s: usize) -> DVector<f64> {
        let (g_f, b_f) = self.pack(point);
        let flow_g = &self.fg * &g_f + &self.flow_fixed;
        let flow_b = &self.fg * &b_f;
        self.eval_c_pre(&g_f, &b_f, &flow_g, &flow_b, cache, s)
    }

    fn eval_c_pre(
        &self,
        g_f: &DVector<f64>,
        b_f: &DVector<f64>,
        flow_g: &DVector<f64>,
        flow_b: &DVector<f64>,
        cache: &ScenarioCache,
        s: usize,
    ) -> DVector<f64> {
        let nl = self.limited.len();
        let om = cache.omega[s];
        let mut c = DVector::zeros(self.m());
        for l in 0..nl {
            let flow = flow_g[l] - om * flow_b[l] - cache.flow_noise[(s, l)];
            c[l] = flow - self.fub[l];
            c[nl + l] = -flow - self.fub[l];
        }
        for (r, &k) in self.gen_upper.iter().enumerate() {
            c[2 * nl + r] = g_f[k] - b_f[k] * om - self.gub[k];
        }
        for (r, &k) in self.gen_lower.iter().enumerate() {
            c[2 * nl + self.gen_upper.len() + r] = self.glb[k] - (g_f[k] - b_f[k] * om);
        }
        c
    }

    /// Per-scenario maximum of the constraint vector over a whole sample.
    pub fn eval_cn(&self, point: &DispatchPoint, cache: &ScenarioCache) -> ScenarioMaxVector {
        let n = cache.omega.len();
        let (g_f, b_f) = self.pack(point);
        let flow_g = &self.fg * &g_f + &self.flow_fixed;
        let flow_b = &self.fg * &b_f;
        let mut values = DVector::zeros(n);
        let mut argmax = Vec::with_capacity(n);
        let mut ties = 0usize;
        for s in 0..n {
            let c = self.eval_c_pre(&g_f, &b_f, &flow_g, &flow_b, cache, s);
            let mut best = c[0];
            let mut arg = 0usize;
            let mut tied = false;
            for j in 1..c.len() {
                if c[j] > best {
                    best = c[j];
                    arg = j;
                    tied = false;
                } else if c[j] == best {
                    tied = true;
                }
            }
            if tied {
                ties += 1;
            }
            values[s] = best;
            argmax.push(arg);
        }
        ScenarioMaxVector { values, argmax, ties }
    }

    /// Gradient of row `j` for a scenario with aggregate imbalance `omega`,
    /// returned as the stacked `(∂/∂g, ∂/∂β)` vector over free coordinates.
    pub fn row_gradient(&self, j: usize, omega: f64) -> DVector<f64> {
        let gf = self.free.len();
        let mut grad = DVector::zeros(2 * gf);
        for k in 0..gf {
            grad[k] = self.a[(j, k)];
            grad[gf + k] = omega * self.b[(j, k)];
        }
        grad
    }

    /// Row of the linearization `c_j(x) + a_jᵀ δ_g + Ω b_jᵀ δ_β` split as
    /// `(a_j, Ω·b_j)` row views for QP assembly.
    pub fn row_coeffs(&self, j: usize) -> (RowDVector<f64>, RowDVector<f64>) {
        (self.a.row(j).into_owned().into(), self.b.row(j).into_owned().into())
    }
}

/// Deterministic and probabilistic residuals `(Σg − Σd, Σβ − 1, [q]⁺)`.
pub fn violation_vector(case: &GridCase, point: &DispatchPoint, q: f64) -> [f64; 3] {
    [
        point.g.sum() - case.total_load(),
        point.beta.sum() - 1.0,
        q.max(0.0),
    ]
}

/// Empirical CDF `(1/N) Σ 1(value_i ≤ t)`; the comparison is inclusive.
pub fn empirical_cdf(values: &DVector<f64>, t: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| v <= t).count() as f64 / values.len() as f64
}

//! Network case model and the DC-PTDF matrix.
//!
//! A [`GridCase`] is an immutable description of buses, lines, generators
//! and forecast loads, all in per-unit on the case base power. The DC power
//! flow is represented through a dense matrix of power transfer distribution
//! factors ([`PtdfMatrix`]): for any balanced injection vector `p`, line
//! flows are `f = Φ p`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("in-service line {index} has zero reactance")]
    ZeroReactance { index: usize },
    #[error("generator {index} has lower bound above upper bound")]
    GenBounds { index: usize },
    #[error("generator {index} has a negative quadratic cost coefficient")]
    NegativeQuadCost { index: usize },
    #[error("network is disconnected: {islands} islands over in-service lines")]
    Disconnected { islands: usize },
    #[error("slack bus index {index} out of range")]
    InvalidSlack { index: usize },
    #[error("reduced Laplacian is numerically singular (condition estimate {cond:.3e})")]
    SingularLaplacian { cond: f64 },
    #[error("{0}")]
    Invalid(String),
}

/// One transmission line (or transformer branch) of the DC model.
///
/// `reactance` is the effective series reactance of the DC approximation;
/// off-nominal transformer turns ratios are already folded into it. `limit`
/// is the thermal flow bound `f^UB` in per-unit; `f64::INFINITY` marks an
/// unlimited line.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub reactance: f64,
    pub limit: f64,
    pub in_service: bool,
}

/// One generator with box limits and quadratic cost `½ M g² + v g + k0`
/// (`g` in per-unit, cost in $/h).
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub bus: usize,
    pub lb: f64,
    pub ub: f64,
    pub cost_quad: f64,
    pub cost_lin: f64,
    pub cost_const: f64,
}

impl Generator {
    /// A generator pinned at a single output level (`lb == ub`) cannot
    /// respond to imbalances; it is excluded from the dispatch decision.
    pub fn is_dispatchable(&self) -> bool {
        self.ub > self.lb
    }
}

/// Immutable network description. Construct directly or through the
/// MATPOWER parser in the companion crate, then call [`GridCase::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridCase {
    /// Original bus ids in model order; position is the internal bus index.
    pub bus_ids: Vec<u64>,
    pub lines: Vec<Line>,
    pub gens: Vec<Generator>,
    /// Forecast load per bus, per-unit.
    pub load: DVector<f64>,
    pub base_mva: f64,
    /// Reference (slack) bus index.
    pub slack: usize,
}

impl GridCase {
    pub fn n_buses(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn n_gens(&self) -> usize {
        self.gens.len()
    }

    pub fn total_load(&self) -> f64 {
        self.load.sum()
    }

    /// Indices of dispatchable generators (`lb < ub`).
    pub fn dispatchable(&self) -> Vec<usize> {
        self.gens
            .iter()
            .enumerate()
            .filter(|(_, g)| g.is_dispatchable())
            .map(|(i, _)| i)
            .collect()
    }

    /// Diagonal of the quadratic cost matrix `M`, generator-indexed.
    pub fn cost_quad_diag(&self) -> DVector<f64> {
        DVector::from_iterator(self.gens.len(), self.gens.iter().map(|g| g.cost_quad))
    }

    /// Linear cost coefficients `v`, generator-indexed.
    pub fn cost_lin(&self) -> DVector<f64> {
        DVector::from_iterator(self.gens.len(), self.gens.iter().map(|g| g.cost_lin))
    }

    /// Sum of constant cost terms `k0`.
    pub fn cost_const(&self) -> f64 {
        self.gens.iter().map(|g| g.cost_const).sum()
    }

    /// Generation cost `Σ_i ½ M_ii g_i² + v_i g_i + k0_i` in $/h.
    pub fn cost(&self, g: &DVector<f64>) -> f64 {
        self.gens
            .iter()
            .zip(g.iter())
            .map(|(gen, &gi)| 0.5 * gen.cost_quad * gi * gi + gen.cost_lin * gi + gen.cost_const)
            .sum()
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let n = self.n_buses();
        if self.load.len() != n {
            return Err(NetError::Dimension {
                expected: n,
                got: self.load.len(),
            });
        }
        if self.slack >= n {
            return Err(NetError::InvalidSlack { index: self.slack });
        }
        for (i, l) in self.lines.iter().enumerate() {
            if l.from >= n || l.to >= n {
                return Err(NetError::Invalid(format!("line {i} references unknown bus")));
            }
            if l.in_service && l.reactance == 0.0 {
                return Err(NetError::ZeroReactance { index: i });
            }
        }
        for (i, g) in self.gens.iter().enumerate() {
            if g.bus >= n {
                return Err(NetError::Invalid(format!("generator {i} references unknown bus")));
            }
            if g.lb > g.ub {
                return Err(NetError::GenBounds { index: i });
            }
            if g.cost_quad < 0.0 {
                return Err(NetError::NegativeQuadCost { index: i });
            }
        }
        let islands = self.count_islands();
        if islands != 1 {
            return Err(NetError::Disconnected { islands });
        }
        Ok(())
    }

    fn count_islands(&self) -> usize {
        let n = self.n_buses();
        if n == 0 {
            return 0;
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for l in self.lines.iter().filter(|l| l.in_service) {
            let (a, b) = (find(&mut parent, l.from), find(&mut parent, l.to));
            if a != b {
                parent[a] = b;
            }
        }
        (0..n).filter(|&i| find(&mut parent, i) == i).count()
    }

    /// Bus-incidence map from generator-indexed vectors to bus injections.
    pub fn gen_map(&self) -> GenMap {
        let mut m = DMatrix::zeros(self.n_buses(), self.n_gens());
        for (j, g) in self.gens.iter().enumerate() {
            m[(g.bus, j)] = 1.0;
        }
        GenMap(m)
    }
}

/// Bus-incidence matrix with exactly one unit entry per generator column.
#[derive(Debug, Clone, PartialEq)]
pub struct GenMap(pub DMatrix<f64>);

impl GenMap {
    /// Bus injection vector for a generator dispatch `g`.
    pub fn inject(&self, g: &DVector<f64>) -> DVector<f64> {
        &self.0 * g
    }
}

/// Dense DC power transfer distribution factors with their slack bus.
///
/// Row `l` maps bus injections to the flow on line `l`; the slack column is
/// identically zero, and for balanced injections (entries summing to zero)
/// the product is independent of the slack choice.
#[derive(Debug, Clone, PartialEq)]
pub struct PtdfMatrix {
    pub phi: DMatrix<f64>,
    pub slack: usize,
}

impl PtdfMatrix {
    /// Flows on all lines for the injection vector `p`.
    pub fn flows(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.phi * p
    }
}

/// Build the dense PTDF matrix for `case` with the given slack bus.
///
/// Out-of-service lines get zero rows. Fails if the in-service network is
/// disconnected or the reduced Laplacian cannot be factored.
pub fn build_ptdf(case: &GridCase, slack: usize) -> Result<PtdfMatrix, NetError> {
    let n = case.n_buses();
    if slack >= n {
        return Err(NetError::InvalidSlack { index: slack });
    }
    let islands = case.count_islands();
    if islands != 1 {
        return Err(NetError::Disconnected { islands });
    }

    let mut lap: DMatrix<f64> = DMatrix::zeros(n, n);
    for (i, l) in case.lines.iter().enumerate() {
        if !l.in_service {
            continue;
        }
        if l.reactance == 0.0 {
            return Err(NetError::ZeroReactance { index: i });
        }
        let b = 1.0 / l.reactance;
        lap[(l.from, l.from)] += b;
        lap[(l.to, l.to)] += b;
        lap[(l.from, l.to)] -= b;
        lap[(l.to, l.from)] -= b;
    }

    // Reduced Laplacian: drop the slack row and column.
    let keep: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let mut reduced = DMatrix::zeros(n - 1, n - 1);
    for (ri, &i) in keep.iter().enumerate() {
        for (rj, &j) in keep.iter().enumerate() {
            reduced[(ri, rj)] = lap[(i, j)];
        }
    }

    let chol = match nalgebra::linalg::Cholesky::new(reduced.clone()) {
        Some(c) => c,
        None => {
            let eig = nalgebra::linalg::SymmetricEigen::new(reduced);
            let max = eig.eigenvalues.amax();
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            return Err(NetError::SingularLaplacian {
                cond: if min > 0.0 { max / min } else { f64::INFINITY },
            });
        }
    };
    let inv = chol.inverse();

    // Scatter the inverse back into an n×n matrix with zero slack row/col,
    // then each PTDF row is b_l (X[from,·] − X[to,·]).
    let mut x_full = DMatrix::zeros(n, n);
    for (ri, &i) in keep.iter().enumerate() {
        for (rj, &j) in keep.iter().enumerate() {
            x_full[(i, j)] = inv[(ri, rj)];
        }
    }

    let mut phi = DMatrix::zeros(case.n_lines(), n);
    for (li, l) in case.lines.iter().enumerate() {
        if !l.in_service {
            continue;
        }
        let b = 1.0 / l.reactance;
        for j in 0..n {
            phi[(li, j)] = b * (x_full[(l.from, j)] - x_full[(l.to, j)]);
        }
    }

    Ok(PtdfMatrix { phi, slack })
}

/// Bus injection `GenMap·g − d` at the forecast operating point.
pub fn nominal_injection(case: &GridCase, g: &DVector<f64>) -> Result<DVector<f64>, NetError> {
    if g.len() != case.n_gens() {
        return Err(NetError::Dimension {
            expected: case.n_gens(),
            got: g.len(),
        });
    }
    Ok(case.gen_map().inject(g) - &case.load)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Three buses in a ring, unit reactances, no loads.
    pub(crate) fn ring3() -> GridCase {
        GridCase {
            bus_ids: vec![1, 2, 3],
            lines: vec![
                Line { from: 0, to: 1, reactance: 1.0, limit: f64::INFINITY, in_service: true },
                Line { from: 1, to: 2, reactance: 1.0, limit: f64::INFINITY, in_service: true },
                Line { from: 0, to: 2, reactance: 1.0, limit: f64::INFINITY, in_service: true },
            ],
            gens: vec![
                Generator { bus: 0, lb: 0.0, ub: 10.0, cost_quad: 1.0, cost_lin: 1.0, cost_const: 0.0 },
                Generator { bus: 2, lb: 0.0, ub: 10.0, cost_quad: 2.0, cost_lin: 1.0, cost_const: 0.0 },
            ],
            load: DVector::zeros(3),
            base_mva: 100.0,
            slack: 0,
        }
    }

    /// Angle-based DC flow solve, used as an independent oracle for Φ.
    fn dc_flows_by_angles(case: &GridCase, slack: usize, p: &DVector<f64>) -> DVector<f64> {
        let n = case.n_buses();
        let keep: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
        let mut lap: DMatrix<f64> = DMatrix::zeros(n - 1, n - 1);
        for l in case.lines.iter().filter(|l| l.in_service) {
            let b = 1.0 / l.reactance;
            let fi = keep.iter().position(|&k| k == l.from);
            let ti = keep.iter().position(|&k| k == l.to);
            if let Some(fi) = fi {
                lap[(fi, fi)] += b;
            }
            if let Some(ti) = ti {
                lap[(ti, ti)] += b;
            }
            if let (Some(fi), Some(ti)) = (fi, ti) {
                lap[(fi, ti)] -= b;
                lap[(ti, fi)] -= b;
            }
        }
        let rhs = DVector::from_iterator(n - 1, keep.iter().map(|&i| p[i]));
        let theta_r = lap.lu().solve(&rhs).expect("oracle solve");
        let mut theta = DVector::zeros(n);
        for (ri, &i) in keep.iter().enumerate() {
            theta[i] = theta_r[ri];
        }
        DVector::from_iterator(
            case.n_lines(),
            case.lines.iter().map(|l| {
                if l.in_service {
                    (theta[l.from] - theta[l.to]) / l.reactance
                } else {
                    0.0
                }
            }),
        )
    }

    #[test]
    fn ring_flows_split_two_thirds_one_third() {
        let case = ring3();
        let ptdf = build_ptdf(&case, 2).unwrap();
        let p = DVector::from_vec(vec![1.0, 0.0, -1.0]);
        let f = ptdf.flows(&p);
        // Hand solve of the 2×2 reduced Laplacian [[2,-1],[-1,2]] θ = (1,0):
        // θ = (2/3, 1/3), so f12 = 1/3, f23 = 1/3, f13 = 2/3.
        assert!((f[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((f[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((f[2] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_injection_gives_zero_flows() {
        let case = ring3();
        let ptdf = build_ptdf(&case, 0).unwrap();
        let f = ptdf.flows(&DVector::zeros(3));
        assert_eq!(f.amax(), 0.0);
    }

    #[test]
    fn slack_choice_is_irrelevant_for_balanced_injections() {
        let case = ring3();
        let p = DVector::from_vec(vec![1.0, 0.0, -1.0]);
        let f2 = build_ptdf(&case, 1).unwrap().flows(&p);
        let f3 = build_ptdf(&case, 2).unwrap().flows(&p);
        assert!((&f2 - &f3).amax() <= 1e-9);
    }

    #[test]
    fn slack_column_is_zero() {
        let case = ring3();
        for slack in 0..3 {
            let ptdf = build_ptdf(&case, slack).unwrap();
            for l in 0..3 {
                assert_eq!(ptdf.phi[(l, slack)], 0.0);
            }
        }
    }

    #[test]
    fn ptdf_matches_angle_oracle_on_random_networks() {
        // Random connected graphs with random reactances and balanced
        // injections, flows compared against the direct angle solve.
        let rng = crate::rng::CounterRng::new(991);
        let mut ctr = 0u64;
        let mut draw = || {
            ctr += 1;
            rng.uniform(ctr)
        };
        for trial in 0..20 {
            let n = 3 + (trial % 6);
            let mut lines = Vec::new();
            // Spanning path keeps the graph connected, extra random chords.
            for i in 1..n {
                lines.push(Line {
                    from: i - 1,
                    to: i,
                    reactance: 0.05 + draw(),
                    limit: f64::INFINITY,
                    in_service: true,
                });
            }
            for _ in 0..n {
                let a = (draw() * n as f64) as usize % n;
                let b = (draw() * n as f64) as usize % n;
                if a != b {
                    lines.push(Line {
                        from: a,
                        to: b,
                        reactance: 0.05 + draw(),
                        limit: f64::INFINITY,
                        in_service: true,
                    });
                }
            }
            let case = GridCase {
                bus_ids: (1..=n as u64).collect(),
                lines,
                gens: vec![],
                load: DVector::zeros(n),
                base_mva: 100.0,
                slack: 0,
            };
            let mut p = DVector::from_fn(n, |_, _| draw() - 0.5);
            let mean = p.sum() / n as f64;
            p.apply(|v| *v -= mean);
            let slack = (draw() * n as f64) as usize % n;
            let ptdf = build_ptdf(&case, slack).unwrap();
            let f_oracle = dc_flows_by_angles(&case, slack, &p);
            assert!(
                (ptdf.flows(&p) - f_oracle).amax() <= 1e-9,
                "trial {trial} mismatch"
            );
        }
    }

    #[test]
    fn disconnected_network_is_rejected() {
        let mut case = ring3();
        for l in &mut case.lines {
            l.in_service = false;
        }
        assert!(matches!(case.validate(), Err(NetError::Disconnected { islands: 3 })));
        assert!(matches!(build_ptdf(&case, 0), Err(NetError::Disconnected { .. })));
    }

    #[test]
    fn nominal_injection_basics() {
        let mut case = ring3();
        // g = 0, d = 0 → zero vector.
        let z = nominal_injection(&case, &DVector::zeros(2)).unwrap();
        assert_eq!(z.amax(), 0.0);

        // g = d aggregated at the same buses → zero vector.
        case.load = DVector::from_vec(vec![0.7, 0.0, 0.3]);
        let g = DVector::from_vec(vec![0.7, 0.3]);
        let inj = nominal_injection(&case, &g).unwrap();
        assert!(inj.amax() < 1e-15);

        // Dimension mismatch is an error.
        assert!(matches!(
            nominal_injection(&case, &DVector::zeros(3)),
            Err(NetError::Dimension { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn gen_map_columns_are_unit() {
        let case = ring3();
        let gm = case.gen_map();
        for j in 0..case.n_gens() {
            let col = gm.0.column(j);
            assert_eq!(col.sum(), 1.0);
            assert_eq!(col.amax(), 1.0);
        }
    }

    #[test]
    fn validation_catches_bad_generators() {
        let mut case = ring3();
        case.gens[0].lb = 2.0;
        case.gens[0].ub = 1.0;
        assert_eq!(case.validate(), Err(NetError::GenBounds { index: 0 }));
        case.gens[0].lb = 0.0;
        case.gens[0].ub = 1.0;
        case.gens[1].cost_quad = -1.0;
        assert_eq!(case.validate(), Err(NetError::NegativeQuadCost { index: 1 }));
    }
}

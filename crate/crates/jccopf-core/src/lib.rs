//! Core solver library for DC optimal power flow with a joint chance
//! constraint.
//!
//! The crate is organized around the pipeline used by the experiments:
//!
//! * [`net`] — immutable network model (buses, lines, generators, loads)
//!   and the dense PTDF matrix of the DC power flow.
//! * [`stochastic`] — net-load uncertainty model, reproducible scenario
//!   sampling, and out-of-sample violation probability estimation.
//! * [`cons`] — the joint constraint vector `c(g, β; ω)`, its per-scenario
//!   maximum, gradients, and deterministic residuals.
//! * [`squantile`] — the kernel-smoothed quantile `Q_ε` of a sample vector:
//!   root solve, first and second derivatives, and the PSD projection used
//!   to convexify its Hessian.
//! * [`qp`] — a dense primal-dual interior-point solver for convex QPs with
//!   equalities, inequalities and bounds, plus lazy row generation.
//! * [`sl1qp`] — the Sℓ1QP trust-region driver minimizing the ℓ1 exact
//!   penalty of the smooth-quantile problem.
//! * [`tuning`] — binary searches for the smoothing width ε and the
//!   constraint right-hand side t.
//! * [`baselines`] — nominal (deterministic) DC-OPF and the scenario
//!   approach, both solved through [`qp`].
//!
//! The crate is `no_std`-compatible (with `alloc`); the companion crate
//! carries file formats, experiment orchestration and the CLI.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod cons;
mod fmath;
pub mod net;
pub mod qp;
pub mod rng;
pub mod sl1qp;
pub mod squantile;
pub mod stochastic;
pub mod tuning;

pub use qp::{QpProblem, QpSolution, QpStatus};
pub use cons::{ConstraintSystem, DispatchPoint, ScenarioMaxVector};
pub use net::{GenMap, GridCase, PtdfMatrix};
pub use squantile::{QuantileEval, SmoothIndicator};
pub use stochastic::{ScenarioModel, ScenarioSet};

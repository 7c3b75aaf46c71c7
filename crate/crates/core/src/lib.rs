//! Multiscale Newton construction of time-periodic solutions of the cubic
//! fractional nonlinear wave equation on the torus, together with the
//! diagnostics needed to audit it.

// NaN must fail validation, so comparisons are negated on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arithmetic;
pub mod conv;
pub mod coupling;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod operator;
pub mod p_solver;
pub mod q_solver;
pub mod separation;

pub use arithmetic::{check_gdc_poly, check_rho_condition, sublevel_measure, GdcCheck, GdcSpec};
pub use conv::ConvolutionConfig;
pub use error::{Error, Result};
pub use lattice::{ball_sites, one_norm, resonant_set, FourierField, LatticeIndex, ProblemParams, ResonantSet};
pub use operator::{
    assemble, invert_with_certificate, neumann_invert, InverseCertificate, OperatorKind, SiteBasis, TruncatedOperator,
};
pub use p_solver::{evaluate_g, newton_step, run_p_solver, Amplitudes, NewtonState, ScaleSchedule, StepContext};
pub use q_solver::{solve_coupled, verify_solution, CoupledSolution, QOptions, QState, SolutionBundle, SolverConfig};
pub use separation::{cluster_decompose, cluster_eigen_variation, max_chain_length, singular_sites, SingularCluster};

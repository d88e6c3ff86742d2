//! Semi-Markov jump processes with age-dependent rates, their nonlinear
//! Kolmogorov / HJB equations, BSDE recovery along paths, optimal intensity
//! control and Monte Carlo verification.
//!
//! The crate is organised along the pipeline:
//!
//! * [`model`]: states, hazards `λ(x,a)` and jump kernels `q̄(x,a,·)`, exact jump laws
//! * [`simulate`]: exact and thinned trajectory sampling
//! * [`mpp`]: integrals against the jump measure and its compensator
//! * [`kolmogorov`]: grid solvers, BSDE recovery and the Itô-type check
//! * [`control`]: tabulated control problems, Hamiltonian, HJB and feedback
//! * [`montecarlo`]: Girsanov-weighted and thinned cost estimates
//! * [`oracle`]: a closed-form example used as ground truth

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod control;
pub mod error;
pub mod kolmogorov;
pub mod model;
pub mod montecarlo;
pub mod mpp;
pub mod oracle;
pub mod piecewise;
pub mod quadrature;
pub mod simulate;
pub mod stats;

pub use control::{
    extract_feedback, hamiltonian, solve_hjb, ConstantFeedback, ControlProblem, FeedbackLaw,
    GridPolicy, HamiltonianGenerator, StepTable,
};
pub use error::{Error, Result};
pub use kolmogorov::{
    apply_l, check_ito_formula, recover_bsde, solve_backward, solve_picard, BsdePath, Generator,
    GeneratorSpec, Grid, ValueField,
};
pub use model::{AgePoint, SemiMarkovModel};
pub use montecarlo::{
    estimate_cost_thinned, estimate_cost_weighted, girsanov_weight, CostEstimate, EstimatorKind,
};
pub use piecewise::PiecewiseConstant;
pub use simulate::{simulate_controlled_path, simulate_path, RngSeed, Trajectory};
pub use stats::SampleMean;

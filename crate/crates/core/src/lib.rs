//! Decision engine, certificate producer, and numerical verifier for
//! multilinear functionals whose kernels are products of pairwise power
//! weights `|x_i - x_j|^(-alpha_ij)`.
//!
//! The crate is organised in layers:
//!
//! * [`kernel`] — exact-rational data model (kernels, Lebesgue profiles,
//!   bitmask subsets, point configurations);
//! * [`conditions`] — the exact boundedness and endpoint decision procedures;
//! * [`linsys`] — strict/non-strict rational linear systems, the exact
//!   simplex core, certificate extraction, and the fold engines that
//!   eliminate one point at a time;
//! * [`setfamily`] — measure rearrangement on subset families: merge steps,
//!   stability tests, and the greedy concentration driver;
//! * [`numeric`] — floating-point Monte Carlo and quadrature checks of the
//!   exact layer's claims;
//! * [`io`] — JSON problem documents shared with the CLI.

pub mod conditions;
pub mod io;
pub mod kernel;
pub mod linsys;
pub mod numeric;
pub mod setfamily;

pub use conditions::{
    check_condition_iii, check_endpoint, check_homogeneity, check_integrability,
    decide_boundedness, derive_weighted_problems, dilation_exponent, find_admissible_profile,
    BoundednessDecision, ConditionIiiStatus, ConditionReport, EndpointDecision, HomogeneityCheck,
    IiiViolation, NestedCheck, WeightedProblem, WeightedSplit, WitnessKind, WitnessRecipe,
};
pub use io::{
    certificate_json, condition_report_json, endpoint_decision_json, feasibility_json,
    linsystem_json, parse_exponent, render_exponent, verdict_str, DocError, ProblemDoc,
    ProcessDoc,
};
pub use kernel::{
    format_rat, parse_rat, rat, rat_int, rat_to_f64, Endpoint, KernelError, KernelSpec,
    LebesgueProfile, PointConfig, Rat, SubsetMask, SubsetTables,
};
pub use linsys::{
    build_system, distribute_and_fold, solve, Certificate, CertificateKind, FeasibilityOutcome,
    FoldMode, FoldOutput, LinError, LinSystem, Relation, Row, SystemKind,
};
pub use numeric::{
    ball_composition, divergence_diagnostic, envelope_l, homogeneity_ratio_test,
    interval_power_product, interval_power_product_with, lambda_estimate,
    lambda_estimate_truncated, line_power_product, lower_tail_power_product, mc_selberg_ball,
    mc_selberg_ball_radius, riesz_composition, upper_tail_power_product, vol_ball,
    DivergenceReport, DivergenceVerdict, FunctionDescriptor, GrowthFit, GrowthKind,
    HomogeneityPoint, HomogeneityReport, LambdaReport, McEstimate, McMethod, NumericError, Quad,
    COINCIDENCE_FACTOR, LOG_TAIL_DEFAULT_TRUNCATION, LOG_TAIL_INNER_RADIUS,
};
pub use setfamily::{
    covering_chain_exists, default_step_cap, greedy_maximize_omega, objective_value, FamilyKind,
    GreedyOutcome, MeasureState, ObjectiveSpec, SetFamilyError,
};

/// Umbrella error for operations that mix exact data validation with linear
/// solving.
#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Lin(#[from] LinError),
    /// The input problem does not satisfy the hypotheses the requested fold
    /// mode needs.
    #[error("hypotheses of the {mode} fold fail: {detail}")]
    FoldHypotheses { mode: &'static str, detail: String },
    /// A distribution system that the hypotheses promise to be solvable came
    /// back infeasible; the certificate pins down the contradiction.
    #[error("the {label} system is infeasible")]
    DistributionInfeasible {
        label: String,
        certificate: Box<Certificate>,
    },
    /// An emitted or intermediate problem failed its re-check; indicates a
    /// defect in the fold engine itself.
    #[error("reduced problem failed verification: {detail}")]
    ReducedCheckFailed { detail: String },
}

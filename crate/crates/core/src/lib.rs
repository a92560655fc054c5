//! Numerics for weighted Hardy-type operators built from iterated suprema,
//! their operator norms from weighted Lebesgue into weighted Cesàro-type
//! spaces, and the discrete certificates that bracket those norms.

// Index loops over parallel, offset-indexed node/cell arrays are the local
// idiom; iterator rewrites obscure the stencil offsets.
#![allow(clippy::needless_range_loop)]

pub mod calculus;
pub mod characterizations;
pub mod error;
pub mod grid;
pub mod weightlang;
pub mod xreal;

pub use calculus::{
    cumulative, cumulative_from_zero, is_nonincreasing, level_function, monotone_masses,
    project_nonincreasing, rearrange, stieltjes, suffix_sup, tail_integral, total_integral,
    CumFn, Direction, IntervalSpec, MonotoneEnvelope, TailFn,
};
pub mod ibp;
pub mod operators;
pub mod oracle;

pub use characterizations::{
    CharReport, Cone, OracleBlock, ProblemSpec, SpecInput, Term, Theorem,
};
pub use error::{Error, Result};
pub use grid::{same_grid, Grid, GridFn, PowerTag};
pub use ibp::{
    ibp_a, ibp_b, ibp_sweep, random_instance, reflect_instance, sweep_csv, IbpA, IbpB,
    IbpInstance, SweepRow,
};
pub use operators::{
    apply_p, apply_r, apply_sup_cum, apply_t, apply_tstar, cesaro_norm, frac_max_rearranged,
    gamma_norm, lambda_norm, split_condition_value, wlp_norm,
};
pub use oracle::{
    ascend, certify, lower_bound, ratio, seed_candidates, Band, Candidate, CandidateKind,
    Certification, OracleConfig, OracleResult, TargetNorm,
};
pub use weightlang::{parse, Expr, Side};
pub use xreal::{sorted_sum, Case, Exponents, XReal, INF, ONE, ZERO};

//! Experiment drivers behind the `dgl` subcommands, plus CSV/JSON persistence.

mod attractor;
mod bounds;
mod config;
mod output;
mod simulate;
mod truncation;

pub use attractor::{
    run_attractor, run_attractor_experiment, AttractorReport, DecayRow, EntryRun, FiniteAttractor,
    TailCheck, WeightedAttractor,
};
pub use bounds::{evaluate_bounds, run_bounds, BoundsReport};
pub use config::{
    AttractorMode, AttractorSpec, Axis, ForcingSpec, Preset, RunConfig, SweepSpec, TruncationSpec,
};
pub use output::{format_float, SWEEP_HEADER, TRAJECTORY_HEADER};
pub use simulate::{
    run_simulate, run_sweep, simulate, sweep, BoundKind, BoundSummary, ResultRow,
    SimulationSummary, TrajectoryRow,
};
pub use truncation::{run_truncation, run_truncation_experiment, TruncationReport, TruncationRow};

use crate::models::{DcglParams, SignConvention};

/// Parameters rewritten in the source convention, the form the blow-up and
/// finite-ball formulas expect: the lhs form with `(k, β)` is the source form with `(−k, −β)`.
pub fn source_equivalent(params: &DcglParams, convention: SignConvention) -> DcglParams {
    let mut out = params.clone();
    if convention == SignConvention::Lhs {
        out.k = -out.k;
        out.beta = -out.beta;
    }
    out
}

/// Parameters rewritten in the lhs convention, which is the one `dcgl_to_general` maps.
pub fn lhs_equivalent(params: &DcglParams, convention: SignConvention) -> DcglParams {
    let mut out = params.clone();
    if convention == SignConvention::Source {
        out.k = -out.k;
        out.beta = -out.beta;
    }
    out
}

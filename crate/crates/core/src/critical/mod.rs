//! Critical-point machinery on top of the energy model: splitting the
//! eigenbasis into the linking subspaces, verifying the geometric
//! inequalities, probing the gradient-norm lower bound on the slab between
//! two energy levels, hunting critical points with deflated Newton from
//! structured seeds, classifying the survivors, and sweeping lambda toward a
//! group eigenvalue to count distinct solutions.

pub mod classify;
pub mod experiment;
pub mod geometry;
pub mod nabla;
pub mod newton;
pub mod split;

pub use classify::{classify_solutions, BandPlacement, SolutionClass};
pub use experiment::{
    multiplicity_experiment, prepare, run_lambda, run_plan, ExperimentPlan, ExperimentReport,
    StageDepth,
    LambdaOutcome, RecordSummary, StageControls,
};
pub use geometry::{sup_over_ekh, verify_geometry, GeometryParams, GeometryReport};
pub use nabla::{estimate_nabla_condition, NablaEstimate};
pub use newton::{deflated_newton, seed_generator};
pub use split::{split_subspaces, SubspaceSplit};

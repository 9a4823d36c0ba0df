//! Phase-clocked mass-action simulation of a biochemical two-two-one
//! neural network, a dual-rail reference network to compare it against, and
//! tools for measuring and bounding the realization error between the two.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

pub mod crn;
pub mod dataset;
pub mod errorlab;
pub mod fcnn;
pub mod integrate;
pub mod netbuild;
pub mod scalar;
pub mod scheduler;

pub use crn::{
    compose, parse_crn, reaction_rate, write_crn, ConcentrationState, Crn, CrnBuilder, CrnError,
    Reaction, Species,
};
pub use integrate::{integrate, integrate_endpoint, IntegrateError, IntegratorConfig, Trajectory};
pub use scalar::Scalar;

pub type Crn64 = Crn<f64>;
pub type State64 = ConcentrationState<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type IntegratorConfig64 = IntegratorConfig<f64>;
pub type Blueprint64 = netbuild::Blueprint<f64>;
pub type DualRail64 = netbuild::DualRailMatrices<f64>;
pub type ReferenceState64 = fcnn::ReferenceState<f64>;
pub type Dataset64 = dataset::Dataset<f64>;
pub type TrainingTrace64 = scheduler::TrainingTrace<f64>;

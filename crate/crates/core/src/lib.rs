//! Completion-time minimization for wirelessly powered federated learning.
//!
//! [`model`] holds the physical and learning quantities of one round,
//! [`channel`] samples seeded network realizations, [`surrogates`] builds
//! the convex inner approximations ([`contracts`] checks them at random),
//! [`sca`] runs the alternating
//! accuracy/resource loop, and [`benchmarks`] freezes parts of the decision
//! to obtain the comparison schemes. [`oracle`] solves one-device instances
//! by exhaustive search.

pub mod benchmarks;
pub mod channel;
pub mod contracts;
pub mod model;
pub mod oracle;
pub mod sca;
pub mod surrogates;

pub use channel::{sample_instance, ChannelConfig, DeviceRanges};
pub use model::{
    check_feasibility, derive_learning_constants, Allocation, DeviceParams, LearningParams, Mode, ProblemInstance,
    SystemParams,
};
pub use benchmarks::{run_benchmark, Scheme};
pub use sca::{run, RunOptions, Trace};

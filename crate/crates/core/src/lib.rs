//! Monitored collision-model dynamics of a kinetically constrained qubit
//! chain: Kraus families, quantum trajectories, dynamical order parameters,
//! large-deviation (tilted) statistics and the continuous-time limit.
//!
//! The crate is `no_std` with `alloc`; the `std` feature (on by default)
//! only forwards to the dependencies.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod channel;
pub mod error;
pub mod krylov;
pub mod lindblad;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod singlebody;
pub mod stats;
pub mod tilted;
pub mod trajectory;
pub mod wht;

pub use channel::{
    apply_channel, apply_dual, build_kraus_dense, build_kraus_fast, stationary_state, Construction, DensityMatrix,
    KrausFamily,
};
pub use error::{Error, Result};
pub use model::{ModelParams, SystemOperator};
pub use trajectory::{PureState, RecordMode, TrajectoryRecord};

//! Excitation transport on small open quantum networks.
//!
//! A network of coupled two-level sites is fed by an incoherent source node
//! and emptied into an absorbing drain node. The dynamics interpolate between
//! a purely coherent walk and a purely incoherent hopping process (a quantum
//! stochastic walk). The crate builds the vectorized Lindblad generator,
//! propagates density matrices, and computes the expected survival time
//! (mean time until the excitation reaches the drain) by three independent
//! routes, together with an exact analytic reference for the symmetric
//! V-shaped trimer.
//!
//! State-space indexing is fixed throughout: the source is index `0`, network
//! sites are `1..=N`, and the drain is `N + 1`.

pub mod closed_form;
pub mod dynamics;
pub mod error;
pub mod est;
pub mod format;
pub mod linalg;
pub mod liouvillian;
pub mod network;
pub mod spec_file;
pub mod sweep;

pub use closed_form::{AlphaCVariant, ClosedFormValue};
pub use dynamics::{evolve, observables, Observables, Trajectory};
pub use error::{Error, Result};
pub use est::{
    est_linear_solve, est_resolvent_limit, est_time_domain, Diagnostics, Est, EstMethod, EstValue,
};
pub use liouvillian::{assemble_generator, DensityMatrix, Generator, JumpOperator};
pub use network::{
    DarkState, DrainConfig, MixingParams, NetworkSpec, SourceConfig, SourceMode,
};
pub use spec_file::NetworkFile;

/// Complex scalar used for all amplitudes and superoperator entries.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dense real matrix, used for coupling tables.
pub type RMatrix = nalgebra::DMatrix<f64>;

pub use sweep::{Model, SweepGrid, SweepRecord};

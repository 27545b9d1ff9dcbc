//! Event-driven simulator and analysis toolkit for the system of n
//! perfectly elastic balls falling on a vertical half line under unit
//! gravity, with the lowest ball bouncing on a hard floor.
//!
//! The crate propagates the flow on the energy surface `H = 1`, pushes
//! its derivative cocycle in (δh, δv) coordinates, verifies the monotone
//! cone form `Q1 = Σ δh_i δv_i` and its strict-invariance criterion,
//! classifies symbolic collision sequences by exact rational neutral-space
//! computation, and estimates Lyapunov spectra from re-orthonormalized
//! cocycle products. Independent brute-force oracles (bisection event
//! times, finite differences, the equal-mass ghost system, exhaustive
//! sequence enumeration) back the test suite.

pub mod dynamics;
pub mod error;
pub mod mass;
pub mod oracle;
pub mod rational;
pub mod sequence;
pub mod spectrum;
pub mod state;
pub mod sufficiency;
pub mod tangent;

pub use error::{OracleError, SimError, SpectrumError, SufficiencyError};
pub use mass::MassVector;
pub use state::{CollisionEvent, CollisionLabel, PhaseState};

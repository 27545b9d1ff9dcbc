//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by the event-driven propagation layer.
#[derive(Debug, Clone, Error)]
pub enum SimError {
    #[error("invalid mass vector: {0}")]
    InvalidMasses(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// No collision candidate exists. Impossible on the compact energy
    /// surface, so this always signals an internal inconsistency.
    #[error("no collision candidate found at t = {t}")]
    NoEvent { t: f64 },

    /// Two candidate event times coincide within the simultaneity
    /// tolerance: a multiple collision, where the flow derivative is
    /// undefined. The trajectory is aborted.
    #[error("multiple collision suspected at t = {t}: candidate times {dt_first} and {dt_second}")]
    Singularity { t: f64, dt_first: f64, dt_second: f64 },

    /// Collision with approach speed (or floor impact speed) below the
    /// grazing tolerance: a corner-type singularity.
    #[error("grazing collision at t = {t}: impact speed {speed}")]
    GrazingSingularity { t: f64, speed: f64 },

    /// Positions left the ordered cone by more than the ordering
    /// tolerance, which means an event was missed.
    #[error("position ordering violated at t = {t} near index {index}")]
    OrderViolation { t: f64, index: usize },

    /// More events than the guard allows inside one time window.
    /// Finite accumulation points are measure-zero, so this is a
    /// diagnostic rather than a theorem-level verdict.
    #[error("{count} collisions within time window {window} at t = {t}: accumulation suspected")]
    AccumulationSuspected { t: f64, count: usize, window: f64 },

    #[error("domain error: {0}")]
    Domain(String),
}

/// Errors raised by symbolic-sequence analysis.
#[derive(Debug, Clone, Error)]
pub enum SufficiencyError {
    /// The collision graph restricted to the ball vertices is not
    /// connected, so the homogeneous linear system does not
    /// characterize the full neutral space.
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("domain error: {0}")]
    Domain(String),
}

/// Errors raised by spectrum estimation and orbit probes.
#[derive(Debug, Clone, Error)]
pub enum SpectrumError {
    #[error(transparent)]
    Sim(#[from] SimError),

    #[error(transparent)]
    Sufficiency(#[from] SufficiencyError),

    /// The periodic-orbit search exhausted its budget. Reported, not fatal.
    #[error("no periodic orbit located after {seeds_tried} refined seeds (best residual {best_residual})")]
    OrbitNotFound { seeds_tried: usize, best_residual: f64 },

    #[error("domain error: {0}")]
    Domain(String),
}

/// Errors raised by the independent brute-force oracles.
#[derive(Debug, Clone, Error)]
pub enum OracleError {
    #[error(transparent)]
    Sim(#[from] SimError),

    #[error(transparent)]
    Sufficiency(#[from] SufficiencyError),

    /// The perturbed trajectory realized a different symbolic sequence,
    /// so the finite difference does not approximate the cocycle.
    #[error("perturbed trajectory changed symbolic sequence at event {at}")]
    SequenceChanged { at: usize },

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("domain error: {0}")]
    Domain(String),
}

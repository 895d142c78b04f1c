//! Crate-wide error type and the process exit-code convention used by the
//! command-line front end.

use thiserror::Error;

/// Everything that can go wrong across the simulator and analytics layers.
#[derive(Debug, Error)]
pub enum GossipError {
    /// Descriptors and per-agent operations are undefined on an empty system.
    #[error("descriptors are undefined for an empty system")]
    EmptySystem,

    /// An event or map was requested below its minimum system size.
    #[error("{what} requires at least {min} agents, got {n}")]
    DomainTooSmall {
        what: &'static str,
        min: u32,
        n: u32,
    },

    /// Exact moment maps exist only for the random departure policy.
    #[error("no exact moment map exists for policy-driven events; use the variance bounds instead")]
    UnsupportedPolicy,

    /// Adversarial variance bounds cover departures and replacements only.
    #[error("adversarial variance bounds exist only for departure and replacement events")]
    NoAdversarialBound,

    /// A quantity that needs λ_r > 0 (or λ_d > 0) was requested in a closed system.
    #[error("closed system: {0}")]
    ClosedSystem(String),

    /// Invalid or inconsistent user configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A numerical routine failed an internal accuracy or sanity check.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The event loop exceeded its safety cap.
    #[error("event cap of {cap} exceeded at t = {t}; rates produce too many events for this horizon")]
    EventCapExceeded { cap: u64, t: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl GossipError {
    /// Process exit code: 2 for configuration errors, 3 for runtime or
    /// numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            GossipError::Config(_) => 2,
            _ => 3,
        }
    }
}

//! Event-driven simulation and exact moment analytics for randomized
//! gossip among a changing population of agents.
//!
//! Agents hold real values and interact through pairwise averaging
//! ("gossip") while the population itself changes: agents can be replaced
//! (fixed-size systems) or arrive and depart (open systems). The library
//! tracks the descriptor pair X = (x̄², mean of squares), whose expectation
//! evolves *exactly* under linear maps per event and linear ODEs in time —
//! so every simulation estimate here can be checked against a closed-form
//! or numerically exact reference, and vice versa.
//!
//! The main entry points:
//!
//! * [`engine`] — exponential-clock event simulation, deterministic under a
//!   seed and independent of thread count, with ensemble statistics.
//! * [`events`] — one-step moment maps E[X′|X] = A·X + b for gossip,
//!   arrival, departure, and replacement, plus per-event variance
//!   contraction factors and worst-case departure bounds.
//! * [`fixed_analytics`] — the two-dimensional moment ODE of the fixed-size
//!   system: closed-form solutions, fixed points, eigenstructure, and
//!   variance envelopes for random and adversarial replacement.
//! * [`open_analytics`] — the open system: Poisson size law,
//!   size-conditioned moment ODEs, stationary recurrences, variance flow
//!   envelopes, and certified dual bounds on the stationary variance.
//! * [`experiments`] — JSON-configurable experiment drivers and presets,
//!   shared by the `open-gossip` binary and the examples.
//!
//! ```
//! use open_gossip::{fixed_point, RatesConfig};
//!
//! // Four agents, gossip nine times faster than replacement: the expected
//! // variance settles at 6/71 of the arrival variance.
//! let rates = RatesConfig {
//!     lambda_g: 9.0,
//!     lambda_r: 1.0,
//!     sigma2: 1.0,
//!     ..Default::default()
//! };
//! let (_, _, var) = fixed_point(4, &rates)?;
//! assert!((var - 6.0 / 71.0).abs() < 1e-12);
//! # Ok::<(), open_gossip::GossipError>(())
//! ```

pub mod engine;
pub mod error;
pub mod events;
pub mod experiments;
pub mod fixed_analytics;
pub mod model;
mod numerics;
pub mod open_analytics;
pub mod table;

pub use engine::{
    estimate_asymptotic_moments, estimate_asymptotic_variance, run_ensemble, run_trajectory,
    AsymptoticEstimate, EnsembleStats, EventRecord, SimMode, SimSetup, Trajectory,
};
pub use error::GossipError;
pub use events::{
    adversarial_variance_bound, moment_map, variance_contraction, DeparturePolicy, EventKind,
    MomentMap,
};
pub use experiments::{load_config, preset, run_command, Command, ExperimentConfig, Mode};
pub use fixed_analytics::{
    assemble_fixed_size_ode, build_fixed_size_ode, fixed_point, solve_ode, spectrum,
    variance_bound_adversarial, variance_bound_ode_random, AffineSystem2, SpectralReport,
    VarianceEnvelope,
};
pub use model::{
    compute_descriptors, AgentId, Descriptors, RandomSource, RatesConfig, SystemState,
    ValueDistribution,
};
pub use open_analytics::{
    best_dual_bound, birth_death_steady_state, conditioned_moment_ode, default_j_max,
    explicit_bound, steady_state_recurrence_check, variance_flow_envelope, verify_dual_certificate,
    ConditionedMoments, ConditionedSolution, DualCertificate, ExplicitBound, SizeDistribution,
    VarianceFlowSolution,
};
pub use table::{fmt_num, ResultTable};

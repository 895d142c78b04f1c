//! Event constructors and their exact one-step moment maps.
//!
//! Four events act on a system of size n. Writing X = (squared mean, mean of
//! squares), each event ε with uniformly random participants satisfies
//! E[X' | X] = A_ε(n)·X + b_ε(n), with
//!
//! ```text
//!   gossip       A = [[1, 0], [1/n, 1 − 1/n]]                      b = 0
//!   arrival      A = [[n²/(n+1)², 0], [0, n/(n+1)]]                b = (σ²/(n+1)², σ²/(n+1))
//!   departure    A = [[1 − 1/(n−1)², 1/(n−1)²], [0, 1]]            b = 0        (n ≥ 2)
//!   replacement  A = [[(n−2)/n, 1/n²], [0, (n−1)/n]]               b = (σ²/n², σ²/n)   (n ≥ 2)
//! ```
//!
//! where n is the size *before* the event and σ² the variance of the arrival
//! value distribution. The arrival map is exact for every n ≥ 0 (at n = 0 it
//! degenerates to A = 0, b = (σ², σ²)). A replacement is a departure followed
//! by an arrival at the same timestamp, and its map factors accordingly:
//! A_repl(n) = A_arr(n−1)·A_dep(n), b_repl(n) = b_arr(n−1).
//!
//! The maps above hold for uniformly random participant selection. For
//! policy-driven (adversarial) departures no exact map exists; the
//! [`adversarial_variance_bound`] gives the worst-case one-step variance
//! growth instead.

use crate::error::GossipError;
use crate::model::{draw_initial_value, AgentId, RandomSource, SystemState, ValueDistribution};

/// How the departing agent is chosen.
///
/// `Random` is the only policy with an exact moment map. `MinAbsValue`
/// removes the agent closest to consensus (worst case for variance decay);
/// `Custom` receives the full state and returns the index to remove.
#[derive(Clone, Copy, Debug)]
pub enum DeparturePolicy {
    Random,
    MinAbsValue,
    Custom(fn(&SystemState, &mut RandomSource) -> usize),
}

impl PartialEq for DeparturePolicy {
    fn eq(&self, other: &DeparturePolicy) -> bool {
        match (self, other) {
            (DeparturePolicy::Random, DeparturePolicy::Random) => true,
            (DeparturePolicy::MinAbsValue, DeparturePolicy::MinAbsValue) => true,
            (DeparturePolicy::Custom(a), DeparturePolicy::Custom(b)) => std::ptr::fn_addr_eq(*a, *b),
            _ => false,
        }
    }
}

/// The four event types; departures and replacements carry their policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EventKind {
    Gossip,
    Arrival,
    Departure(DeparturePolicy),
    Replacement(DeparturePolicy),
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EventKind::Gossip => "gossip",
            EventKind::Arrival => "arrival",
            EventKind::Departure(_) => "departure",
            EventKind::Replacement(_) => "replacement",
        };
        f.write_str(s)
    }
}

/// Applies one gossip: two independent uniform indices i, j (i = j allowed),
/// both agents move to the average (x_i + x_j)/2. Returns the pair of ids.
pub fn apply_gossip(
    state: &mut SystemState,
    rng: &mut RandomSource,
) -> Result<(AgentId, AgentId), GossipError> {
    let n = state.size() as usize;
    if n == 0 {
        return Err(GossipError::EmptySystem);
    }
    let i = rng.index(n);
    let j = rng.index(n);
    let avg = 0.5 * (state.values()[i] + state.values()[j]);
    state.set_value(i, avg);
    state.set_value(j, avg);
    Ok((state.ids()[i], state.ids()[j]))
}

/// Applies one arrival: a fresh agent with value drawn i.i.d. from the value
/// distribution joins. Valid at any size, including 0. Returns the new id.
pub fn apply_arrival(
    state: &mut SystemState,
    dist: ValueDistribution,
    sigma2: f64,
    rng: &mut RandomSource,
) -> AgentId {
    let v = draw_initial_value(dist, sigma2, rng);
    state.push_agent(v)
}

fn departure_index(
    state: &SystemState,
    policy: DeparturePolicy,
    rng: &mut RandomSource,
) -> usize {
    match policy {
        DeparturePolicy::Random => rng.index(state.size() as usize),
        DeparturePolicy::MinAbsValue => {
            // First minimal index; ties broken deterministically.
            let mut best = 0usize;
            for (i, v) in state.values().iter().enumerate() {
                if v.abs() < state.values()[best].abs() {
                    best = i;
                }
            }
            best
        }
        DeparturePolicy::Custom(f) => {
            let idx = f(state, rng);
            assert!(
                idx < state.size() as usize,
                "custom departure policy returned out-of-range index {idx}"
            );
            idx
        }
    }
}

/// Applies one departure under `policy`. Requires n ≥ 1; removing the last
/// agent leaves a legal empty system (its descriptors are undefined until
/// someone arrives). Returns the id of the removed agent.
pub fn apply_departure(
    state: &mut SystemState,
    policy: DeparturePolicy,
    rng: &mut RandomSource,
) -> Result<AgentId, GossipError> {
    if state.size() == 0 {
        return Err(GossipError::EmptySystem);
    }
    let idx = departure_index(state, policy, rng);
    let (id, _) = state.remove_agent(idx);
    Ok(id)
}

/// Applies one replacement: a departure under `policy` followed by an
/// arrival, both at the same timestamp. Requires n ≥ 1. Returns
/// (departed id, arrived id).
pub fn apply_replacement(
    state: &mut SystemState,
    policy: DeparturePolicy,
    dist: ValueDistribution,
    sigma2: f64,
    rng: &mut RandomSource,
) -> Result<(AgentId, AgentId), GossipError> {
    let gone = apply_departure(state, policy, rng)?;
    let fresh = apply_arrival(state, dist, sigma2, rng);
    Ok((gone, fresh))
}

/// Exact one-step map E[X'|X] = A·X + b for one event on a size-n system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentMap {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    /// System size before the event.
    pub source_size: u32,
    /// System size after the event.
    pub arrival_size: u32,
}

impl MomentMap {
    /// Applies the affine map to a descriptor pair.
    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.a[0][0] * x[0] + self.a[0][1] * x[1] + self.b[0],
            self.a[1][0] * x[0] + self.a[1][1] * x[1] + self.b[1],
        ]
    }
}

/// Exact moment map of `kind` at size `n` (size before the event).
///
/// Domains: gossip n ≥ 1; arrival n ≥ 0; departure and replacement n ≥ 2.
/// Departure and replacement maps exist only for [`DeparturePolicy::Random`];
/// other policies return [`GossipError::UnsupportedPolicy`].
pub fn moment_map(kind: EventKind, n: u32, sigma2: f64) -> Result<MomentMap, GossipError> {
    let nf = n as f64;
    match kind {
        EventKind::Gossip => {
            if n < 1 {
                return Err(GossipError::DomainTooSmall {
                    what: "gossip map",
                    min: 1,
                    n,
                });
            }
            Ok(MomentMap {
                a: [[1.0, 0.0], [1.0 / nf, 1.0 - 1.0 / nf]],
                b: [0.0, 0.0],
                source_size: n,
                arrival_size: n,
            })
        }
        EventKind::Arrival => {
            // Exact for every n ≥ 0; at n = 0 it reduces to A = 0,
            // b = (σ², σ²): the lone arriving agent is the whole system.
            let np1 = nf + 1.0;
            Ok(MomentMap {
                a: [[nf * nf / (np1 * np1), 0.0], [0.0, nf / np1]],
                b: [sigma2 / (np1 * np1), sigma2 / np1],
                source_size: n,
                arrival_size: n + 1,
            })
        }
        EventKind::Departure(policy) => {
            if policy != DeparturePolicy::Random {
                return Err(GossipError::UnsupportedPolicy);
            }
            if n < 2 {
                return Err(GossipError::DomainTooSmall {
                    what: "departure map",
                    min: 2,
                    n,
                });
            }
            let m = nf - 1.0;
            Ok(MomentMap {
                a: [[1.0 - 1.0 / (m * m), 1.0 / (m * m)], [0.0, 1.0]],
                b: [0.0, 0.0],
                source_size: n,
                arrival_size: n - 1,
            })
        }
        EventKind::Replacement(policy) => {
            if policy != DeparturePolicy::Random {
                return Err(GossipError::UnsupportedPolicy);
            }
            if n < 2 {
                return Err(GossipError::DomainTooSmall {
                    what: "replacement map",
                    min: 2,
                    n,
                });
            }
            Ok(MomentMap {
                a: [
                    [(nf - 2.0) / nf, 1.0 / (nf * nf)],
                    [0.0, (nf - 1.0) / nf],
                ],
                b: [sigma2 / (nf * nf), sigma2 / nf],
                source_size: n,
                arrival_size: n,
            })
        }
    }
}

/// One-step variance recursion E[Var'] ≤ α·Var + β (equality where exact).
///
/// Gossip and random departure are exact: α = 1 − 1/n resp. 1 − 1/(n−1)²,
/// β = 0. Arrival (α = n/(n+1), β = σ²/(n+1)) and random replacement
/// (α = (n² − n − 1)/n², β = (n² − 1)σ²/n³) are upper bounds because the
/// variance is a concave function of the descriptors.
pub fn variance_contraction(
    kind: EventKind,
    n: u32,
    sigma2: f64,
) -> Result<(f64, f64), GossipError> {
    let nf = n as f64;
    match kind {
        EventKind::Gossip => {
            if n < 1 {
                return Err(GossipError::DomainTooSmall {
                    what: "gossip contraction",
                    min: 1,
                    n,
                });
            }
            Ok((1.0 - 1.0 / nf, 0.0))
        }
        EventKind::Arrival => Ok((nf / (nf + 1.0), sigma2 / (nf + 1.0))),
        EventKind::Departure(policy) => {
            if policy != DeparturePolicy::Random {
                return Err(GossipError::UnsupportedPolicy);
            }
            if n < 2 {
                return Err(GossipError::DomainTooSmall {
                    what: "departure contraction",
                    min: 2,
                    n,
                });
            }
            let m = nf - 1.0;
            Ok((1.0 - 1.0 / (m * m), 0.0))
        }
        EventKind::Replacement(policy) => {
            if policy != DeparturePolicy::Random {
                return Err(GossipError::UnsupportedPolicy);
            }
            if n < 2 {
                return Err(GossipError::DomainTooSmall {
                    what: "replacement contraction",
                    min: 2,
                    n,
                });
            }
            Ok((
                (nf * nf - nf - 1.0) / (nf * nf),
                (nf * nf - 1.0) * sigma2 / (nf * nf * nf),
            ))
        }
    }
}

/// Worst-case one-step variance bound over *any* departure policy.
///
/// For a departure at size n ≥ 2: Var' ≤ n·Var/(n−1). For a replacement at
/// size n ≥ 1: E[Var'] ≤ Var + σ²/n. Gossip and arrival have no adversarial
/// freedom, so no bound is defined for them.
pub fn adversarial_variance_bound(
    kind: EventKind,
    n: u32,
    variance: f64,
    sigma2: f64,
) -> Result<f64, GossipError> {
    let nf = n as f64;
    match kind {
        EventKind::Departure(_) => {
            if n < 2 {
                return Err(GossipError::DomainTooSmall {
                    what: "adversarial departure bound",
                    min: 2,
                    n,
                });
            }
            Ok(nf * variance / (nf - 1.0))
        }
        EventKind::Replacement(_) => {
            if n < 1 {
                return Err(GossipError::DomainTooSmall {
                    what: "adversarial replacement bound",
                    min: 1,
                    n,
                });
            }
            Ok(variance + sigma2 / nf)
        }
        EventKind::Gossip | EventKind::Arrival => Err(GossipError::NoAdversarialBound),
    }
}

//! Core domain types: the live system state, scale-independent descriptors,
//! event rates, and the reproducible random source shared by all modules.
//!
//! A system holds n agents with real values x_1, …, x_n. All moment analysis
//! works on the descriptor pair X = (squared mean, mean of squares):
//!
//! ```text
//!   squared_mean     (Σ x_i / n)²
//!   mean_of_squares  Σ x_i² / n
//!   variance         mean_of_squares − squared_mean   (≥ 0 by Cauchy–Schwarz)
//! ```
//!
//! Descriptors are undefined for an empty system. The open-system analytics
//! use the convention that size-weighted moments vanish at size 0.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::GossipError;

/// Unique agent label; never reused within a run once the agent has left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentId(pub u64);

impl std::fmt::Display for AgentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The live system: agent ids, their values, and the current continuous time.
///
/// Mutation goes through the event constructors in [`crate::events`]; removal
/// is O(1) swap-remove, so agent order is not meaningful.
#[derive(Clone, Debug)]
pub struct SystemState {
    ids: Vec<AgentId>,
    values: Vec<f64>,
    time: f64,
    next_id: u64,
}

impl SystemState {
    /// Builds a state at time 0 from explicit values; ids are 0..n−1.
    pub fn from_values(values: &[f64]) -> Self {
        SystemState {
            ids: (0..values.len() as u64).map(AgentId).collect(),
            values: values.to_vec(),
            time: 0.0,
            next_id: values.len() as u64,
        }
    }

    /// Builds a state of `n` agents with i.i.d. initial values.
    pub fn init(
        n: u32,
        dist: ValueDistribution,
        sigma2: f64,
        rng: &mut RandomSource,
    ) -> SystemState {
        let values: Vec<f64> = (0..n)
            .map(|_| draw_initial_value(dist, sigma2, rng))
            .collect();
        SystemState::from_values(&values)
    }

    /// Current number of agents.
    pub fn size(&self) -> u32 {
        self.values.len() as u32
    }

    /// Current continuous time.
    pub fn time(&self) -> f64 {
        self.time
    }

    /// Agent values, in internal (arbitrary) order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Agent ids, aligned with [`SystemState::values`].
    pub fn ids(&self) -> &[AgentId] {
        &self.ids
    }

    pub(crate) fn advance_time(&mut self, dt: f64) {
        self.time += dt;
    }

    pub(crate) fn set_value(&mut self, idx: usize, v: f64) {
        self.values[idx] = v;
    }

    /// Appends a fresh agent; the id counter guarantees ids are never reused.
    pub(crate) fn push_agent(&mut self, value: f64) -> AgentId {
        let id = AgentId(self.next_id);
        self.next_id += 1;
        self.ids.push(id);
        self.values.push(value);
        id
    }

    /// Removes the agent at `idx` in O(1); order is not preserved.
    pub(crate) fn remove_agent(&mut self, idx: usize) -> (AgentId, f64) {
        let id = self.ids.swap_remove(idx);
        let v = self.values.swap_remove(idx);
        (id, v)
    }
}

/// Scale-independent descriptor triple of a non-empty system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Descriptors {
    pub squared_mean: f64,
    pub mean_of_squares: f64,
    pub variance: f64,
}

/// Computes (squared mean, mean of squares, variance) for a non-empty system.
pub fn compute_descriptors(state: &SystemState) -> Result<Descriptors, GossipError> {
    descriptors_of(state.values())
}

/// Same as [`compute_descriptors`], on a raw value slice.
///
/// The variance uses the two-pass sum Σ(x_i − x̄)²/n, which agrees with
/// `mean_of_squares − squared_mean` up to rounding but cannot go negative at
/// near-consensus states.
pub fn descriptors_of(values: &[f64]) -> Result<Descriptors, GossipError> {
    let n = values.len();
    if n == 0 {
        return Err(GossipError::EmptySystem);
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let mean_of_squares = values.iter().map(|x| x * x).sum::<f64>() / nf;
    let variance = values
        .iter()
        .map(|x| {
            let d = x - mean;
            d * d
        })
        .sum::<f64>()
        / nf;
    Ok(Descriptors {
        squared_mean: mean * mean,
        mean_of_squares,
        variance,
    })
}

/// Poisson event rates (per agent for gossip, replacement and departure;
/// global for arrival) plus the variance σ² of the value distribution.
///
/// Fixed-size dynamics use (λ_g, λ_r); open dynamics use (λ_g, λ_a, λ_d).
/// Unused rates stay at 0.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RatesConfig {
    pub lambda_g: f64,
    pub lambda_r: f64,
    pub lambda_a: f64,
    pub lambda_d: f64,
    pub sigma2: f64,
}

impl Default for RatesConfig {
    fn default() -> Self {
        RatesConfig {
            lambda_g: 0.0,
            lambda_r: 0.0,
            lambda_a: 0.0,
            lambda_d: 0.0,
            sigma2: 1.0,
        }
    }
}

impl RatesConfig {
    /// Gossips per replacement, ρ = λ_g/λ_r; defined only for λ_r > 0.
    pub fn rho(&self) -> Option<f64> {
        (self.lambda_r > 0.0).then(|| self.lambda_g / self.lambda_r)
    }

    /// Gossips per agent lifetime, γ = λ_g/λ_d; defined only for λ_d > 0.
    pub fn gamma(&self) -> Option<f64> {
        (self.lambda_d > 0.0).then(|| self.lambda_g / self.lambda_d)
    }

    /// Stationary mean size, n₀ = λ_a/λ_d; defined only for λ_d > 0.
    pub fn n0(&self) -> Option<f64> {
        (self.lambda_d > 0.0).then(|| self.lambda_a / self.lambda_d)
    }

    /// Rejects negative, non-finite rates and non-positive σ².
    pub fn validate(&self) -> Result<(), GossipError> {
        let rates = [
            ("lambda_g", self.lambda_g),
            ("lambda_r", self.lambda_r),
            ("lambda_a", self.lambda_a),
            ("lambda_d", self.lambda_d),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v >= 0.0) {
                return Err(GossipError::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(GossipError::Config(format!(
                "sigma2 must be finite and > 0, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }
}

/// Family of the i.i.d. value distribution (mean 0, variance σ²).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueDistribution {
    Normal,
    Uniform,
}

/// One draw with mean 0 and variance σ² from the requested family.
///
/// `Uniform` uses half-width √(3σ²) so that its variance is exactly σ².
pub fn draw_initial_value(dist: ValueDistribution, sigma2: f64, rng: &mut RandomSource) -> f64 {
    match dist {
        ValueDistribution::Normal => Normal::new(0.0, sigma2.sqrt())
            .expect("sigma2 validated positive")
            .sample(rng),
        ValueDistribution::Uniform => {
            let a = (3.0 * sigma2).sqrt();
            Uniform::new_inclusive(-a, a)
                .expect("bounds validated finite")
                .sample(rng)
        }
    }
}

/// Deterministic random source addressed by (seed, stream).
///
/// Identical (seed, stream) pairs yield identical draw sequences regardless
/// of thread schedule, which is what makes parallel ensembles reproducible:
/// replication r uses stream r of the run seed.
#[derive(Clone, Debug)]
pub struct RandomSource {
    rng: ChaCha8Rng,
    seed: u64,
    stream: u64,
}

impl RandomSource {
    pub fn new(seed: u64, stream: u64) -> RandomSource {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RandomSource { rng, seed, stream }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform index in `0..n`; convenience for agent selection.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

//! A time-dependent upper bound on the expected variance of an open
//! system, integrated jointly with the size distribution. The aggregate
//! Σ_j V_j(t)π_j(t) bounds E Var(t) at every time, and its t → ∞ limit
//! coincides exactly with the optimal stationary bound computed by the
//! dual certificate machinery — two very different computations landing on
//! the same number is a strong self-check.
//!
//! Run with `cargo run --example variance_bounds_open`.

use open_gossip::{
    best_dual_bound, birth_death_steady_state, conditioned_moment_ode, default_j_max,
    variance_flow_envelope, ConditionedMoments, RatesConfig,
};

fn main() {
    let rates = RatesConfig {
        lambda_g: 10.0,
        lambda_a: 5.0,
        lambda_d: 1.0,
        sigma2: 1.0,
        ..Default::default()
    };
    let n0 = rates.n0().expect("open rates set");
    let j_max = default_j_max(n0);

    // Start from the stationary size law with i.i.d.-valued agents, the
    // worst admissible initial data for the envelope.
    let pi0 = birth_death_steady_state(n0, j_max).expect("valid parameters").pi;
    let v0: Vec<f64> = (0..=j_max)
        .map(|j| if j == 0 { 0.0 } else { (1.0 - 1.0 / j as f64) * rates.sigma2 })
        .collect();

    let grid: Vec<f64> = (0..=16).map(|k| k as f64 * 0.5).collect();
    let flow = variance_flow_envelope(&rates, &pi0, &v0, &grid).expect("valid parameters");

    // The exact expected variance from the conditioned moment system,
    // started from the matching initial data, for comparison.
    let mut init = ConditionedMoments::point_mass(j_max, 0, rates.sigma2);
    init.pi = pi0.clone();
    for j in 1..=j_max {
        init.w[j] = [pi0[j] * rates.sigma2 / j as f64, pi0[j] * rates.sigma2];
    }
    let exact = conditioned_moment_ode(&rates, j_max, &init, &grid).expect("valid parameters");

    println!("{:>6} {:>14} {:>14} {:>10}", "t", "E Var (exact)", "envelope", "ratio");
    for (k, t) in grid.iter().enumerate() {
        let ev = exact.states[k].expected_variance();
        let env = flow.aggregate[k];
        println!("{t:>6.2} {ev:>14.8} {env:>14.8} {:>10.4}", env / ev);
    }

    let (opt, cert) = best_dual_bound(&rates, j_max).expect("valid parameters");
    let last = flow.aggregate[grid.len() - 1];
    println!("\nenvelope at t = {}: {last:.10}", grid[grid.len() - 1]);
    println!("optimal stationary bound:   {opt:.10} (feasible: {})", cert.feasible);
    println!("difference: {:.2e}", (last - opt).abs());
}

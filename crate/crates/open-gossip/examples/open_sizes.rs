//! Population size of an open system. With arrivals at rate λ_a and
//! per-agent departures at rate λ_d, the size is a birth–death chain whose
//! stationary law is Poisson with mean n₀ = λ_a/λ_d. This prints the
//! numerically computed steady state next to a simulated histogram.
//!
//! Run with `cargo run --example open_sizes`.

use open_gossip::{birth_death_steady_state, default_j_max, run_ensemble, RatesConfig, SimMode, SimSetup};

fn main() {
    let rates = RatesConfig {
        lambda_a: 5.0,
        lambda_d: 1.0,
        sigma2: 1.0,
        ..Default::default()
    };
    let n0 = rates.n0().expect("open rates set");
    let j_max = default_j_max(n0);
    println!("n₀ = {n0}, truncating at j_max = {j_max} (tail mass < 1e-12)\n");

    let law = birth_death_steady_state(n0, j_max).expect("valid parameters");
    let setup = SimSetup::new(SimMode::Open { n_init: 5 }, rates);
    let reps = 20_000;
    let stats = run_ensemble(&setup, 30.0, &[30.0], reps, 9).expect("valid run");
    let hist = &stats.size_histogram[0];

    println!("{:>4} {:>12} {:>12}", "j", "stationary", "simulated");
    let mut tv = 0.0;
    for j in 0..=14usize {
        let emp = hist.get(&(j as u32)).copied().unwrap_or(0) as f64 / reps as f64;
        tv += (emp - law.pi[j]).abs();
        println!("{j:>4} {:>12.6} {emp:>12.6}", law.pi[j]);
    }
    for (j, &p) in law.pi.iter().enumerate().skip(15) {
        let emp = hist.get(&(j as u32)).copied().unwrap_or(0) as f64 / reps as f64;
        tv += (emp - p).abs();
    }
    println!("\nstationary mean {:.4}, variance {:.4} (Poisson: both n₀)", law.mean, law.variance);
    println!("total variation distance after t = 30/λ_d: {:.4}", 0.5 * tv);
}

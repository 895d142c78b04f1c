//! Convergence-rate spectrum of the fixed-size moment flow. The two
//! eigenvalues have closed forms with large-population asymptotes
//! −(λ_g + λ_r) and −2 λ_r; this prints how fast each branch approaches
//! its asymptote as the population grows, and the special case λ_r = 0
//! where the conserved mean pins one eigenvalue at exactly zero.
//!
//! Run with `cargo run --example spectrum_report`.

use open_gossip::{spectrum, RatesConfig};

fn rates(lambda_g: f64, lambda_r: f64) -> RatesConfig {
    RatesConfig {
        lambda_g,
        lambda_r,
        sigma2: 1.0,
        ..Default::default()
    }
}

fn main() {
    for (lg, lr) in [(19.0, 1.0), (1.0, 1.0)] {
        println!("λ_g = {lg}, λ_r = {lr}:");
        println!(
            "{:>8} {:>14} {:>14} {:>12} {:>12}",
            "n", "r1", "r2", "gap to r1∞", "gap to r2∞"
        );
        for n in [2u32, 5, 10, 100, 1000, 10000] {
            let s = spectrum(n, &rates(lg, lr)).expect("valid parameters");
            println!(
                "{n:>8} {:>14.6} {:>14.6} {:>12.2e} {:>12.2e}",
                s.r1,
                s.r2,
                (s.r1 - s.r1_asymptote).abs(),
                (s.r2 - s.r2_asymptote).abs()
            );
        }
        println!();
    }

    println!("pure gossip (λ_r = 0) conserves the mean, so one mode never decays:");
    for n in [2u32, 10, 100] {
        let s = spectrum(n, &rates(5.0, 0.0)).expect("valid parameters");
        println!("  n = {n:>4}: r1 = {:.6}, r2 = {:?} (exact zero)", s.r1, s.r2);
    }
}

//! Exact expected-moment flow of a fixed-size system. The expected
//! descriptors follow a two-dimensional affine system dX/dt = M X + c
//! built from the per-event maps, so the whole transient is available in
//! closed form; a Monte Carlo ensemble is run alongside for comparison.
//!
//! Run with `cargo run --example fixed_size_moments`.

use open_gossip::{
    build_fixed_size_ode, fixed_point, run_ensemble, solve_ode, RatesConfig, SimMode, SimSetup,
};

fn main() {
    let n = 50;
    let rates = RatesConfig {
        lambda_g: 19.0,
        lambda_r: 1.0,
        sigma2: 1.0,
        ..Default::default()
    };

    let sys = build_fixed_size_ode(n, &rates).expect("valid fixed-size parameters");
    println!("dX/dt = M X + c with");
    println!("  M = [{:10.4} {:10.4}]", sys.m[0][0], sys.m[0][1]);
    println!("      [{:10.4} {:10.4}]", sys.m[1][0], sys.m[1][1]);
    println!("  c = [{:10.4} {:10.4}]\n", sys.c[0], sys.c[1]);

    let (sq, mos, var) = fixed_point(n, &rates).expect("replacements make the flow contractive");
    println!("stationary point: squared mean {sq:.6}, mean of squares {mos:.6}, variance {var:.6}\n");

    let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
    let exact = solve_ode(&sys, [rates.sigma2 / n as f64, rates.sigma2], &grid);
    let setup = SimSetup::new(SimMode::FixedSize { n }, rates);
    let stats = run_ensemble(&setup, 5.0, &grid, 2000, 42).expect("valid run");

    println!(
        "{:>5} {:>12} {:>12} {:>12} {:>12}",
        "t", "exact var", "mc var", "mc stderr", "deviation"
    );
    for (k, t) in grid.iter().enumerate() {
        let exact_var = exact[k][1] - exact[k][0];
        let mc = stats.mean[k].variance;
        let se = stats.std_error[k].variance;
        println!(
            "{t:>5.2} {exact_var:>12.6} {mc:>12.6} {se:>12.6} {:>11.2}σ",
            (mc - exact_var) / se
        );
    }
}

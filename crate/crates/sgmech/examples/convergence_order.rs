//! Deterministic-limit convergence sweep: the implicit midpoint integrator
//! is second order against the closed-form oscillator solution, and exact on
//! the free particle.
//!
//! ```sh
//! cargo run --example convergence_order
//! ```

use sgmech::scenario::{convergence_sweep, ScenarioConfig};

fn main() -> sgmech::Result<()> {
    let oscillator = ScenarioConfig::parse(
        "[system]\nname = harmonic_oscillator\n[run]\nexperiment = convergence\nq0 = 1.0\np0 = 0.0",
    )?;
    let table = convergence_sweep(&oscillator, &[100, 316, 1000, 3162, 10_000])?;
    println!("harmonic oscillator, |q(1) - cos 1|:");
    println!("  steps      dt          error");
    for row in &table.rows {
        println!("  {:>6}  {:.3e}  {:.6e}", row.steps, row.dt, row.error);
    }
    println!("  fitted order = {:.4}", table.fitted_order.unwrap());

    let free = ScenarioConfig::parse(
        "[system]\nname = free_particle\n[run]\nexperiment = convergence\nq0 = 0.0\np0 = 1.0",
    )?;
    let table = convergence_sweep(&free, &[100, 1000, 10_000])?;
    println!(
        "\nfree particle: exact = {} (errors at rounding level)",
        table.exact
    );
    Ok(())
}

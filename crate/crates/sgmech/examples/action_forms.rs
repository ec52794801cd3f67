//! The Hamilton-Pontryagin action evaluated in its local form and in its
//! intrinsic form (through the generalized energies) is the same finite sum
//! rearranged; the derivative of the action along a variation has a closed
//! form on polynomial examples.
//!
//! ```sh
//! cargo run --example action_forms
//! ```

use std::sync::Arc;

use sgmech::catalog;
use sgmech::integrators::{integrate_implicit_el, PontryaginPath};
use sgmech::mechanics::PontryaginState;
use sgmech::paths::{sample_noise, NoiseSpec, SamplePath, TimeGrid};
use sgmech::variational::{
    action_derivative, build_variation, evaluate_action_intrinsic, evaluate_action_local, TimeBump,
};

fn main() -> sgmech::Result<()> {
    let grid = Arc::new(TimeGrid::uniform(1.0, 1000)?);

    // local vs intrinsic on a noisy integrated solution
    let sys = catalog::planar_central_potential(1.0, 0.25, 0.5, 0.25, 0.0);
    let spec = NoiseSpec::time_and_brownian(1);
    let noise = sample_noise(&spec, &grid, 3)?;
    let path = integrate_implicit_el(&sys, &noise, &[1.0, 0.0], &[0.1, 0.9])?;
    let local = evaluate_action_local(&sys, &noise, &path, 1.0)?;
    let intrinsic = evaluate_action_intrinsic(&sys, &noise, &path, 1.0)?;
    println!("planar system, Brownian channel:");
    println!("  local action     = {local:+.12}");
    println!("  intrinsic action = {intrinsic:+.12}");
    println!("  difference       = {:.2e}", (local - intrinsic).abs());

    // closed-form action derivative: q = t^2 under L = v^2 / 2 with a sine
    // variation of q gives -4/pi
    let free = catalog::free_particle(1, 1.0);
    let time_noise = SamplePath::scalar_from_fn(Arc::clone(&grid), |t| t)?;
    let states: Vec<PontryaginState> = grid
        .nodes()
        .iter()
        .map(|&t| PontryaginState::new(vec![t * t], vec![2.0 * t], vec![2.0 * t]))
        .collect();
    let parabola = PontryaginPath::from_states(states, time_noise.clone())?;
    let field = build_variation(1.0, TimeBump::Sine, None, vec![1.0, 0.0, 0.0])?;
    let ev = field.evaluate(&parabola)?;
    let derivative = action_derivative(&free, &time_noise, &parabola, &ev, 1e-3)?;
    println!("\nfree particle along q = t^2, sine variation of q:");
    println!("  dS = {derivative:+.8}");
    println!("  -4/pi = {:+.8}", -4.0 / std::f64::consts::PI);
    Ok(())
}

//! Angular momentum along the rotationally invariant planar system with
//! rotation-equivariant noise, against a symmetry-broken control.
//!
//! ```sh
//! cargo run --example noether_drift
//! ```

use std::sync::Arc;

use sgmech::catalog;
use sgmech::integrators::integrate_implicit_el;
use sgmech::mechanics::VectorQ;
use sgmech::paths::{sample_noise, NoiseSpec, TimeGrid};
use sgmech::variational::{charge_drift, noether_charge};

fn main() -> sgmech::Result<()> {
    let grid = Arc::new(TimeGrid::uniform(1.0, 1000)?);
    let spec = NoiseSpec::time_and_brownian(1);
    let rotation: VectorQ = Arc::new(|q: &[f64]| vec![-q[1], q[0]]);

    println!("angular momentum drift <p, (-q2, q1)> over horizon 1:");
    for (label, asym) in [("symmetric       ", 0.0), ("symmetry-broken ", 0.5)] {
        let sys = catalog::planar_central_potential(1.0, 0.25, 0.5, 0.25, asym);
        for seed in 0..3u64 {
            let noise = sample_noise(&spec, &grid, seed)?;
            let path = integrate_implicit_el(&sys, &noise, &[1.0, 0.0], &[0.0, 1.0])?;
            let charge = noether_charge(&path, &rotation);
            println!(
                "  {label} seed {seed}: J(0) = {:+.4}, drift = {:.3e}",
                charge.scalar(0),
                charge_drift(&charge)
            );
        }
    }
    Ok(())
}

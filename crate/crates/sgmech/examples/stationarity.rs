//! The action is stationary along integrated solutions and visibly
//! non-stationary along a bump-perturbed control path: random localized
//! variation fields probe both.
//!
//! ```sh
//! cargo run --example stationarity
//! ```

use std::sync::Arc;

use sgmech::catalog;
use sgmech::integrators::{integrate_implicit_el, PontryaginPath};
use sgmech::mechanics::PontryaginState;
use sgmech::paths::{sample_noise, NoiseSpec, TimeGrid};
use sgmech::variational::stationarity_test;

fn main() -> sgmech::Result<()> {
    let grid = Arc::new(TimeGrid::uniform(1.0, 1000)?);
    let sys = catalog::planar_central_potential(1.0, 0.25, 0.5, 0.25, 0.0);
    let spec = NoiseSpec::time_and_brownian(1);
    let noise = sample_noise(&spec, &grid, 0)?;
    let path = integrate_implicit_el(&sys, &noise, &[1.0, 0.0], &[0.1, 0.9])?;

    let report = stationarity_test(&sys, &noise, &path, 200, 0, 1.0, 1e-3)?;
    println!(
        "solution path:  max |dS| = {:.3e} over {} random fields",
        report.max_abs_derivative,
        report.fields.len()
    );

    // add 0.1 sin(pi t) to every configuration coordinate
    let states: Vec<PontryaginState> = (0..path.len())
        .map(|i| {
            let s = path.state(i);
            let bump = 0.1 * (std::f64::consts::PI * grid.node(i)).sin();
            PontryaginState::new(
                s.q.iter().map(|x| x + bump).collect(),
                s.v.clone(),
                s.p.clone(),
            )
        })
        .collect();
    let perturbed = PontryaginPath::from_states(states, noise.clone())?;
    let report = stationarity_test(&sys, &noise, &perturbed, 200, 0, 1.0, 1e-3)?;
    println!(
        "perturbed path: max |dS| = {:.3e}",
        report.max_abs_derivative
    );

    let mut best = report.fields[0].clone();
    for f in &report.fields {
        if f.derivative.abs() > best.derivative.abs() {
            best = f.clone();
        }
    }
    println!(
        "strongest discriminating field: id {} (g = {}, blocks = {}, region = {}) with dS = {:+.4e}",
        best.field_id, best.g_kind, best.direction_blocks, best.region_kind, best.derivative
    );
    Ok(())
}

//! Discrete stochastic calculus on one Brownian path: the Ito and
//! Stratonovich integrals, their quadratic-covariation correction, and the
//! chain rule error under step refinement.
//!
//! ```sh
//! cargo run --example stratonovich_identities
//! ```

use std::sync::Arc;

use sgmech::calculus::{ito_integral, quadratic_covariation, stratonovich_integral};
use sgmech::paths::{sample_noise, NoiseComponent, NoiseSpec, SamplePath, TimeGrid};

fn main() -> sgmech::Result<()> {
    let grid = Arc::new(TimeGrid::uniform(1.0, 10_000)?);
    let spec = NoiseSpec::new(vec![NoiseComponent::Brownian { scale: 1.0 }])?;
    let b = sample_noise(&spec, &grid, 42)?;

    let ito = ito_integral(&b, &b)?;
    let strat = stratonovich_integral(&b, &b)?;
    let qv = quadratic_covariation(&b, &b)?;
    let closed = 0.5 * (b.scalar(10_000).powi(2) - b.scalar(0).powi(2));

    println!("int B dB   (Ito)          = {:+.6}", ito.total);
    println!("int B o dB (Stratonovich) = {:+.6}", strat.total);
    println!("(B_T^2 - B_0^2) / 2       = {closed:+.6}");
    println!("[B, B]_T                  = {:+.6}  (expect ~1)", qv.total);
    println!(
        "conversion defect |strat - ito - qv/2| = {:.2e}",
        (strat.total - ito.total - 0.5 * qv.total).abs()
    );

    // chain rule for f(x) = x^3 under dt-halving on the same path
    println!("\nchain-rule error |int 3 B^2 o dB - B_T^3|:");
    for level in [4usize, 2, 1] {
        let steps = 10_000 / level;
        let g = Arc::new(TimeGrid::uniform(1.0, steps)?);
        let data: Vec<f64> = (0..=steps).map(|i| b.scalar(i * level)).collect();
        let x = SamplePath::new(Arc::clone(&g), 1, data)?;
        let fp: Vec<f64> = (0..=steps).map(|i| 3.0 * x.scalar(i).powi(2)).collect();
        let fprime = SamplePath::new(Arc::clone(&g), 1, fp)?;
        let total = stratonovich_integral(&fprime, &x)?.total;
        let exact = x.scalar(steps).powi(3) - x.scalar(0).powi(3);
        println!(
            "  dt = {:.0e}: error = {:.3e}",
            1.0 / steps as f64,
            (total - exact).abs()
        );
    }
    Ok(())
}

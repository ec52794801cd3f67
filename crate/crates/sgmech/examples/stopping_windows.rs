//! First hitting times, first exit times, hit-exit windows, and stopped
//! processes of a Brownian path relative to a closed region.
//!
//! ```sh
//! cargo run --example stopping_windows
//! ```

use std::sync::Arc;

use sgmech::paths::{
    first_exit_time, first_hitting_time, hit_exit_window, sample_noise, stop_path, NoiseComponent,
    NoiseSpec, Region, TimeGrid,
};

fn main() -> sgmech::Result<()> {
    let grid = Arc::new(TimeGrid::uniform(1.0, 1000)?);
    let spec = NoiseSpec::new(vec![NoiseComponent::Brownian { scale: 1.0 }])?;
    let region = Region::ball(vec![0.5], 0.25)?;

    for seed in 0..6u64 {
        let b = sample_noise(&spec, &grid, seed)?;
        let tau_h = first_hitting_time(&b, &region);
        let tau_e = first_exit_time(&b, &region);
        let w = hit_exit_window(&b, &region);
        print!("seed {seed}: hit = {tau_h:>4}, exit-from-region = {tau_e:>4}, window = ");
        match w.closed_nodes(b.len()) {
            Some((lo, hi)) => {
                println!(
                    "[{lo}, {hi}] (t in [{:.3}, {:.3}], dwell {})",
                    grid.node(lo),
                    grid.node(hi),
                    w.tau_dwell
                );
                let stopped = stop_path(&b, w.window_end());
                println!(
                    "          stopped at window end: B(1) = {:+.4} frozen from {:+.4}",
                    stopped.scalar(1000),
                    b.scalar(hi.min(1000))
                );
            }
            None => println!("never hits"),
        }
    }
    Ok(())
}

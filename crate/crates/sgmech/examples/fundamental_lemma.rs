//! The discrete fundamental-lemma harness: pairings of localized variations
//! against the increments of a path functional detect whether the functional
//! is flat on the stopping-time window.
//!
//! ```sh
//! cargo run --example fundamental_lemma
//! ```

use std::sync::Arc;

use sgmech::integrators::PontryaginPath;
use sgmech::mechanics::PontryaginState;
use sgmech::paths::{Region, SamplePath, TimeGrid};
use sgmech::variational::fundamental_lemma_test;

fn path_of(
    grid: &Arc<TimeGrid>,
    noise: &SamplePath,
    q: impl Fn(f64) -> f64,
) -> sgmech::Result<PontryaginPath> {
    let states = grid
        .nodes()
        .iter()
        .map(|&t| PontryaginState::new(vec![q(t)], vec![1.0], vec![1.0]))
        .collect();
    PontryaginPath::from_states(states, noise.clone())
}

fn main() -> sgmech::Result<()> {
    let grid = Arc::new(TimeGrid::uniform(1.0, 1000)?);
    let time_noise = SamplePath::scalar_from_fn(Arc::clone(&grid), |t| t)?;

    // Xi_t = int_0^t (q_s - s) ds, cumulated with the shared midpoint rule
    let xi_for = |path: &PontryaginPath| -> sgmech::Result<SamplePath> {
        let mut acc = 0.0;
        let mut data = vec![0.0];
        for i in 0..grid.steps() {
            let (t0, t1) = (grid.node(i), grid.node(i + 1));
            let f0 = path.state(i).q[0] - t0;
            let f1 = path.state(i + 1).q[0] - t1;
            acc += 0.5 * (f0 + f1) * (t1 - t0);
            data.push(acc);
        }
        SamplePath::new(Arc::clone(&grid), 1, data)
    };

    // along q = t the functional is identically zero: all pairings vanish
    let line = path_of(&grid, &time_noise, |t| t)?;
    let report = fundamental_lemma_test(&xi_for(&line)?, &line, None, 1.0, 30, 7)?;
    println!(
        "q = t   : max |Xi increment| = {:.2e}, max |pairing| = {:.2e}  (flat functional)",
        report.max_xi_increment, report.max_abs_pairing
    );

    // along q = t^2 it is not flat, and the pairings say so
    let parabola = path_of(&grid, &time_noise, |t| t * t)?;
    let report = fundamental_lemma_test(&xi_for(&parabola)?, &parabola, None, 1.0, 30, 7)?;
    println!(
        "q = t^2 : max |Xi increment| = {:.2e}, max |pairing| = {:.2e}  (non-flat functional)",
        report.max_xi_increment, report.max_abs_pairing
    );
    println!(
        "          closed-form sine pairing reference: -4/pi^3 = {:+.6}",
        -4.0 / std::f64::consts::PI.powi(3)
    );

    // stopping-time localization: pairings restricted to the window of a box
    let region = Region::box_set(vec![0.3], vec![0.6])?;
    let report = fundamental_lemma_test(&xi_for(&line)?, &line, Some(&region), 1.0, 30, 7)?;
    let w = report.window.unwrap();
    println!(
        "box [0.3, 0.6] window on q = t: nodes [{}, {}], vacuous = {}, max |pairing| = {:.2e}",
        w.tau_hit,
        w.window_end(),
        report.vacuous,
        report.max_abs_pairing
    );

    // a region the path never reaches gives a vacuous report
    let far = Region::ball(vec![10.0], 0.5)?;
    let report = fundamental_lemma_test(&xi_for(&line)?, &line, Some(&far), 1.0, 30, 7)?;
    println!("far-away ball: vacuous = {}", report.vacuous);
    Ok(())
}

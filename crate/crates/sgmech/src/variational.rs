//! Deformation families, stopping-time-localized variations, the pathwise
//! Hamilton-Pontryagin action in local and intrinsic form, numerical action
//! derivatives, Noether charges, and the fundamental-lemma harness.
//!
//! A variation field is built from a time bump `g` supported in `(0, T)`, a
//! spatial bump `h` that is 1 on a shrunken copy of the region `K` and 0
//! outside it, and a direction among the `3n` Pontryagin coordinates.
//! Evaluating the field on a trajectory produces the discrete `delta Gamma`,
//! which is hard-masked to vanish at every node outside the open hit-exit
//! window of the trajectory's `q` component for `K`, so the support
//! invariants hold node-exactly even though grid paths overshoot region
//! boundaries. Deformations are Euclidean shifts `Gamma + eps * delta Gamma`.
//!
//! Smooth bumps are polynomial smoothsteps rather than `exp(-1/x)` bumps,
//! which avoids denormal underflow near the support boundary; piecewise
//! `C^2` smoothness is enough at grid resolution.

use std::fmt;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::integral_over_window;
use crate::error::{Error, Result};
use crate::integrators::PontryaginPath;
use crate::linalg;
use crate::mechanics::{LagrangianSystem, PontryaginState, VectorQ};
use crate::paths::{hit_exit_window, Region, SamplePath, StoppingTimes};

/// Time-bump kinds for variation fields, all supported in `(0, T)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeBump {
    /// `(4 t (T - t) / T^2)^2`, normalized to peak 1 at `T / 2`.
    PolyBump,
    /// `sin(pi t / T)`.
    Sine,
    /// Quintic smoothstep up on `[0, T/5]`, 1 on `[T/5, 4T/5]`, down on
    /// `[4T/5, T]`.
    SmoothedIndicator,
}

impl fmt::Display for TimeBump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TimeBump::PolyBump => "poly-bump",
            TimeBump::Sine => "sine",
            TimeBump::SmoothedIndicator => "indicator-smoothed",
        };
        write!(f, "{s}")
    }
}

/// Quintic smoothstep `u^3 (6u^2 - 15u + 10)` clamped to `[0, 1]`.
fn smoothstep5(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u * u * u * (6.0 * u * u - 15.0 * u + 10.0)
    }
}

fn time_bump_value(kind: TimeBump, t: f64, t_final: f64) -> f64 {
    if t <= 0.0 || t >= t_final {
        return 0.0;
    }
    match kind {
        TimeBump::PolyBump => {
            let s = 4.0 * t * (t_final - t) / (t_final * t_final);
            s * s
        }
        TimeBump::Sine => (std::f64::consts::PI * t / t_final).sin(),
        TimeBump::SmoothedIndicator => {
            let ramp = t_final / 5.0;
            if t < ramp {
                smoothstep5(t / ramp)
            } else if t > t_final - ramp {
                smoothstep5((t_final - t) / ramp)
            } else {
                1.0
            }
        }
    }
}

/// Spatial bump: 1 on the inner 80% of the region, 0 outside it, quintic
/// smoothstep in between.
fn spatial_bump(region: &Region, x: &[f64]) -> f64 {
    match region {
        Region::Ball { center, radius } => {
            let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
            let s = d2.sqrt() / radius;
            smoothstep5((1.0 - s) / 0.2)
        }
        Region::Box { lo, hi } => {
            let mut h = 1.0;
            for ((v, a), b) in x.iter().zip(lo).zip(hi) {
                let xi = (v - a) / (b - a);
                let margin = xi.min(1.0 - xi);
                h *= smoothstep5(margin / 0.1);
            }
            h
        }
        Region::Sublevel { f, level } => {
            let margin = 0.2 * level.abs().max(1.0);
            smoothstep5((level - f(x)) / margin)
        }
    }
}

/// A `(K, T)`-localized variation field on the Pontryagin bundle chart.
#[derive(Clone)]
pub struct VariationField {
    t_final: f64,
    bump: TimeBump,
    region: Option<Region>,
    /// Magnitudes over the `3n` coordinates `(q, v, p)`; zero entries leave
    /// the coordinate untouched.
    direction: Vec<f64>,
}

/// Build a variation field. `t_final` is checked against the grid when the
/// field is evaluated on a trajectory; the direction selects which of the
/// `3n` Pontryagin coordinates receive the bump.
pub fn build_variation(
    t_final: f64,
    bump: TimeBump,
    region: Option<Region>,
    direction: Vec<f64>,
) -> Result<VariationField> {
    if t_final <= 0.0 || !t_final.is_finite() {
        return Err(Error::invalid(format!(
            "variation final time must be positive, got {t_final}"
        )));
    }
    if direction.iter().all(|d| *d == 0.0) {
        return Err(Error::invalid("variation direction is identically zero"));
    }
    Ok(VariationField {
        t_final,
        bump,
        region,
        direction,
    })
}

impl VariationField {
    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn bump(&self) -> TimeBump {
        self.bump
    }

    pub fn region(&self) -> Option<&Region> {
        self.region.as_ref()
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    /// Evaluate the field along a trajectory:
    /// `delta_i = g(t_i) h(q_i) * direction`, hard-masked to 0 at every node
    /// outside the open hit-exit window of the `q` path for the region.
    pub fn evaluate(&self, path: &PontryaginPath) -> Result<EvaluatedVariation> {
        let grid = path.grid();
        let horizon = grid.horizon();
        if self.t_final > horizon * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "variation final time {} exceeds the grid horizon {horizon}",
                self.t_final
            )));
        }
        let n = path.n();
        if self.direction.len() != 3 * n {
            return Err(Error::invalid(format!(
                "direction has {} entries, expected 3n = {}",
                self.direction.len(),
                3 * n
            )));
        }
        let window = self.region.as_ref().map(|region| {
            let q = path.q_path();
            hit_exit_window(&q, region)
        });
        let mut data = Vec::with_capacity(path.len() * 3 * n);
        for i in 0..path.len() {
            let masked = match &window {
                Some(w) => !w.contains_open(i),
                None => false,
            };
            if masked {
                data.resize(data.len() + 3 * n, 0.0);
                continue;
            }
            let g = time_bump_value(self.bump, grid.node(i), self.t_final);
            if g == 0.0 {
                data.resize(data.len() + 3 * n, 0.0);
                continue;
            }
            let h = match &self.region {
                Some(region) => spatial_bump(region, &path.state(i).q),
                None => 1.0,
            };
            let scale = g * h;
            data.extend(self.direction.iter().map(|d| scale * d));
        }
        let delta = SamplePath::new(Arc::clone(grid), 3 * n, data)?;
        Ok(EvaluatedVariation { delta, window })
    }
}

/// The discrete `delta Gamma` of a variation field over a fixed trajectory.
#[derive(Clone, Debug)]
pub struct EvaluatedVariation {
    delta: SamplePath,
    window: Option<StoppingTimes>,
}

impl EvaluatedVariation {
    /// Wrap a raw `d = 3n` displacement path (no window localization).
    pub fn from_delta(delta: SamplePath) -> EvaluatedVariation {
        EvaluatedVariation {
            delta,
            window: None,
        }
    }

    pub fn delta(&self) -> &SamplePath {
        &self.delta
    }

    /// Hit-exit window of the underlying trajectory when the field carries a
    /// region.
    pub fn window(&self) -> Option<&StoppingTimes> {
        self.window.as_ref()
    }
}

/// Euclidean shift: states displaced by `eps * delta Gamma` componentwise.
/// `eps = 0` returns an identical trajectory.
pub fn deform(
    path: &PontryaginPath,
    variation: &EvaluatedVariation,
    eps: f64,
) -> Result<PontryaginPath> {
    let n = path.n();
    let delta = &variation.delta;
    if !delta.same_grid(path.noise()) {
        return Err(Error::GridMismatch(
            "variation was evaluated on a different grid".into(),
        ));
    }
    if delta.dim() != 3 * n {
        return Err(Error::invalid(format!(
            "variation dimension {} does not match 3n = {}",
            delta.dim(),
            3 * n
        )));
    }
    let mut states = Vec::with_capacity(path.len());
    for i in 0..path.len() {
        let s = path.state(i);
        let d = delta.at(i);
        let shift = |base: &[f64], block: usize| -> Vec<f64> {
            base.iter()
                .enumerate()
                .map(|(c, x)| x + eps * d[block * n + c])
                .collect()
        };
        states.push(PontryaginState::new(
            shift(&s.q, 0),
            shift(&s.v, 1),
            shift(&s.p, 2),
        ));
    }
    PontryaginPath::from_states(states, path.noise().clone())
}

/// A deformation family `eps -> Gamma + eps * delta Gamma` with the epsilon
/// schedule used for difference quotients.
#[derive(Clone)]
pub struct DeformationFamily {
    base: PontryaginPath,
    variation: EvaluatedVariation,
    epsilons: Vec<f64>,
}

impl DeformationFamily {
    pub fn new(
        base: PontryaginPath,
        variation: EvaluatedVariation,
        epsilons: Vec<f64>,
    ) -> DeformationFamily {
        DeformationFamily {
            base,
            variation,
            epsilons,
        }
    }

    pub fn base(&self) -> &PontryaginPath {
        &self.base
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn at(&self, eps: f64) -> Result<PontryaginPath> {
        deform(&self.base, &self.variation, eps)
    }
}

fn scalar_path_from<F>(path: &PontryaginPath, f: F) -> SamplePath
where
    F: Fn(&PontryaginState) -> f64,
{
    let data: Vec<f64> = path.states().iter().map(f).collect();
    SamplePath::new(Arc::clone(path.grid()), 1, data).expect("finite states")
}

fn check_action_inputs(
    sys: &LagrangianSystem,
    noise: &SamplePath,
    path: &PontryaginPath,
    t_final: f64,
) -> Result<usize> {
    if !noise.same_grid(path.noise()) {
        return Err(Error::GridMismatch(
            "noise and trajectory live on different grids".into(),
        ));
    }
    if noise.dim() != sys.k() + 1 {
        return Err(Error::invalid(format!(
            "noise has {} components but the system needs {}",
            noise.dim(),
            sys.k() + 1
        )));
    }
    if path.n() != sys.n() {
        return Err(Error::invalid(format!(
            "trajectory dimension {} does not match the system dimension {}",
            path.n(),
            sys.n()
        )));
    }
    if t_final > path.grid().horizon() * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "final time {t_final} exceeds the grid horizon {}",
            path.grid().horizon()
        )));
    }
    path.grid().last_node_at_or_before(t_final)
}

/// Hamilton-Pontryagin action on `[0, T]` in local form:
///
/// ```text
/// int L(q, v) o dX^0 + sum_i L_i(q) o dX^i
///   + < p, o dq - v o dX^0 - sum_i V_i(q) o dX^i >
/// ```
///
/// with every pairing discretized by the shared midpoint rule. `T` resolves
/// to the last grid node at or before it.
pub fn evaluate_action_local(
    sys: &LagrangianSystem,
    noise: &SamplePath,
    path: &PontryaginPath,
    t_final: f64,
) -> Result<f64> {
    let upto = check_action_inputs(sys, noise, path, t_final)?;
    let window = Some((0, upto));
    let n = sys.n();

    let mut total = 0.0;
    let lagrangian = scalar_path_from(path, |s| sys.lagrangian(&s.q, &s.v));
    let x0 = noise.component(0);
    total += integral_over_window(&lagrangian, &x0, window)?;

    for j in 1..=sys.k() {
        let pot = scalar_path_from(path, |s| (sys.channel(j).potential)(&s.q));
        let xj = noise.component(j);
        total += integral_over_window(&pot, &xj, window)?;
    }

    // < p, o dq >
    for c in 0..n {
        let p_c = scalar_path_from(path, |s| s.p[c]);
        let q_c = scalar_path_from(path, |s| s.q[c]);
        total += integral_over_window(&p_c, &q_c, window)?;
    }

    // - < p, v > o dX^0
    let pv = scalar_path_from(path, |s| linalg::dot(&s.p, &s.v));
    total -= integral_over_window(&pv, &x0, window)?;

    // - < p, V_i(q) > o dX^i
    for j in 1..=sys.k() {
        let pvj = scalar_path_from(path, |s| linalg::dot(&s.p, &(sys.channel(j).field)(&s.q)));
        let xj = noise.component(j);
        total -= integral_over_window(&pvj, &xj, window)?;
    }
    Ok(total)
}

/// Hamilton-Pontryagin action on `[0, T]` in intrinsic form:
/// `int < p, o dq > - sum_{j=0}^{k} int E_j(Gamma) o dX^j`,
/// the same finite sum as [`evaluate_action_local`] rearranged through the
/// generalized energies.
pub fn evaluate_action_intrinsic(
    sys: &LagrangianSystem,
    noise: &SamplePath,
    path: &PontryaginPath,
    t_final: f64,
) -> Result<f64> {
    let upto = check_action_inputs(sys, noise, path, t_final)?;
    let window = Some((0, upto));
    let n = sys.n();

    let mut total = 0.0;
    for c in 0..n {
        let p_c = scalar_path_from(path, |s| s.p[c]);
        let q_c = scalar_path_from(path, |s| s.q[c]);
        total += integral_over_window(&p_c, &q_c, window)?;
    }

    // E_0 = < p, v > - L
    let e0 = scalar_path_from(path, |s| {
        linalg::dot(&s.p, &s.v) - sys.lagrangian(&s.q, &s.v)
    });
    let x0 = noise.component(0);
    total -= integral_over_window(&e0, &x0, window)?;

    // E_j = < p, V_j(q) > - L_j(q)
    for j in 1..=sys.k() {
        let ch = sys.channel(j);
        let ej = scalar_path_from(path, |s| {
            linalg::dot(&s.p, &(ch.field)(&s.q)) - (ch.potential)(&s.q)
        });
        let xj = noise.component(j);
        total -= integral_over_window(&ej, &xj, window)?;
    }
    Ok(total)
}

/// Richardson-extrapolated central difference of the action along a
/// deformation family:
/// `(4 D(eps/2) - D(eps)) / 3` with `D(e) = (S(+e) - S(-e)) / 2e`.
///
/// The deformation is affine in `eps`, so for polynomial systems the
/// extrapolation error is `O(eps^4)`. The action is evaluated over the full
/// grid horizon; the variation's final time enters through its support, and
/// everything it leaves untouched differentiates to zero.
pub fn action_derivative(
    sys: &LagrangianSystem,
    noise: &SamplePath,
    path: &PontryaginPath,
    variation: &EvaluatedVariation,
    eps0: f64,
) -> Result<f64> {
    if eps0 <= 0.0 || !eps0.is_finite() {
        return Err(Error::invalid(format!(
            "epsilon must be positive, got {eps0}"
        )));
    }
    let t_final = path.grid().horizon();
    let action_at = |eps: f64| -> Result<f64> {
        let deformed = deform(path, variation, eps)?;
        evaluate_action_local(sys, noise, &deformed, t_final)
    };
    let d1 = (action_at(eps0)? - action_at(-eps0)?) / (2.0 * eps0);
    let d2 = (action_at(eps0 / 2.0)? - action_at(-eps0 / 2.0)?) / eps0;
    Ok((4.0 * d2 - d1) / 3.0)
}

/// One sampled variation field and its action derivative.
#[derive(Clone, Debug)]
pub struct FieldDerivative {
    pub field_id: usize,
    pub g_kind: TimeBump,
    /// Which Pontryagin blocks carry the direction, e.g. `"qp"`.
    pub direction_blocks: String,
    /// `"none"` or `"ball"`.
    pub region_kind: String,
    pub derivative: f64,
}

/// Stationarity report: per-field action derivatives and their maximum.
#[derive(Clone, Debug)]
pub struct StationarityReport {
    pub fields: Vec<FieldDerivative>,
    pub max_abs_derivative: f64,
}

impl StationarityReport {
    /// CSV dump: `field_id, g_kind, direction, K_kind, derivative` plus a
    /// summary row.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "field_id, g_kind, direction, K_kind, derivative")?;
        for f in &self.fields {
            writeln!(
                out,
                "{}, {}, {}, {}, {:.15e}",
                f.field_id, f.g_kind, f.direction_blocks, f.region_kind, f.derivative
            )?;
        }
        writeln!(out, "max, , , , {:.15e}", self.max_abs_derivative)?;
        Ok(())
    }
}

const STATIONARITY_STREAM_TAG: u64 = 0x5354_4154;

fn field_rng(seed: u64, field_id: usize) -> ChaCha8Rng {
    let mixed = crate::paths::NoiseSpec::component_seed(seed ^ STATIONARITY_STREAM_TAG, field_id);
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Draw one random admissible variation field for a trajectory: random
/// direction among the `q`/`v`/`p` blocks, random time bump, and an optional
/// random ball region centered near the path.
fn random_field(
    rng: &mut ChaCha8Rng,
    path: &PontryaginPath,
    t_final: f64,
) -> Result<(VariationField, String, String)> {
    let n = path.n();
    let g_kind = match rng.random_range(0..3u32) {
        0 => TimeBump::PolyBump,
        1 => TimeBump::Sine,
        _ => TimeBump::SmoothedIndicator,
    };
    let mask = rng.random_range(1..8u32); // at least one of q, v, p
    let mut direction = vec![0.0; 3 * n];
    let mut blocks = String::new();
    for (block, name) in [(0, 'q'), (1, 'v'), (2, 'p')] {
        if mask & (1 << block) != 0 {
            blocks.push(name);
            for c in 0..n {
                direction[block * n + c] = rng.random_range(-1.0..1.0);
            }
        }
    }
    let max = linalg::max_abs(&direction);
    if max < 1e-3 {
        direction[(mask.trailing_zeros() as usize) * n] = 1.0;
    } else {
        for d in &mut direction {
            *d /= max;
        }
    }

    let region = if rng.random_range(0..2u32) == 1 {
        // ball centered near a random node of the q path
        let node = rng.random_range(0..path.len());
        let q = &path.state(node).q;
        let mut span = 0.0f64;
        for c in 0..n {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for s in path.states() {
                lo = lo.min(s.q[c]);
                hi = hi.max(s.q[c]);
            }
            span = span.max(hi - lo);
        }
        let scale = span + 0.1;
        let center: Vec<f64> = q
            .iter()
            .map(|x| x + 0.1 * scale * rng.random_range(-1.0..1.0))
            .collect();
        let radius = scale * rng.random_range(0.3..1.0);
        Some(Region::ball(center, radius)?)
    } else {
        None
    };
    let kind = if region.is_some() { "ball" } else { "none" };
    let field = build_variation(t_final, g_kind, region, direction)?;
    Ok((field, blocks, kind.to_string()))
}

/// Generate `n_fields` random admissible variation fields and return the
/// action derivative along each. All fields satisfy `delta q = 0` at
/// `t = 0` and `t = T` by construction.
pub fn stationarity_test(
    sys: &LagrangianSystem,
    noise: &SamplePath,
    path: &PontryaginPath,
    n_fields: usize,
    seed: u64,
    t_final: f64,
    eps0: f64,
) -> Result<StationarityReport> {
    if n_fields == 0 {
        return Err(Error::invalid("stationarity test needs at least one field"));
    }
    check_action_inputs(sys, noise, path, t_final)?;
    let mut fields = Vec::with_capacity(n_fields);
    let mut max_abs: f64 = 0.0;
    for field_id in 0..n_fields {
        let mut rng = field_rng(seed, field_id);
        let (field, blocks, region_kind) = random_field(&mut rng, path, t_final)?;
        let evaluated = field.evaluate(path)?;
        let derivative = action_derivative(sys, noise, path, &evaluated, eps0)?;
        max_abs = max_abs.max(derivative.abs());
        fields.push(FieldDerivative {
            field_id,
            g_kind: field.bump(),
            direction_blocks: blocks,
            region_kind,
            derivative,
        });
    }
    Ok(StationarityReport {
        fields,
        max_abs_derivative: max_abs,
    })
}

/// Noether charge `< p_t, generator(q_t) >` along a trajectory, returned as
/// a scalar path. Along solutions of symmetric systems this is conserved.
pub fn noether_charge(path: &PontryaginPath, generator: &VectorQ) -> SamplePath {
    scalar_path_from(path, |s| linalg::dot(&s.p, &generator(&s.q)))
}

/// Largest deviation of the charge from its initial value.
pub fn charge_drift(charge: &SamplePath) -> f64 {
    let c0 = charge.scalar(0);
    (0..charge.len()).fold(0.0f64, |m, i| m.max((charge.scalar(i) - c0).abs()))
}

/// Report of the fundamental-lemma harness.
#[derive(Clone, Debug)]
pub struct FundamentalLemmaReport {
    /// `int_window < delta Gamma, o d Xi >` for each generated variation.
    pub pairings: Vec<f64>,
    pub max_abs_pairing: f64,
    /// Direct flatness check: max over open-window nodes of
    /// `|Xi_i - Xi_ref|` (max norm), the ground truth for the conclusion.
    pub max_xi_increment: f64,
    /// Set when the region window is empty; all pairings are zero then.
    pub vacuous: bool,
    pub window: Option<StoppingTimes>,
}

const LEMMA_STREAM_TAG: u64 = 0x4c45_4d4d;

/// Pair `n_fields` generated `(region, T)`-variations of the base trajectory
/// against the increments of `xi` over the open hit-exit window of the base
/// `q` path (the whole grid when `region` is `None`).
///
/// Directions are drawn among the first `m = dim(xi)` Pontryagin coordinates
/// in the `(q, v, p)` ordering. Boundary increments of the window are
/// excluded, matching the open-interval convention of the window integrals.
pub fn fundamental_lemma_test(
    xi: &SamplePath,
    base: &PontryaginPath,
    region: Option<&Region>,
    t_final: f64,
    n_fields: usize,
    seed: u64,
) -> Result<FundamentalLemmaReport> {
    if n_fields == 0 {
        return Err(Error::invalid(
            "fundamental-lemma test needs at least one field",
        ));
    }
    if !xi.same_grid(base.noise()) {
        return Err(Error::GridMismatch(
            "xi and the base trajectory live on different grids".into(),
        ));
    }
    let n = base.n();
    let m = xi.dim();
    if m > 3 * n {
        return Err(Error::invalid(format!(
            "xi has {m} components but the Pontryagin chart has only {}",
            3 * n
        )));
    }

    let n_nodes = base.len();
    let (window, pairing_nodes, ref_node) = match region {
        Some(reg) => {
            let w = hit_exit_window(&base.q_path(), reg);
            let nodes = w.open_nodes(n_nodes);
            let reference = w.tau_hit.index();
            (Some(w), nodes, reference)
        }
        None => (None, Some((0, n_nodes - 1)), Some(0)),
    };

    if pairing_nodes.is_none() || ref_node.is_none() {
        return Ok(FundamentalLemmaReport {
            pairings: vec![0.0; n_fields],
            max_abs_pairing: 0.0,
            max_xi_increment: 0.0,
            vacuous: true,
            window,
        });
    }
    let (lo, hi) = pairing_nodes.unwrap();
    let reference = ref_node.unwrap();

    let mut max_xi_increment = 0.0f64;
    let xi_ref = xi.at(reference).to_vec();
    for i in lo..=hi {
        let row = xi.at(i);
        for c in 0..m {
            max_xi_increment = max_xi_increment.max((row[c] - xi_ref[c]).abs());
        }
    }

    // a window lying entirely beyond T carries no variation support and
    // pairs to zero
    let upto = base.grid().last_node_at_or_before(t_final)?;
    let hi_clamped = hi.min(upto);
    let pairing_window = (lo <= hi_clamped).then_some((lo, hi_clamped));

    let mut pairings = Vec::with_capacity(n_fields);
    let mut max_abs: f64 = 0.0;
    for field_id in 0..n_fields {
        let mut rng = field_rng(seed ^ LEMMA_STREAM_TAG, field_id);
        let g_kind = match rng.random_range(0..3u32) {
            0 => TimeBump::PolyBump,
            1 => TimeBump::Sine,
            _ => TimeBump::SmoothedIndicator,
        };
        let mut direction = vec![0.0; 3 * n];
        for d in direction.iter_mut().take(m) {
            *d = rng.random_range(-1.0..1.0);
        }
        let max = linalg::max_abs(&direction);
        if max < 1e-3 {
            direction[0] = 1.0;
        } else {
            for d in &mut direction {
                *d /= max;
            }
        }
        let field = build_variation(t_final, g_kind, region.cloned(), direction)?;
        let evaluated = field.evaluate(base)?;
        let mut pairing = 0.0;
        for c in 0..m {
            let delta_c = evaluated.delta().component(c);
            let xi_c = xi.component(c);
            pairing += integral_over_window(&delta_c, &xi_c, pairing_window)?;
        }
        max_abs = max_abs.max(pairing.abs());
        pairings.push(pairing);
    }

    Ok(FundamentalLemmaReport {
        pairings,
        max_abs_pairing: max_abs,
        max_xi_increment,
        vacuous: false,
        window,
    })
}

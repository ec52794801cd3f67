//! Discrete sample paths, noise generation, stopping times and stopped processes.
//!
//! A [`SamplePath`] stores one realization of a vector-valued continuous
//! semimartingale at the nodes of a [`TimeGrid`], understood as piecewise
//! linear in between. Stopping times are resolved at grid nodes only; the
//! induced O(dt) bias is accounted for in the tolerances of everything built
//! on top. Regions are always interpreted as closed sets so that hitting and
//! exit times of continuous paths are predictable.
//!
//! All values are immutable after construction and the operations here are
//! pure functions, so paths can be generated and processed in parallel across
//! seeds without shared state.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Relative tolerance used to classify a grid as uniform.
const UNIFORM_REL_TOL: f64 = 1e-12;

/// A deterministic scalar function of time.
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// A scalar function of a point, used for sublevel-set regions.
pub type LevelFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// An ordered grid of times `0 = t_0 < t_1 < ... < t_N = horizon`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    /// `Some(dt)` when every gap equals `dt` to within one part in 1e12.
    step: Option<f64>,
}

impl TimeGrid {
    /// Uniform grid with nodes `j * horizon / steps`, `j = 0..=steps`.
    pub fn uniform(horizon: f64, steps: usize) -> Result<TimeGrid> {
        if horizon <= 0.0 || !horizon.is_finite() {
            return Err(Error::invalid(format!(
                "grid horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps < 2 {
            return Err(Error::invalid(format!(
                "grid needs at least 2 steps, got {steps}"
            )));
        }
        let nodes: Vec<f64> = (0..=steps)
            .map(|j| j as f64 * horizon / steps as f64)
            .collect();
        let step = horizon / steps as f64;
        Ok(TimeGrid {
            nodes,
            step: Some(step),
        })
    }

    /// Grid from explicit nodes. Requires `t_0 = 0`, strictly increasing
    /// nodes and at least two steps. Detects uniformity.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<TimeGrid> {
        if nodes.len() < 3 {
            return Err(Error::invalid(format!(
                "grid needs at least 3 nodes, got {}",
                nodes.len()
            )));
        }
        if nodes[0] != 0.0 {
            return Err(Error::invalid(format!(
                "grid must start at t = 0, got {}",
                nodes[0]
            )));
        }
        for w in nodes.windows(2) {
            if w[1] <= w[0] || !w[1].is_finite() {
                return Err(Error::invalid(format!(
                    "grid nodes must be strictly increasing and finite, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        let steps = nodes.len() - 1;
        let dt = nodes[steps] / steps as f64;
        let uniform = nodes
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= UNIFORM_REL_TOL * dt);
        Ok(TimeGrid {
            nodes,
            step: uniform.then_some(dt),
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// `Some(dt)` for uniform grids.
    pub fn uniform_step(&self) -> Option<f64> {
        self.step
    }

    /// Node-for-node equality; two independently built uniform grids with the
    /// same parameters compare equal.
    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.nodes == other.nodes
    }

    /// Largest index `j` with `t_j <= t` (up to a relative slack of 1e-12),
    /// used to resolve a final time `T` to the grid.
    pub fn last_node_at_or_before(&self, t: f64) -> Result<usize> {
        let slack = 1e-12 * self.horizon().max(1.0);
        if t < -slack {
            return Err(Error::invalid(format!("time {t} precedes the grid")));
        }
        let mut idx = 0;
        for (j, &tj) in self.nodes.iter().enumerate() {
            if tj <= t + slack {
                idx = j;
            } else {
                break;
            }
        }
        Ok(idx)
    }
}

/// One realization of a vector-valued semimartingale on a time grid.
///
/// Values are stored row-major, one `dim`-sized row per node. Paths are
/// immutable after construction; deformation produces new paths.
#[derive(Clone, Debug)]
pub struct SamplePath {
    grid: Arc<TimeGrid>,
    dim: usize,
    data: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: Arc<TimeGrid>, dim: usize, data: Vec<f64>) -> Result<SamplePath> {
        if dim == 0 {
            return Err(Error::invalid("path dimension must be at least 1"));
        }
        if data.len() != grid.len() * dim {
            return Err(Error::invalid(format!(
                "path data length {} does not match {} nodes x dim {}",
                data.len(),
                grid.len(),
                dim
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("path values must be finite"));
        }
        Ok(SamplePath { grid, dim, data })
    }

    /// Sample a vector-valued function of time at the grid nodes.
    pub fn from_fn<F>(grid: Arc<TimeGrid>, dim: usize, f: F) -> Result<SamplePath>
    where
        F: Fn(f64) -> Vec<f64>,
    {
        let mut data = Vec::with_capacity(grid.len() * dim);
        for &t in grid.nodes() {
            let row = f(t);
            assert_eq!(row.len(), dim, "from_fn row has wrong dimension");
            data.extend_from_slice(&row);
        }
        SamplePath::new(grid, dim, data)
    }

    /// Sample a scalar function of time at the grid nodes.
    pub fn scalar_from_fn<F>(grid: Arc<TimeGrid>, f: F) -> Result<SamplePath>
    where
        F: Fn(f64) -> f64,
    {
        let data = grid.nodes().iter().map(|&t| f(t)).collect();
        SamplePath::new(grid, 1, data)
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Value at node `i`.
    pub fn at(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Scalar value at node `i`; the path must have `dim == 1`.
    pub fn scalar(&self, i: usize) -> f64 {
        debug_assert_eq!(self.dim, 1);
        self.data[i * self.dim]
    }

    /// Extract component `c` as a scalar path on the same grid.
    pub fn component(&self, c: usize) -> SamplePath {
        assert!(c < self.dim, "component {c} out of range");
        let data = (0..self.len()).map(|i| self.at(i)[c]).collect();
        SamplePath {
            grid: Arc::clone(&self.grid),
            dim: 1,
            data,
        }
    }

    /// Same grid, node for node.
    pub fn same_grid(&self, other: &SamplePath) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_as(&other.grid)
    }

    /// CSV dump: header `t, x0, x1, ..., x{d-1}`, one row per node, 16
    /// significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write!(out, "t")?;
        for c in 0..self.dim {
            write!(out, ", x{c}")?;
        }
        writeln!(out)?;
        for i in 0..self.len() {
            write!(out, "{:.15e}", self.grid.node(i))?;
            for &x in self.at(i) {
                write!(out, ", {x:.15e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// One channel of the driving semimartingale `X = (X^0, ..., X^k)`.
#[derive(Clone)]
pub enum NoiseComponent {
    /// `X_t = t` at the grid nodes.
    Time,
    /// Brownian motion started at 0 with increment variance `scale^2 * dt`.
    Brownian { scale: f64 },
    /// A deterministic function of time sampled at the nodes.
    Deterministic(TimeFn),
    /// Identically zero.
    Zero,
}

impl fmt::Debug for NoiseComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseComponent::Time => write!(f, "Time"),
            NoiseComponent::Brownian { scale } => write!(f, "Brownian({scale})"),
            NoiseComponent::Deterministic(_) => write!(f, "Deterministic"),
            NoiseComponent::Zero => write!(f, "Zero"),
        }
    }
}

/// Specification of the `k + 1` driving channels. Component 0 is the `X^0`
/// channel.
///
/// Seed policy: component `j` of a path drawn with master seed `s` uses an
/// independent `ChaCha8` stream seeded with [`NoiseSpec::component_seed`]`(s, j)`,
/// a SplitMix64 hash of `s` offset by `(j + 1)` times the golden-ratio
/// increment. The derivation is fixed here so runs reproduce bit-identically
/// across platforms.
#[derive(Clone, Debug)]
pub struct NoiseSpec {
    components: Vec<NoiseComponent>,
}

impl NoiseSpec {
    pub fn new(components: Vec<NoiseComponent>) -> Result<NoiseSpec> {
        if components.is_empty() {
            return Err(Error::invalid("noise spec needs at least one component"));
        }
        Ok(NoiseSpec { components })
    }

    /// `X^0 = t` and `k` Brownian channels of unit scale.
    pub fn time_and_brownian(k: usize) -> NoiseSpec {
        let mut components = vec![NoiseComponent::Time];
        components.extend((0..k).map(|_| NoiseComponent::Brownian { scale: 1.0 }));
        NoiseSpec { components }
    }

    pub fn components(&self) -> &[NoiseComponent] {
        &self.components
    }

    /// Number of channels, `k + 1`.
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// SplitMix64 derivation of the per-component stream seed.
    pub fn component_seed(master_seed: u64, component: usize) -> u64 {
        let mut z =
            master_seed.wrapping_add((component as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// Sample the driving semimartingale on a grid. Identical
/// `(spec, grid, master_seed)` triples reproduce bit-identical paths.
pub fn sample_noise(
    spec: &NoiseSpec,
    grid: &Arc<TimeGrid>,
    master_seed: u64,
) -> Result<SamplePath> {
    let d = spec.dim();
    let n = grid.len();
    let mut data = vec![0.0; n * d];
    for (c, component) in spec.components().iter().enumerate() {
        match component {
            NoiseComponent::Time => {
                for i in 0..n {
                    data[i * d + c] = grid.node(i);
                }
            }
            NoiseComponent::Zero => {}
            NoiseComponent::Deterministic(f) => {
                for i in 0..n {
                    data[i * d + c] = f(grid.node(i));
                }
            }
            NoiseComponent::Brownian { scale } => {
                if *scale <= 0.0 || !scale.is_finite() {
                    return Err(Error::invalid(format!(
                        "Brownian scale must be positive and finite, got {scale}"
                    )));
                }
                let seed = NoiseSpec::component_seed(master_seed, c);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut acc = 0.0;
                for i in 1..n {
                    let dt = grid.node(i) - grid.node(i - 1);
                    let z: f64 = StandardNormal.sample(&mut rng);
                    acc += scale * dt.sqrt() * z;
                    data[i * d + c] = acc;
                }
            }
        }
    }
    SamplePath::new(Arc::clone(grid), d, data)
}

/// A closed subset of `R^d` with a total, deterministic membership test.
#[derive(Clone)]
pub enum Region {
    /// Closed ball `|x - center| <= radius`.
    Ball { center: Vec<f64>, radius: f64 },
    /// Closed box `lo <= x <= hi` componentwise.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Closed sublevel set `f(x) <= level`.
    Sublevel { f: LevelFn, level: f64 },
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Ball { center, radius } => write!(f, "Ball({center:?}, {radius})"),
            Region::Box { lo, hi } => write!(f, "Box({lo:?}, {hi:?})"),
            Region::Sublevel { level, .. } => write!(f, "Sublevel(level = {level})"),
        }
    }
}

impl Region {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Region> {
        if radius <= 0.0 || !radius.is_finite() {
            return Err(Error::invalid(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Region::Ball { center, radius })
    }

    pub fn box_set(lo: Vec<f64>, hi: Vec<f64>) -> Result<Region> {
        if lo.len() != hi.len() {
            return Err(Error::invalid("box bounds must have equal dimension"));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| a >= b || a.is_nan() || b.is_nan())
        {
            return Err(Error::invalid(
                "box bounds must satisfy lo < hi componentwise",
            ));
        }
        Ok(Region::Box { lo, hi })
    }

    pub fn sublevel(f: LevelFn, level: f64) -> Region {
        Region::Sublevel { f, level }
    }

    /// Closed membership test.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => {
                assert_eq!(x.len(), center.len(), "region dimension mismatch");
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                d2.sqrt() <= *radius
            }
            Region::Box { lo, hi } => {
                assert_eq!(x.len(), lo.len(), "region dimension mismatch");
                x.iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(v, (a, b))| *a <= *v && *v <= *b)
            }
            Region::Sublevel { f, level } => f(x) <= *level,
        }
    }
}

/// A grid index or the infinity sentinel. The sentinel compares strictly
/// greater than any representable index, so `min`/ordering logic is total.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tau(usize);

impl Tau {
    pub const INFINITE: Tau = Tau(usize::MAX);

    pub fn at(index: usize) -> Tau {
        assert!(index < usize::MAX, "index overflows the sentinel");
        Tau(index)
    }

    pub fn is_infinite(self) -> bool {
        self.0 == usize::MAX
    }

    /// `Some(index)` when finite.
    pub fn index(self) -> Option<usize> {
        (!self.is_infinite()).then_some(self.0)
    }

    /// Saturating addition; anything involving the sentinel stays infinite.
    pub fn saturating_add(self, other: Tau) -> Tau {
        if self.is_infinite() || other.is_infinite() {
            Tau::INFINITE
        } else {
            Tau(self.0.saturating_add(other.0).min(usize::MAX - 1))
        }
    }
}

impl fmt::Debug for Tau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for Tau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// First hitting time of the closed region, resolved at grid nodes:
/// smallest index whose value lies in the region, or infinity.
pub fn first_hitting_time(path: &SamplePath, region: &Region) -> Tau {
    for i in 0..path.len() {
        if region.contains(path.at(i)) {
            return Tau::at(i);
        }
    }
    Tau::INFINITE
}

/// First exit time from the closed region: smallest index whose value lies
/// outside, or infinity when the whole path stays inside.
pub fn first_exit_time(path: &SamplePath, region: &Region) -> Tau {
    for i in 0..path.len() {
        if !region.contains(path.at(i)) {
            return Tau::at(i);
        }
    }
    Tau::INFINITE
}

/// The hit time together with the duration of the first in-region excursion.
///
/// `tau_hit` is the first hitting index; `tau_dwell` is the first exit index
/// of the path re-based at `tau_hit`. The window `[tau_hit, tau_hit + tau_dwell]`
/// is the portion of the path contained in the region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StoppingTimes {
    pub tau_hit: Tau,
    pub tau_dwell: Tau,
}

impl StoppingTimes {
    /// End of the window, `tau_hit + tau_dwell` (saturating at infinity).
    pub fn window_end(&self) -> Tau {
        self.tau_hit.saturating_add(self.tau_dwell)
    }

    /// Whether node `i` lies strictly inside the window
    /// `]] tau_hit, tau_hit + tau_dwell [[`.
    pub fn contains_open(&self, i: usize) -> bool {
        match self.tau_hit.index() {
            None => false,
            Some(h) => i > h && Tau::at(i) < self.window_end(),
        }
    }

    /// Inclusive node range `[start, end]` of the open interior, clamped to a
    /// grid with `n_nodes` nodes. `None` when the interior is empty.
    pub fn open_nodes(&self, n_nodes: usize) -> Option<(usize, usize)> {
        let h = self.tau_hit.index()?;
        let start = h + 1;
        let end = match self.window_end().index() {
            Some(e) => e.saturating_sub(1).min(n_nodes - 1),
            None => n_nodes - 1,
        };
        (start <= end).then_some((start, end))
    }

    /// Inclusive node range of the closed window, clamped to the grid.
    pub fn closed_nodes(&self, n_nodes: usize) -> Option<(usize, usize)> {
        let h = self.tau_hit.index()?;
        let end = match self.window_end().index() {
            Some(e) => e.min(n_nodes - 1),
            None => n_nodes - 1,
        };
        Some((h, end))
    }
}

/// Hit time and in-region dwell duration of the first excursion of `path`
/// into the closed `region`.
pub fn hit_exit_window(path: &SamplePath, region: &Region) -> StoppingTimes {
    let tau_hit = first_hitting_time(path, region);
    let Some(h) = tau_hit.index() else {
        return StoppingTimes {
            tau_hit: Tau::INFINITE,
            tau_dwell: Tau::INFINITE,
        };
    };
    let mut tau_dwell = Tau::INFINITE;
    for i in h..path.len() {
        if !region.contains(path.at(i)) {
            tau_dwell = Tau::at(i - h);
            break;
        }
    }
    StoppingTimes { tau_hit, tau_dwell }
}

/// Stopped process: values frozen at the `tau` node from `tau` onwards.
/// The infinite sentinel (or any index at or beyond the last node) returns
/// the path unchanged.
pub fn stop_path(path: &SamplePath, tau: Tau) -> SamplePath {
    let Some(k) = tau.index() else {
        return path.clone();
    };
    if k >= path.len() - 1 {
        return path.clone();
    }
    let d = path.dim();
    let mut data = Vec::with_capacity(path.len() * d);
    for i in 0..path.len() {
        data.extend_from_slice(path.at(i.min(k)));
    }
    SamplePath {
        grid: Arc::clone(path.grid()),
        dim: d,
        data,
    }
}

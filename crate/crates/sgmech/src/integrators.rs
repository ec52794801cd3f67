//! Numerical solution of the stochastic implicit Euler-Lagrange equations,
//! the equivalent stochastic Hamiltonian system, and generic Stratonovich
//! equations driven by Stratonovich operators.
//!
//! A single scheme is used everywhere: the implicit midpoint rule
//! `y_{i+1} = y_i + F(x_mid, y_mid) * dX` with `y_mid = (y_i + y_{i+1}) / 2`.
//! It is Stratonovich-consistent, symplectic on the Hamiltonian side,
//! preserves quadratic first integrals, and is exact on linear and additive
//! systems. Noise increments are read from the sampled path and never
//! re-derived; in particular `X^0` is not assumed to be clock time, and the
//! step map never looks at grid times. Each step is solved by fixed-point
//! iteration with a Newton fallback, both to residual 1e-12 with a cap of 50
//! iterations; a step that fails aborts the path with diagnostics.
//!
//! The mechanical state advanced here is `(q, p)` on the constraint
//! submanifold, with `v` reconstructed through the Legendre inverse, so the
//! constraint `p = dL/dv` holds at every node by construction.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg;
use crate::mechanics::{legendre_inverse, noise_hamiltonian, LagrangianSystem, PontryaginState};
use crate::paths::{SamplePath, TimeGrid};

/// Residual tolerance shared by the fixed-point and Newton step solvers.
pub const STEP_TOL: f64 = 1e-12;
/// Iteration cap shared by both solvers.
pub const STEP_MAX_ITER: usize = 50;

/// A smooth family of linear maps `S(x, y): R^{k+1} -> R^m`, stored through
/// its generator: the matrix whose column `j` is the vector field
/// `S^{x, e_j}(y)`.
#[derive(Clone)]
pub struct StratonovichOperator {
    input_dim: usize,
    output_dim: usize,
    generator: GeneratorFn,
}

/// Generator callback: `(x, y)` to the row-major `m x (k+1)` matrix of
/// generating vector fields.
pub type GeneratorFn = Arc<dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync>;

/// Borrowed form of the generator callback used by the step solver.
type FieldRef<'a> = &'a dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>>;

impl StratonovichOperator {
    /// `generator(x, y)` must return the row-major `output_dim x input_dim`
    /// matrix of generating vector fields.
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        generator: GeneratorFn,
    ) -> StratonovichOperator {
        StratonovichOperator {
            input_dim,
            output_dim,
            generator,
        }
    }

    /// Operator independent of `(x, y)`.
    pub fn constant(input_dim: usize, output_dim: usize, matrix: Vec<f64>) -> StratonovichOperator {
        assert_eq!(matrix.len(), input_dim * output_dim);
        StratonovichOperator::new(
            input_dim,
            output_dim,
            Arc::new(move |_, _| Ok(matrix.clone())),
        )
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// The full generator matrix at `(x, y)`.
    pub fn matrix(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let m = (self.generator)(x, y)?;
        debug_assert_eq!(m.len(), self.input_dim * self.output_dim);
        Ok(m)
    }

    /// The generating vector field `S^{x, e_j}(y)`, column `j` of the matrix.
    pub fn column(&self, x: &[f64], y: &[f64], j: usize) -> Result<Vec<f64>> {
        assert!(j < self.input_dim, "column {j} out of range");
        let m = self.matrix(x, y)?;
        Ok((0..self.output_dim)
            .map(|r| m[r * self.input_dim + j])
            .collect())
    }

    /// `S(x, y) dx`, the matrix applied to an increment.
    pub fn apply(&self, x: &[f64], y: &[f64], dx: &[f64]) -> Result<Vec<f64>> {
        let m = self.matrix(x, y)?;
        Ok(linalg::mat_vec(&m, dx, self.output_dim, self.input_dim))
    }
}

/// Per-step solver diagnostics.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepDiagnostics {
    pub fixed_point_iterations: u32,
    pub newton_iterations: u32,
    /// Final defect of the implicit equation, max norm.
    pub residual: f64,
}

/// One implicit midpoint step: solve `z = y + F(x_mid, (y + z)/2) dx`.
fn midpoint_step(
    field: FieldRef<'_>,
    m: usize,
    d: usize,
    x_mid: &[f64],
    dx: &[f64],
    y: &[f64],
    step: usize,
) -> Result<(Vec<f64>, StepDiagnostics)> {
    let eval = |z: &[f64]| -> Result<Vec<f64>> {
        let y_mid: Vec<f64> = y.iter().zip(z).map(|(a, b)| 0.5 * (a + b)).collect();
        let mat = field(x_mid, &y_mid)?;
        Ok((0..m)
            .map(|r| y[r] + (0..d).map(|c| mat[r * d + c] * dx[c]).sum::<f64>())
            .collect())
    };

    let mut diag = StepDiagnostics::default();
    let mut z = y.to_vec();
    for it in 1..=STEP_MAX_ITER {
        let z_next = eval(&z)?;
        let defect = z_next
            .iter()
            .zip(&z)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        diag.fixed_point_iterations = it as u32;
        diag.residual = defect;
        if !defect.is_finite() {
            // diverged; hand Newton a sane starting point
            z = y.to_vec();
            break;
        }
        z = z_next;
        if defect <= STEP_TOL {
            return Ok((z, diag));
        }
    }

    // Newton fallback on G(z) = z - y - F(x_mid, (y + z)/2) dx, with a
    // finite-difference Jacobian of the step map.
    for it in 1..=STEP_MAX_ITER {
        let g_base = eval(&z)?;
        let mut residual: Vec<f64> = z.iter().zip(&g_base).map(|(a, b)| a - b).collect();
        let defect = linalg::max_abs(&residual);
        diag.newton_iterations = it as u32;
        diag.residual = defect;
        if defect <= STEP_TOL {
            return Ok((z, diag));
        }
        if !defect.is_finite() {
            return Err(Error::IntegratorStep {
                step,
                residual: defect,
                iterations: (diag.fixed_point_iterations + diag.newton_iterations) as usize,
            });
        }
        let mut jac = vec![0.0; m * m];
        for c in 0..m {
            let h = 1e-7 * z[c].abs().max(1.0);
            let mut zp = z.clone();
            zp[c] += h;
            let gp = eval(&zp)?;
            for r in 0..m {
                let dg = (gp[r] - g_base[r]) / h;
                jac[r * m + c] = (if r == c { 1.0 } else { 0.0 }) - dg;
            }
        }
        if !linalg::solve_in_place(&mut jac, &mut residual, m) {
            return Err(Error::IntegratorStep {
                step,
                residual: defect,
                iterations: (diag.fixed_point_iterations + diag.newton_iterations) as usize,
            });
        }
        for r in 0..m {
            z[r] -= residual[r];
        }
    }
    Err(Error::IntegratorStep {
        step,
        residual: diag.residual,
        iterations: (diag.fixed_point_iterations + diag.newton_iterations) as usize,
    })
}

/// Drive a state of dimension `m` along the noise path with the implicit
/// midpoint rule. Returns the flat node values and per-step diagnostics.
fn integrate_midpoint(
    field: FieldRef<'_>,
    m: usize,
    x: &SamplePath,
    y0: &[f64],
) -> Result<(Vec<f64>, Vec<StepDiagnostics>)> {
    let d = x.dim();
    let n_nodes = x.len();
    let mut values = Vec::with_capacity(n_nodes * m);
    values.extend_from_slice(y0);
    let mut diagnostics = Vec::with_capacity(n_nodes - 1);
    let mut y = y0.to_vec();
    for i in 0..n_nodes - 1 {
        let xi = x.at(i);
        let xn = x.at(i + 1);
        let x_mid: Vec<f64> = xi.iter().zip(xn).map(|(a, b)| 0.5 * (a + b)).collect();
        let dx: Vec<f64> = xi.iter().zip(xn).map(|(a, b)| b - a).collect();
        let (z, diag) = midpoint_step(field, m, d, &x_mid, &dx, &y, i)?;
        values.extend_from_slice(&z);
        diagnostics.push(diag);
        y = z;
    }
    Ok((values, diagnostics))
}

/// Solve the Stratonovich equation `o dGamma = S(X, Gamma) o dX` by implicit
/// midpoint from `y0`.
pub fn integrate_stratonovich(
    op: &StratonovichOperator,
    x: &SamplePath,
    y0: &[f64],
) -> Result<SamplePath> {
    if x.dim() != op.input_dim() {
        return Err(Error::invalid(format!(
            "noise has {} components but the operator expects {}",
            x.dim(),
            op.input_dim()
        )));
    }
    if y0.len() != op.output_dim() {
        return Err(Error::invalid(format!(
            "initial state has dimension {} but the operator produces {}",
            y0.len(),
            op.output_dim()
        )));
    }
    let field = |xm: &[f64], ym: &[f64]| op.matrix(xm, ym);
    let (values, _) = integrate_midpoint(&field, op.output_dim(), x, y0)?;
    SamplePath::new(Arc::clone(x.grid()), op.output_dim(), values)
}

/// A discrete Pontryagin-bundle trajectory `(q, v, p)` together with the
/// driving noise and per-step solver diagnostics.
#[derive(Clone, Debug)]
pub struct PontryaginPath {
    states: Vec<PontryaginState>,
    noise: SamplePath,
    diagnostics: Vec<StepDiagnostics>,
}

impl PontryaginPath {
    /// Wrap externally constructed states over a noise path. Diagnostics are
    /// zeroed; nothing is solved.
    pub fn from_states(states: Vec<PontryaginState>, noise: SamplePath) -> Result<PontryaginPath> {
        if states.len() != noise.len() {
            return Err(Error::invalid(format!(
                "{} states do not fit a grid with {} nodes",
                states.len(),
                noise.len()
            )));
        }
        let steps = noise.len() - 1;
        Ok(PontryaginPath {
            states,
            noise,
            diagnostics: vec![StepDiagnostics::default(); steps],
        })
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        self.noise.grid()
    }

    pub fn noise(&self) -> &SamplePath {
        &self.noise
    }

    pub fn states(&self) -> &[PontryaginState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &PontryaginState {
        &self.states[i]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Configuration dimension.
    pub fn n(&self) -> usize {
        self.states[0].q.len()
    }

    pub fn diagnostics(&self) -> &[StepDiagnostics] {
        &self.diagnostics
    }

    /// The `q` component as a `d = n` path (used for region stopping times).
    pub fn q_path(&self) -> SamplePath {
        let n = self.n();
        let mut data = Vec::with_capacity(self.len() * n);
        for s in &self.states {
            data.extend_from_slice(&s.q);
        }
        SamplePath::new(Arc::clone(self.grid()), n, data).expect("states are finite")
    }

    /// The full `(q, v, p)` trajectory as a `d = 3n` path.
    pub fn as_sample_path(&self) -> SamplePath {
        let n = self.n();
        let mut data = Vec::with_capacity(self.len() * 3 * n);
        for s in &self.states {
            data.extend_from_slice(&s.q);
            data.extend_from_slice(&s.v);
            data.extend_from_slice(&s.p);
        }
        SamplePath::new(Arc::clone(self.grid()), 3 * n, data).expect("states are finite")
    }

    /// Largest Legendre-constraint violation `|p - dL/dv(q, v)|` over nodes.
    pub fn max_legendre_residual(&self, sys: &LagrangianSystem) -> f64 {
        self.states.iter().fold(0.0f64, |acc, s| {
            let g = sys.grad_v(&s.q, &s.v);
            acc.max(
                s.p.iter()
                    .zip(&g)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())),
            )
        })
    }

    /// CSV dump with header
    /// `t, q_0..q_{n-1}, v_0..v_{n-1}, p_0..p_{n-1}, fp_iters, residual`.
    /// Row `i` carries the diagnostics of the step that produced node `i`;
    /// node 0 reports zeros.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let n = self.n();
        write!(out, "t")?;
        for c in 0..n {
            write!(out, ", q_{c}")?;
        }
        for c in 0..n {
            write!(out, ", v_{c}")?;
        }
        for c in 0..n {
            write!(out, ", p_{c}")?;
        }
        writeln!(out, ", fp_iters, residual")?;
        for i in 0..self.len() {
            let s = &self.states[i];
            write!(out, "{:.15e}", self.grid().node(i))?;
            for x in s.q.iter().chain(&s.v).chain(&s.p) {
                write!(out, ", {x:.15e}")?;
            }
            let (iters, residual) = if i == 0 {
                (0, 0.0)
            } else {
                let d = &self.diagnostics[i - 1];
                (d.fixed_point_iterations + d.newton_iterations, d.residual)
            };
            writeln!(out, ", {iters}, {residual:.15e}")?;
        }
        Ok(())
    }
}

fn check_mechanical_inputs(
    sys: &LagrangianSystem,
    noise: &SamplePath,
    q0: &[f64],
    p0: &[f64],
) -> Result<()> {
    if noise.dim() != sys.k() + 1 {
        return Err(Error::invalid(format!(
            "noise has {} components but the system needs k + 1 = {}",
            noise.dim(),
            sys.k() + 1
        )));
    }
    if q0.len() != sys.n() || p0.len() != sys.n() {
        return Err(Error::invalid(format!(
            "initial condition dimension mismatch: n = {}, q0 = {}, p0 = {}",
            sys.n(),
            q0.len(),
            p0.len()
        )));
    }
    Ok(())
}

/// Generator matrix of the Hamilton-Pontryagin dynamics at `(q, p)`:
/// column 0 is the deterministic implicit Euler-Lagrange field
/// `(v, dL/dq(q, v))` with `v` recovered through the Legendre inverse, and
/// column `j >= 1` is `(V_j(q), grad L_j(q) - (jac V_j)^T p)`.
fn hp_field(sys: &LagrangianSystem, y_mid: &[f64]) -> Result<Vec<f64>> {
    let n = sys.n();
    let d = sys.k() + 1;
    let (q, p) = y_mid.split_at(n);
    let v = legendre_inverse(sys, q, p)?;
    let gq = sys.grad_q(q, &v);
    let mut mat = vec![0.0; 2 * n * d];
    for r in 0..n {
        mat[r * d] = v[r];
        mat[(n + r) * d] = gq[r];
    }
    for j in 1..d {
        let ch = sys.channel(j);
        let field = (ch.field)(q);
        let gpot = (ch.grad_potential)(q);
        let jac = (ch.jac_field)(q);
        let jt_p = linalg::mat_t_vec(&jac, p, n, n);
        for r in 0..n {
            mat[r * d + j] = field[r];
            mat[(n + r) * d + j] = gpot[r] - jt_p[r];
        }
    }
    Ok(mat)
}

/// Integrate the stochastic implicit Euler-Lagrange equations from
/// `(q0, p0)` along the sampled noise.
///
/// Each step solves, with midpoint averages `q_mid, p_mid` and
/// `v_mid = legendre_inverse(q_mid, p_mid)`,
///
/// ```text
/// q_{i+1} = q_i + v_mid dX^0 + sum_j V_j(q_mid) dX^j
/// p_{i+1} = p_i + dL/dq(q_mid, v_mid) dX^0
///               + sum_j (grad L_j(q_mid) - (jac V_j)^T p_mid) dX^j
/// ```
///
/// and the reported `v_i` is `legendre_inverse(q_i, p_i)`, so the constraint
/// `p = dL/dv` holds at every node to solver tolerance.
pub fn integrate_implicit_el(
    sys: &LagrangianSystem,
    noise: &SamplePath,
    q0: &[f64],
    p0: &[f64],
) -> Result<PontryaginPath> {
    check_mechanical_inputs(sys, noise, q0, p0)?;
    let n = sys.n();
    let mut y0 = q0.to_vec();
    y0.extend_from_slice(p0);
    let field = |_xm: &[f64], ym: &[f64]| hp_field(sys, ym);
    let (values, diagnostics) = integrate_midpoint(&field, 2 * n, noise, &y0)?;
    let mut states = Vec::with_capacity(noise.len());
    for i in 0..noise.len() {
        let row = &values[i * 2 * n..(i + 1) * 2 * n];
        let (q, p) = row.split_at(n);
        let v = legendre_inverse(sys, q, p)?;
        states.push(PontryaginState::new(q.to_vec(), v, p.to_vec()));
    }
    Ok(PontryaginPath {
        states,
        noise: noise.clone(),
        diagnostics,
    })
}

/// Integrate the equivalent stochastic Hamiltonian system
/// `o dGamma = X_H(Gamma) o dX^0 + sum_i X_{H_i}(Gamma) o dX^i`
/// on `T*Q`, returning the cotangent path as a `d = 2n` sample path
/// (columns `q` then `p`).
///
/// `H = E_L o (FL)^{-1}`; its canonical vector field evaluates to
/// `(dH/dp, -dH/dq) = (v, dL/dq(q, v))` at `v = legendre_inverse(q, p)`, and
/// the noise fields come from [`noise_hamiltonian`].
pub fn integrate_hamiltonian(
    sys: &LagrangianSystem,
    noise: &SamplePath,
    q0: &[f64],
    p0: &[f64],
) -> Result<SamplePath> {
    check_mechanical_inputs(sys, noise, q0, p0)?;
    let n = sys.n();
    let d = sys.k() + 1;
    let field = move |_xm: &[f64], ym: &[f64]| -> Result<Vec<f64>> {
        let (q, p) = ym.split_at(n);
        let v = legendre_inverse(sys, q, p)?;
        let gq = sys.grad_q(q, &v);
        let mut mat = vec![0.0; 2 * n * d];
        for r in 0..n {
            // X_H = (dH/dp, -dH/dq)
            mat[r * d] = v[r];
            mat[(n + r) * d] = gq[r];
        }
        for j in 1..d {
            let h = noise_hamiltonian(sys, j, q, p)?;
            for r in 0..n {
                mat[r * d + j] = h.grad_p[r];
                mat[(n + r) * d + j] = -h.grad_q[r];
            }
        }
        Ok(mat)
    };
    let mut y0 = q0.to_vec();
    y0.extend_from_slice(p0);
    let (values, _) = integrate_midpoint(&field, 2 * n, noise, &y0)?;
    SamplePath::new(Arc::clone(noise.grid()), 2 * n, values)
}

/// The Hamilton-Pontryagin Stratonovich operator on the constraint
/// submanifold, as an operator on the `(q, p)` chart (`m = 2n`).
pub fn hp_operator(sys: &LagrangianSystem) -> StratonovichOperator {
    let sys = sys.clone();
    let n = sys.n();
    let d = sys.k() + 1;
    StratonovichOperator::new(
        d,
        2 * n,
        Arc::new(move |_x: &[f64], y: &[f64]| hp_field(&sys, y)),
    )
}

/// Integrate the same noise path through [`integrate_implicit_el`] and
/// through [`integrate_stratonovich`] with [`hp_operator`], and return the
/// largest `(q, p)` discrepancy over nodes.
pub fn hp_equivalence_check(
    sys: &LagrangianSystem,
    noise: &SamplePath,
    q0: &[f64],
    p0: &[f64],
) -> Result<f64> {
    let el = integrate_implicit_el(sys, noise, q0, p0)?;
    let mut y0 = q0.to_vec();
    y0.extend_from_slice(p0);
    let strat = integrate_stratonovich(&hp_operator(sys), noise, &y0)?;
    let n = sys.n();
    let mut max_disc = 0.0f64;
    for i in 0..noise.len() {
        let s = el.state(i);
        let row = strat.at(i);
        for c in 0..n {
            max_disc = max_disc.max((s.q[c] - row[c]).abs());
            max_disc = max_disc.max((s.p[c] - row[n + c]).abs());
        }
    }
    Ok(max_disc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::paths::{sample_noise, NoiseComponent, NoiseSpec};

    fn grid(horizon: f64, steps: usize) -> Arc<TimeGrid> {
        Arc::new(TimeGrid::uniform(horizon, steps).unwrap())
    }

    fn time_noise(g: &Arc<TimeGrid>, k: usize) -> SamplePath {
        let mut components = vec![NoiseComponent::Time];
        components.extend((0..k).map(|_| NoiseComponent::Zero));
        let spec = NoiseSpec::new(components).unwrap();
        sample_noise(&spec, g, 0).unwrap()
    }

    #[test]
    fn free_particle_straight_line() {
        let g = grid(1.0, 100);
        let sys = catalog::free_particle(1, 1.0);
        let noise = time_noise(&g, 0);
        let path = integrate_implicit_el(&sys, &noise, &[0.0], &[1.0]).unwrap();
        let last = path.state(100);
        assert!((last.q[0] - 1.0).abs() < 1e-12);
        assert!((last.p[0] - 1.0).abs() < 1e-14);
        assert!(path.max_legendre_residual(&sys) < 1e-12);
    }

    #[test]
    fn harmonic_oscillator_matches_cosine() {
        let g = grid(1.0, 1000);
        let sys = catalog::harmonic_oscillator(1, 1.0, 1.0, 0.0);
        let noise = time_noise(&g, 1);
        let path = integrate_implicit_el(&sys, &noise, &[1.0], &[0.0]).unwrap();
        let q1 = path.state(1000).q[0];
        assert!(
            (q1 - 1.0f64.cos()).abs() < 1e-4,
            "q(1) = {q1}, expected cos(1) = {}",
            1.0f64.cos()
        );
    }

    #[test]
    fn additive_noise_momentum_is_exact() {
        let g = grid(1.0, 200);
        let sys = catalog::free_particle_with_linear_noise(1.0);
        let spec = NoiseSpec::time_and_brownian(1);
        let noise = sample_noise(&spec, &g, 5).unwrap();
        let path = integrate_implicit_el(&sys, &noise, &[0.0], &[0.5]).unwrap();
        for i in 0..noise.len() {
            let expect = 0.5 + (noise.at(i)[1] - noise.at(0)[1]);
            assert!(
                (path.state(i).p[0] - expect).abs() < 1e-12,
                "node {i}: p = {}, expected {expect}",
                path.state(i).p[0]
            );
        }
    }

    #[test]
    fn deterministic_reduction_is_second_order() {
        // global error vs cos(1) shrinks ~4x per dt-halving
        let sys = catalog::harmonic_oscillator(1, 1.0, 1.0, 0.0);
        let mut errors = Vec::new();
        for steps in [250usize, 500, 1000] {
            let g = grid(1.0, steps);
            let noise = time_noise(&g, 1);
            let path = integrate_implicit_el(&sys, &noise, &[1.0], &[0.0]).unwrap();
            errors.push((path.state(steps).q[0] - 1.0f64.cos()).abs());
        }
        assert!(errors[1] < 0.3 * errors[0], "{errors:?}");
        assert!(errors[2] < 0.3 * errors[1], "{errors:?}");
    }

    #[test]
    fn hamiltonian_route_conserves_energy_and_matches_el() {
        let g = grid(1.0, 1000);
        let sys = catalog::harmonic_oscillator(1, 1.0, 1.0, 0.0);
        let noise = time_noise(&g, 1);
        let ham = integrate_hamiltonian(&sys, &noise, &[1.0], &[0.0]).unwrap();
        let energy = |q: f64, p: f64| 0.5 * (q * q + p * p);
        let e0 = energy(ham.at(0)[0], ham.at(0)[1]);
        for i in 0..ham.len() {
            let e = energy(ham.at(i)[0], ham.at(i)[1]);
            assert!((e - e0).abs() < 1e-10, "node {i}: energy drift {}", e - e0);
        }

        let el = integrate_implicit_el(&sys, &noise, &[1.0], &[0.0]).unwrap();
        for i in 0..ham.len() {
            assert!((ham.at(i)[0] - el.state(i).q[0]).abs() < 1e-9);
            assert!((ham.at(i)[1] - el.state(i).p[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn hamiltonian_noise_enters_momentum_only() {
        // V_1 = 0, L_1 = q: H_1 = -q, so q increments carry no dX^1 term
        let g = grid(1.0, 100);
        let sys = catalog::free_particle_with_linear_noise(1.0);
        let spec = NoiseSpec::new(vec![
            NoiseComponent::Zero,
            NoiseComponent::Brownian { scale: 1.0 },
        ])
        .unwrap();
        let noise = sample_noise(&spec, &g, 9).unwrap();
        let ham = integrate_hamiltonian(&sys, &noise, &[0.3], &[0.0]).unwrap();
        for i in 0..ham.len() {
            assert!(
                (ham.at(i)[0] - 0.3).abs() < 1e-13,
                "q moved under pure momentum noise"
            );
        }
        let last = ham.at(100);
        let expect_p = noise.at(100)[1] - noise.at(0)[1];
        assert!((last[1] - expect_p).abs() < 1e-12);
    }

    #[test]
    fn stratonovich_constant_operator() {
        let g = grid(1.0, 50);
        let x = time_noise(&g, 0);
        let op = StratonovichOperator::constant(1, 1, vec![2.5]);
        let y = integrate_stratonovich(&op, &x, &[1.0]).unwrap();
        assert!((y.scalar(50) - 3.5).abs() < 1e-13);

        let zero = StratonovichOperator::constant(1, 1, vec![0.0]);
        let y = integrate_stratonovich(&zero, &x, &[1.0]).unwrap();
        assert!((0..=50).all(|i| y.scalar(i) == 1.0));
    }

    #[test]
    fn stratonovich_geometric_noise_matches_exponential() {
        // o dY = Y o dX^1: Y_T = Y_0 exp(X^1_T - X^1_0), midpoint error O(dt)
        let spec = NoiseSpec::new(vec![
            NoiseComponent::Time,
            NoiseComponent::Brownian { scale: 1.0 },
        ])
        .unwrap();
        let op =
            StratonovichOperator::new(2, 1, Arc::new(|_x: &[f64], y: &[f64]| Ok(vec![0.0, y[0]])));
        let mut errors = Vec::new();
        for steps in [2_000usize, 4_000, 8_000] {
            let g = grid(1.0, steps);
            let mut worst = 0.0f64;
            for seed in 0..10u64 {
                let x = sample_noise(&spec, &g, seed).unwrap();
                let y = integrate_stratonovich(&op, &x, &[1.0]).unwrap();
                let exact = (x.at(steps)[1] - x.at(0)[1]).exp();
                worst = worst.max((y.scalar(steps) - exact).abs());
            }
            errors.push(worst);
        }
        // measured by dt-halving: worst error ~ 2e-4 at dt = 5e-4 and shrinks
        assert!(errors[2] < 0.75 * errors[0], "{errors:?}");
        assert!(errors[0] < 5e-3, "{errors:?}");
    }

    #[test]
    fn hp_operator_columns() {
        // harmonic oscillator at (q, p) = (1, 0): column 0 = (v, -q) = (0, -1)
        let sys = catalog::harmonic_oscillator(1, 1.0, 1.0, 0.0);
        let op = hp_operator(&sys);
        let col0 = op.column(&[0.0, 0.0], &[1.0, 0.0], 0).unwrap();
        assert_eq!(col0, vec![0.0, -1.0]);

        // rotation field V_1(q) = (-q2, q1), L_1 = 0, at q = (1,0), p = (0,1):
        // column 1 = (V_1(q), -jacV_1^T p) = ((0, 1), (-1, 0))
        let sys = catalog::planar_central_potential(1.0, 0.0, 1.0, 0.0, 0.0);
        let op = hp_operator(&sys);
        let col1 = op.column(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0], 1).unwrap();
        assert_eq!(col1, vec![0.0, 1.0, -1.0, 0.0]);

        // V_1 = 0, L_1(q) = q: column 1 = (0, 1)
        let sys = catalog::free_particle_with_linear_noise(1.0);
        let op = hp_operator(&sys);
        let col1 = op.column(&[0.0, 0.0], &[0.0, 0.0], 1).unwrap();
        assert_eq!(col1, vec![0.0, 1.0]);
    }

    #[test]
    fn hp_equivalence_on_catalog_systems() {
        let g = grid(1.0, 400);
        for (sys, q0, p0) in [
            (
                catalog::free_particle_with_linear_noise(1.0),
                vec![0.1],
                vec![0.4],
            ),
            (
                catalog::harmonic_oscillator(1, 1.0, 1.0, 0.6),
                vec![1.0],
                vec![0.0],
            ),
            (catalog::cosh_lagrangian(1.0, 0.4), vec![0.2], vec![0.1]),
        ] {
            let spec = NoiseSpec::time_and_brownian(sys.k());
            for seed in 0..3u64 {
                let noise = sample_noise(&spec, &g, seed).unwrap();
                let disc = hp_equivalence_check(&sys, &noise, &q0, &p0).unwrap();
                assert!(disc <= 1e-9, "discrepancy {disc} at seed {seed}");
            }
        }
    }

    #[test]
    fn hp_equivalence_zero_noise_is_exact() {
        let g = grid(1.0, 200);
        let sys = catalog::harmonic_oscillator(1, 1.0, 1.0, 0.0);
        let noise = time_noise(&g, 1);
        let disc = hp_equivalence_check(&sys, &noise, &[1.0], &[0.0]).unwrap();
        assert!(disc <= 1e-12, "discrepancy {disc}");
    }

    #[test]
    fn perturbed_operator_is_detected() {
        // scaling column 0 by 1.1 must show up above 1e-3 on the oscillator
        let g = grid(1.0, 1000);
        let sys = catalog::harmonic_oscillator(1, 1.0, 1.0, 0.0);
        let noise = time_noise(&g, 1);
        let el = integrate_implicit_el(&sys, &noise, &[1.0], &[0.0]).unwrap();
        let base = hp_operator(&sys);
        let perturbed = StratonovichOperator::new(
            2,
            2,
            Arc::new(move |x: &[f64], y: &[f64]| {
                let mut m = base.matrix(x, y)?;
                for r in 0..2 {
                    m[r * 2] *= 1.1;
                }
                Ok(m)
            }),
        );
        let strat = integrate_stratonovich(&perturbed, &noise, &[1.0, 0.0]).unwrap();
        let mut disc = 0.0f64;
        for i in 0..noise.len() {
            disc = disc.max((el.state(i).q[0] - strat.at(i)[0]).abs());
            disc = disc.max((el.state(i).p[0] - strat.at(i)[1]).abs());
        }
        assert!(disc > 1e-3, "perturbation went unnoticed: {disc}");
    }

    #[test]
    fn quadratic_invariant_drift_stays_small() {
        // angular momentum <p, (-q2, q1)> is a quadratic first integral of
        // every generator column of the planar system
        let g = grid(1.0, 500);
        let sys = catalog::planar_central_potential(1.0, 0.25, 0.5, 0.25, 0.0);
        let spec = NoiseSpec::time_and_brownian(1);
        let noise = sample_noise(&spec, &g, 3).unwrap();
        let path = integrate_implicit_el(&sys, &noise, &[1.0, 0.0], &[0.1, 0.9]).unwrap();
        let charge = |s: &PontryaginState| s.p[0] * (-s.q[1]) + s.p[1] * s.q[0];
        let j0 = charge(path.state(0));
        for i in 0..path.len() {
            assert!(
                (charge(path.state(i)) - j0).abs() <= 1e-8,
                "node {i}: drift {}",
                (charge(path.state(i)) - j0).abs()
            );
        }
    }

    #[test]
    fn time_change_equivariance_is_exact() {
        // the step map reads only noise values, so a monotone regridding of
        // the same values reproduces the solution node for node
        let g = grid(1.0, 300);
        let sys = catalog::harmonic_oscillator(1, 1.0, 1.0, 0.7);
        let spec = NoiseSpec::time_and_brownian(1);
        let noise = sample_noise(&spec, &g, 11).unwrap();
        let path = integrate_implicit_el(&sys, &noise, &[1.0], &[0.0]).unwrap();

        let warped_nodes: Vec<f64> = g.nodes().iter().map(|&t| t * t * 0.5 + 0.5 * t).collect();
        let gw = Arc::new(TimeGrid::from_nodes(warped_nodes).unwrap());
        let warped_noise = SamplePath::new(
            Arc::clone(&gw),
            2,
            (0..noise.len())
                .flat_map(|i| noise.at(i).to_vec())
                .collect(),
        )
        .unwrap();
        let warped_path = integrate_implicit_el(&sys, &warped_noise, &[1.0], &[0.0]).unwrap();
        for i in 0..path.len() {
            assert_eq!(path.state(i).q, warped_path.state(i).q);
            assert_eq!(path.state(i).p, warped_path.state(i).p);
        }
    }

    #[test]
    fn nonconvergent_step_reports_its_index() {
        // o dY = Y^2 o dX with a jump of 10 in one increment: the implicit
        // midpoint equation has no real solution there
        let g = grid(1.0, 2);
        let x = SamplePath::new(Arc::clone(&g), 1, vec![0.0, 10.0, 10.0]).unwrap();
        let op = StratonovichOperator::new(
            1,
            1,
            Arc::new(|_x: &[f64], y: &[f64]| Ok(vec![y[0] * y[0]])),
        );
        match integrate_stratonovich(&op, &x, &[1.0]) {
            Err(Error::IntegratorStep { step, .. }) => assert_eq!(step, 0),
            other => panic!("expected a step failure, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let g = grid(1.0, 10);
        let sys = catalog::harmonic_oscillator(1, 1.0, 1.0, 0.0);
        let noise = time_noise(&g, 0); // needs k + 1 = 2 components
        assert!(integrate_implicit_el(&sys, &noise, &[1.0], &[0.0]).is_err());
        let op = StratonovichOperator::constant(2, 1, vec![0.0, 0.0]);
        assert!(integrate_stratonovich(&op, &noise, &[1.0]).is_err());
    }

    #[test]
    fn csv_has_diagnostics_columns() {
        let g = grid(1.0, 4);
        let sys = catalog::harmonic_oscillator(1, 1.0, 1.0, 0.0);
        let noise = time_noise(&g, 1);
        let path = integrate_implicit_el(&sys, &noise, &[1.0], &[0.0]).unwrap();
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t, q_0, v_0, p_0, fp_iters, residual"));
        assert_eq!(text.lines().count(), 6);
    }
}

//! Lagrangian systems on `Q = R^n` with noise channels, the Legendre
//! transform and its inverse, generalized energies, and noise Hamiltonians.
//!
//! A system is the tuple `(L, L_1..L_k, V_1..V_k)` together with user-supplied
//! gradients. Gradients are validated against central finite differences
//! rather than produced by automatic differentiation, which keeps the kernel
//! free of heavy dependencies and makes wrong inputs loud. Hyperregularity
//! (invertibility of `v -> dL/dv`) is required and checked, because the
//! integrators parameterize the constraint submanifold by `(q, p)` and
//! reconstruct `v`.

use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;

pub type ScalarQV = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type VectorQV = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
pub type ScalarQ = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorQ = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Step used by all central finite differences in this module.
pub const FD_STEP: f64 = 1e-6;
/// Relative tolerance for gradient validation.
pub const GRADIENT_TOL: f64 = 1e-6;
/// Tolerance for the Legendre round trip and Newton inversion.
pub const LEGENDRE_TOL: f64 = 1e-12;
const LEGENDRE_ROUND_TRIP_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 50;

/// A point of the Pontryagin bundle chart `R^{3n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PontryaginState {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
}

impl PontryaginState {
    pub fn new(q: Vec<f64>, v: Vec<f64>, p: Vec<f64>) -> PontryaginState {
        PontryaginState { q, v, p }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

/// One noise channel: the potential `L_i`, the vector field `V_i`, and their
/// derivatives. The Jacobian is row-major with entry `(r, c) = dV^r / dq^c`.
#[derive(Clone)]
pub struct NoiseChannel {
    pub potential: ScalarQ,
    pub grad_potential: VectorQ,
    pub field: VectorQ,
    pub jac_field: VectorQ,
}

impl NoiseChannel {
    /// Channel with `V_i = 0` and `L_i = 0`.
    pub fn zero(n: usize) -> NoiseChannel {
        NoiseChannel {
            potential: Arc::new(|_| 0.0),
            grad_potential: Arc::new(move |_| vec![0.0; n]),
            field: Arc::new(move |_| vec![0.0; n]),
            jac_field: Arc::new(move |_| vec![0.0; n * n]),
        }
    }
}

/// How `legendre_inverse` recovers `v` from `(q, p)`.
#[derive(Clone)]
pub enum LegendreInverseMode {
    /// Closed-form handle `(q, p) -> v`.
    ClosedForm(VectorQV),
    /// Newton iteration on `dL/dv(q, v) = p`, seeded at `v = p`.
    Newton,
}

/// The tuple `(L, L_1..L_k, V_1..V_k)` with gradients; defines the dynamics
/// and the generalized energies.
#[derive(Clone)]
pub struct LagrangianSystem {
    n: usize,
    lagrangian: ScalarQV,
    grad_q: VectorQV,
    grad_v: VectorQV,
    inverse_mode: LegendreInverseMode,
    channels: Vec<NoiseChannel>,
}

impl LagrangianSystem {
    pub fn new(
        n: usize,
        lagrangian: ScalarQV,
        grad_q: VectorQV,
        grad_v: VectorQV,
        inverse_mode: LegendreInverseMode,
        channels: Vec<NoiseChannel>,
    ) -> LagrangianSystem {
        assert!(n >= 1, "configuration dimension must be at least 1");
        LagrangianSystem {
            n,
            lagrangian,
            grad_q,
            grad_v,
            inverse_mode,
            channels,
        }
    }

    /// Configuration dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of noise channels `k`.
    pub fn k(&self) -> usize {
        self.channels.len()
    }

    pub fn lagrangian(&self, q: &[f64], v: &[f64]) -> f64 {
        (self.lagrangian)(q, v)
    }

    /// `dL/dq` at `(q, v)`.
    pub fn grad_q(&self, q: &[f64], v: &[f64]) -> Vec<f64> {
        (self.grad_q)(q, v)
    }

    /// `dL/dv` at `(q, v)`.
    pub fn grad_v(&self, q: &[f64], v: &[f64]) -> Vec<f64> {
        (self.grad_v)(q, v)
    }

    /// Channel `i` for `i = 1..=k`.
    pub fn channel(&self, i: usize) -> &NoiseChannel {
        &self.channels[i - 1]
    }

    pub fn channels(&self) -> &[NoiseChannel] {
        &self.channels
    }
}

/// Legendre transform `p = dL/dv (q, v)`.
pub fn legendre(sys: &LagrangianSystem, q: &[f64], v: &[f64]) -> Vec<f64> {
    sys.grad_v(q, v)
}

/// Inverse Legendre transform: the `v` with `dL/dv(q, v) = p`.
///
/// Newton mode iterates from `v = p` with a finite-difference Jacobian,
/// residual tolerance 1e-12, and at most 50 iterations.
pub fn legendre_inverse(sys: &LagrangianSystem, q: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    match &sys.inverse_mode {
        LegendreInverseMode::ClosedForm(f) => Ok(f(q, p)),
        LegendreInverseMode::Newton => {
            let n = sys.n();
            let mut v = p.to_vec();
            for _ in 0..NEWTON_MAX_ITER {
                let g = sys.grad_v(q, &v);
                let mut residual: Vec<f64> = g.iter().zip(p).map(|(a, b)| a - b).collect();
                if linalg::max_abs(&residual) <= LEGENDRE_TOL {
                    return Ok(v);
                }
                // d(gradLv)/dv by central differences
                let mut jac = vec![0.0; n * n];
                for c in 0..n {
                    let h = FD_STEP * v[c].abs().max(1.0);
                    let mut vp = v.clone();
                    vp[c] += h;
                    let mut vm = v.clone();
                    vm[c] -= h;
                    let gp = sys.grad_v(q, &vp);
                    let gm = sys.grad_v(q, &vm);
                    for r in 0..n {
                        jac[r * n + c] = (gp[r] - gm[r]) / (2.0 * h);
                    }
                }
                if !linalg::solve_in_place(&mut jac, &mut residual, n) {
                    return Err(Error::SingularLegendre(format!(
                        "velocity Hessian is singular near q = {q:?}, p = {p:?}"
                    )));
                }
                for c in 0..n {
                    v[c] -= residual[c];
                }
            }
            let g = sys.grad_v(q, &v);
            let res = linalg::max_abs(&g.iter().zip(p).map(|(a, b)| a - b).collect::<Vec<_>>());
            if res <= LEGENDRE_TOL {
                Ok(v)
            } else {
                Err(Error::SingularLegendre(format!(
                    "Newton did not converge in {NEWTON_MAX_ITER} iterations, residual {res:.3e}"
                )))
            }
        }
    }
}

/// Generalized energy `E_j`:
/// `E_0 = <p, v> - L(q, v)` and `E_i = <p, V_i(q)> - L_i(q)` for `i >= 1`.
pub fn generalized_energy(
    sys: &LagrangianSystem,
    j: usize,
    state: &PontryaginState,
) -> Result<f64> {
    if j > sys.k() {
        return Err(Error::invalid(format!(
            "energy index {j} out of range 0..={}",
            sys.k()
        )));
    }
    if j == 0 {
        Ok(linalg::dot(&state.p, &state.v) - sys.lagrangian(&state.q, &state.v))
    } else {
        let ch = sys.channel(j);
        Ok(linalg::dot(&state.p, &(ch.field)(&state.q)) - (ch.potential)(&state.q))
    }
}

/// Value and gradients of the noise Hamiltonian
/// `H_i(q, p) = <p, V_i(q)> - L_i(q)`.
#[derive(Clone, Debug)]
pub struct NoiseHamiltonian {
    pub value: f64,
    /// `dH_i/dq = (jac V_i)^T p - grad L_i`.
    pub grad_q: Vec<f64>,
    /// `dH_i/dp = V_i(q)`.
    pub grad_p: Vec<f64>,
}

pub fn noise_hamiltonian(
    sys: &LagrangianSystem,
    i: usize,
    q: &[f64],
    p: &[f64],
) -> Result<NoiseHamiltonian> {
    if i == 0 || i > sys.k() {
        return Err(Error::invalid(format!(
            "noise Hamiltonian index {i} out of range 1..={}",
            sys.k()
        )));
    }
    let n = sys.n();
    let ch = sys.channel(i);
    let field = (ch.field)(q);
    let jac = (ch.jac_field)(q);
    let grad_pot = (ch.grad_potential)(q);
    let jt_p = linalg::mat_t_vec(&jac, p, n, n);
    let grad_q = jt_p.iter().zip(&grad_pot).map(|(a, b)| a - b).collect();
    Ok(NoiseHamiltonian {
        value: linalg::dot(p, &field) - (ch.potential)(q),
        grad_q,
        grad_p: field,
    })
}

/// Validation report: max relative error per user-supplied derivative.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub entries: Vec<(String, f64)>,
}

impl ValidationReport {
    pub fn max_error(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, (_, e)| m.max(*e))
    }
}

fn rel_err(user: f64, reference: f64) -> f64 {
    (user - reference).abs() / reference.abs().max(user.abs()).max(1.0)
}

/// Check every user gradient and Jacobian against central finite differences
/// (step 1e-6, relative tolerance 1e-6) at `probes` random states drawn from
/// the seeded stream, plus the Legendre round trip
/// `legendre_inverse(q, legendre(q, v)) = v` to 1e-10.
///
/// The first failing function is reported by name.
pub fn validate_gradients(
    sys: &LagrangianSystem,
    probes: usize,
    seed: u64,
) -> Result<ValidationReport> {
    if probes == 0 {
        return Err(Error::invalid("validation needs at least one probe"));
    }
    let n = sys.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    };

    let mut max_grad_q: f64 = 0.0;
    let mut max_grad_v: f64 = 0.0;
    let mut max_round_trip: f64 = 0.0;
    let mut max_grad_pot = vec![0.0f64; sys.k()];
    let mut max_jac = vec![0.0f64; sys.k()];

    for _ in 0..probes {
        let q = draw(&mut rng);
        let v = draw(&mut rng);

        let user_gq = sys.grad_q(&q, &v);
        let user_gv = sys.grad_v(&q, &v);
        for c in 0..n {
            let mut qp = q.clone();
            qp[c] += FD_STEP;
            let mut qm = q.clone();
            qm[c] -= FD_STEP;
            let fd = (sys.lagrangian(&qp, &v) - sys.lagrangian(&qm, &v)) / (2.0 * FD_STEP);
            max_grad_q = max_grad_q.max(rel_err(user_gq[c], fd));

            let mut vp = v.clone();
            vp[c] += FD_STEP;
            let mut vm = v.clone();
            vm[c] -= FD_STEP;
            let fd = (sys.lagrangian(&q, &vp) - sys.lagrangian(&q, &vm)) / (2.0 * FD_STEP);
            max_grad_v = max_grad_v.max(rel_err(user_gv[c], fd));
        }

        for (idx, ch) in sys.channels().iter().enumerate() {
            let user_gp = (ch.grad_potential)(&q);
            let user_jac = (ch.jac_field)(&q);
            for c in 0..n {
                let mut qp = q.clone();
                qp[c] += FD_STEP;
                let mut qm = q.clone();
                qm[c] -= FD_STEP;
                let fd = ((ch.potential)(&qp) - (ch.potential)(&qm)) / (2.0 * FD_STEP);
                max_grad_pot[idx] = max_grad_pot[idx].max(rel_err(user_gp[c], fd));

                let fp = (ch.field)(&qp);
                let fm = (ch.field)(&qm);
                for r in 0..n {
                    let fd = (fp[r] - fm[r]) / (2.0 * FD_STEP);
                    max_jac[idx] = max_jac[idx].max(rel_err(user_jac[r * n + c], fd));
                }
            }
        }

        let p = legendre(sys, &q, &v);
        let v_back = legendre_inverse(sys, &q, &p)?;
        let rt = v
            .iter()
            .zip(&v_back)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        max_round_trip = max_round_trip.max(rt);
    }

    let mut entries = vec![
        ("gradLq".to_string(), max_grad_q),
        ("gradLv".to_string(), max_grad_v),
    ];
    for i in 0..sys.k() {
        entries.push((format!("gradL_{}", i + 1), max_grad_pot[i]));
        entries.push((format!("jacV_{}", i + 1), max_jac[i]));
    }
    entries.push(("legendre_roundtrip".to_string(), max_round_trip));

    for (name, err) in &entries {
        let tol = if name == "legendre_roundtrip" {
            LEGENDRE_ROUND_TRIP_TOL
        } else {
            GRADIENT_TOL
        };
        if *err > tol {
            return Err(Error::GradientValidation {
                function: name.clone(),
                max_rel_error: *err,
                tolerance: tol,
            });
        }
    }
    Ok(ValidationReport { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn legendre_identity_metric() {
        let sys = catalog::free_particle(2, 1.0);
        let p = legendre(&sys, &[0.0, 0.0], &[0.3, -0.7]);
        assert_eq!(p, vec![0.3, -0.7]);
        let v = legendre_inverse(&sys, &[0.0, 0.0], &p).unwrap();
        assert_eq!(v, vec![0.3, -0.7]);
    }

    #[test]
    fn legendre_mass_two() {
        let sys = catalog::free_particle(1, 2.0);
        let p = legendre(&sys, &[0.0], &[3.0]);
        assert_eq!(p, vec![6.0]);
    }

    #[test]
    fn legendre_cosh_closed_form() {
        let sys = catalog::cosh_lagrangian(1.0, 0.0);
        let p = legendre(&sys, &[0.0], &[1.0]);
        assert!((p[0] - 1.0f64.sinh()).abs() < 1e-15);
        assert!((p[0] - 1.1752011936438014).abs() < 1e-7);
        // Newton inversion against the asinh closed form
        let v = legendre_inverse(&sys, &[0.0], &[1.0f64.sinh()]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-10);
        let v = legendre_inverse(&sys, &[0.2], &[-2.5]).unwrap();
        assert!((v[0] - (-2.5f64).asinh()).abs() < 1e-10);
    }

    #[test]
    fn degenerate_lagrangian_is_singular() {
        // L = v: dL/dv is constant, Newton cannot converge
        let sys = LagrangianSystem::new(
            1,
            Arc::new(|_, v: &[f64]| v[0]),
            Arc::new(|_, _| vec![0.0]),
            Arc::new(|_, _| vec![1.0]),
            LegendreInverseMode::Newton,
            vec![],
        );
        assert!(matches!(
            legendre_inverse(&sys, &[0.0], &[2.0]),
            Err(Error::SingularLegendre(_))
        ));
    }

    #[test]
    fn generalized_energy_values() {
        // L = v^2/2 - q^2/2 at (q, v, p) = (1, 2, 2): E_0 = 4 - 1.5 = 2.5
        let sys = catalog::harmonic_oscillator(1, 1.0, 1.0, 0.0);
        let state = PontryaginState::new(vec![1.0], vec![2.0], vec![2.0]);
        assert!((generalized_energy(&sys, 0, &state).unwrap() - 2.5).abs() < 1e-15);
        // the oscillator carries one channel, so j = 2 is out of range
        assert!(generalized_energy(&sys, 2, &state).is_err());
    }

    #[test]
    fn generalized_energy_of_channels() {
        // V_1 = const e_1, L_1 = 0, p = 3 => E_1 = 3
        let constant_channel = NoiseChannel {
            potential: Arc::new(|_| 0.0),
            grad_potential: Arc::new(|_| vec![0.0]),
            field: Arc::new(|_| vec![1.0]),
            jac_field: Arc::new(|_| vec![0.0]),
        };
        let sys = LagrangianSystem::new(
            1,
            Arc::new(|_, v: &[f64]| 0.5 * v[0] * v[0]),
            Arc::new(|_, _| vec![0.0]),
            Arc::new(|_, v: &[f64]| vec![v[0]]),
            LegendreInverseMode::ClosedForm(Arc::new(|_, p: &[f64]| p.to_vec())),
            vec![constant_channel],
        );
        let state = PontryaginState::new(vec![0.0], vec![0.0], vec![3.0]);
        assert_eq!(generalized_energy(&sys, 1, &state).unwrap(), 3.0);

        // V_1(q) = q, L_1 = q^2/2 at q = 2, p = 1: E_1 = 2 - 2 = 0
        let linear_channel = NoiseChannel {
            potential: Arc::new(|q: &[f64]| 0.5 * q[0] * q[0]),
            grad_potential: Arc::new(|q: &[f64]| vec![q[0]]),
            field: Arc::new(|q: &[f64]| vec![q[0]]),
            jac_field: Arc::new(|_| vec![1.0]),
        };
        let sys = LagrangianSystem::new(
            1,
            Arc::new(|_, v: &[f64]| 0.5 * v[0] * v[0]),
            Arc::new(|_, _| vec![0.0]),
            Arc::new(|_, v: &[f64]| vec![v[0]]),
            LegendreInverseMode::ClosedForm(Arc::new(|_, p: &[f64]| p.to_vec())),
            vec![linear_channel],
        );
        let state = PontryaginState::new(vec![2.0], vec![0.0], vec![1.0]);
        assert!((generalized_energy(&sys, 1, &state).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn noise_hamiltonian_linear_potential() {
        // V_1 = 0, L_1(q) = q: H_1 = -q, dH/dq = -1, dH/dp = 0
        let sys = catalog::free_particle_with_linear_noise(1.0);
        let h = noise_hamiltonian(&sys, 1, &[2.0], &[5.0]).unwrap();
        assert_eq!(h.value, -2.0);
        assert_eq!(h.grad_q, vec![-1.0]);
        assert_eq!(h.grad_p, vec![0.0]);
    }

    #[test]
    fn noise_hamiltonian_scaling_field() {
        // V_1(q) = q, L_1 = 0 at (q, p) = (2, 3): H_1 = 6, dH/dq = 3, dH/dp = 2
        let channel = NoiseChannel {
            potential: Arc::new(|_| 0.0),
            grad_potential: Arc::new(|_| vec![0.0]),
            field: Arc::new(|q: &[f64]| q.to_vec()),
            jac_field: Arc::new(|_| vec![1.0]),
        };
        let sys = LagrangianSystem::new(
            1,
            Arc::new(|_, v: &[f64]| 0.5 * v[0] * v[0]),
            Arc::new(|_, _| vec![0.0]),
            Arc::new(|_, v: &[f64]| vec![v[0]]),
            LegendreInverseMode::ClosedForm(Arc::new(|_, p: &[f64]| p.to_vec())),
            vec![channel],
        );
        let h = noise_hamiltonian(&sys, 1, &[2.0], &[3.0]).unwrap();
        assert_eq!(h.value, 6.0);
        assert_eq!(h.grad_q, vec![3.0]);
        assert_eq!(h.grad_p, vec![2.0]);
    }

    #[test]
    fn noise_hamiltonian_rotation_field() {
        let sys = catalog::planar_central_potential(1.0, 0.25, 1.0, 0.0, 0.0);
        let h = noise_hamiltonian(&sys, 1, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        // V_1(1, 0) = (0, 1); H_1 = <p, V_1> = 1
        assert_eq!(h.value, 1.0);
        assert_eq!(h.grad_p, vec![0.0, 1.0]);
        assert!(noise_hamiltonian(&sys, 2, &[1.0, 0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn noise_hamiltonian_gradients_match_value() {
        // finite differences of the value against the reported gradients
        let sys = catalog::planar_central_potential(1.0, 0.25, 0.7, 0.3, 0.0);
        let q = [0.4, -0.3];
        let p = [0.2, 0.9];
        let h = noise_hamiltonian(&sys, 1, &q, &p).unwrap();
        for c in 0..2 {
            let mut qp = q.to_vec();
            qp[c] += FD_STEP;
            let mut qm = q.to_vec();
            qm[c] -= FD_STEP;
            let fd = (noise_hamiltonian(&sys, 1, &qp, &p).unwrap().value
                - noise_hamiltonian(&sys, 1, &qm, &p).unwrap().value)
                / (2.0 * FD_STEP);
            assert!(rel_err(h.grad_q[c], fd) < GRADIENT_TOL);

            let mut pp = p.to_vec();
            pp[c] += FD_STEP;
            let mut pm = p.to_vec();
            pm[c] -= FD_STEP;
            let fd = (noise_hamiltonian(&sys, 1, &q, &pp).unwrap().value
                - noise_hamiltonian(&sys, 1, &q, &pm).unwrap().value)
                / (2.0 * FD_STEP);
            assert!(rel_err(h.grad_p[c], fd) < GRADIENT_TOL);
        }
    }

    #[test]
    fn validation_passes_for_catalog_systems() {
        for sys in [
            catalog::free_particle(2, 1.0),
            catalog::harmonic_oscillator(1, 1.0, 1.0, 0.5),
            catalog::planar_central_potential(1.0, 0.25, 0.5, 0.25, 0.0),
            catalog::cosh_lagrangian(1.0, 0.2),
        ] {
            let report = validate_gradients(&sys, 16, 7).unwrap();
            assert!(report.max_error() <= 1e-8, "{:?}", report.entries);
        }
    }

    #[test]
    fn validation_catches_wrong_gradient() {
        // gradLq deliberately negated
        let sys = LagrangianSystem::new(
            1,
            Arc::new(|q: &[f64], v: &[f64]| 0.5 * v[0] * v[0] - 0.5 * q[0] * q[0]),
            Arc::new(|q: &[f64], _| vec![q[0]]),
            Arc::new(|_, v: &[f64]| vec![v[0]]),
            LegendreInverseMode::ClosedForm(Arc::new(|_, p: &[f64]| p.to_vec())),
            vec![],
        );
        match validate_gradients(&sys, 8, 1) {
            Err(Error::GradientValidation { function, .. }) => assert_eq!(function, "gradLq"),
            other => panic!("expected gradient validation failure, got {other:?}"),
        }
    }

    #[test]
    fn validation_requires_probes() {
        let sys = catalog::free_particle(1, 1.0);
        assert!(validate_gradients(&sys, 0, 1).is_err());
    }

    #[test]
    fn energy_matches_classical_energy_on_legendre_submanifold() {
        let sys = catalog::cosh_lagrangian(1.0, 0.0);
        let q = vec![0.3];
        let v = vec![0.8];
        let p = legendre(&sys, &q, &v);
        let state = PontryaginState::new(q.clone(), v.clone(), p.clone());
        let e0 = generalized_energy(&sys, 0, &state).unwrap();
        let classical = linalg::dot(&p, &v) - sys.lagrangian(&q, &v);
        assert!((e0 - classical).abs() < 1e-15);
    }
}

//! Built-in Lagrangian systems, referenced by name from scenario configs.
//!
//! | name                      | parameters (defaults)                                   |
//! |---------------------------|---------------------------------------------------------|
//! | `free_particle`           | `dim` (1), `mass` (1), `additive` (0)                   |
//! | `harmonic_oscillator`     | `dim` (1), `mass` (1), `omega` (1), `force_noise` (0)   |
//! | `planar_central_potential`| `a` (1), `b` (0.25), `rot` (0.5), `radial` (0.25), `asym` (0) |
//! | `cosh_lagrangian`         | `pot` (1), `force_noise` (0)                            |
//!
//! `free_particle` has no noise channel unless `additive != 0`, in which case
//! it gains one channel with `V_1 = 0, L_1(q) = additive * q_1` (the additive
//! momentum-noise system). The other three always carry one channel, which is
//! the zero channel when its couplings vanish, so their driving noise always
//! has two components.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mechanics::{LagrangianSystem, LegendreInverseMode, NoiseChannel};

/// `L = m |v|^2 / 2` on `R^n`, no noise channels.
pub fn free_particle(n: usize, mass: f64) -> LagrangianSystem {
    LagrangianSystem::new(
        n,
        Arc::new(move |_, v: &[f64]| 0.5 * mass * v.iter().map(|x| x * x).sum::<f64>()),
        Arc::new(move |q: &[f64], _| vec![0.0; q.len()]),
        Arc::new(move |_, v: &[f64]| v.iter().map(|x| mass * x).collect()),
        LegendreInverseMode::ClosedForm(Arc::new(move |_, p: &[f64]| {
            p.iter().map(|x| x / mass).collect()
        })),
        vec![],
    )
}

/// Free particle on `R` with one additive noise channel:
/// `V_1 = 0`, `L_1(q) = coupling * q`. Along solutions the momentum picks up
/// the noise increment exactly: `p_t = p_0 + coupling * (X^1_t - X^1_0)`.
pub fn free_particle_with_linear_noise(coupling: f64) -> LagrangianSystem {
    let channel = NoiseChannel {
        potential: Arc::new(move |q: &[f64]| coupling * q[0]),
        grad_potential: Arc::new(move |_| vec![coupling]),
        field: Arc::new(|_| vec![0.0]),
        jac_field: Arc::new(|_| vec![0.0]),
    };
    LagrangianSystem::new(
        1,
        Arc::new(|_, v: &[f64]| 0.5 * v[0] * v[0]),
        Arc::new(|_, _| vec![0.0]),
        Arc::new(|_, v: &[f64]| vec![v[0]]),
        LegendreInverseMode::ClosedForm(Arc::new(|_, p: &[f64]| p.to_vec())),
        vec![channel],
    )
}

/// `L = m |v|^2 / 2 - m omega^2 |q|^2 / 2` on `R^n`, with one channel
/// `V_1 = 0`, `L_1(q) = force_noise * q_1` (random forcing of the first
/// momentum component).
pub fn harmonic_oscillator(n: usize, mass: f64, omega: f64, force_noise: f64) -> LagrangianSystem {
    let w2 = omega * omega;
    let channel = NoiseChannel {
        potential: Arc::new(move |q: &[f64]| force_noise * q[0]),
        grad_potential: Arc::new(move |q: &[f64]| {
            let mut g = vec![0.0; q.len()];
            g[0] = force_noise;
            g
        }),
        field: Arc::new(move |q: &[f64]| vec![0.0; q.len()]),
        jac_field: Arc::new(move |q: &[f64]| vec![0.0; q.len() * q.len()]),
    };
    LagrangianSystem::new(
        n,
        Arc::new(move |q: &[f64], v: &[f64]| {
            0.5 * mass * v.iter().map(|x| x * x).sum::<f64>()
                - 0.5 * mass * w2 * q.iter().map(|x| x * x).sum::<f64>()
        }),
        Arc::new(move |q: &[f64], _| q.iter().map(|x| -mass * w2 * x).collect()),
        Arc::new(move |_, v: &[f64]| v.iter().map(|x| mass * x).collect()),
        LegendreInverseMode::ClosedForm(Arc::new(move |_, p: &[f64]| {
            p.iter().map(|x| x / mass).collect()
        })),
        vec![channel],
    )
}

/// Rotationally invariant planar system
/// `L = |v|^2 / 2 - U(|q|^2)` with `U = a r^2 / 2 + b r^4 / 4 + asym * q_1`,
/// and one rotation-equivariant channel
/// `V_1(q) = rot * (-q_2, q_1)`, `L_1(q) = radial * |q|^2 / 2`.
///
/// With `asym = 0` the angular momentum `<p, (-q_2, q_1)>` is conserved along
/// solutions; `asym != 0` breaks the symmetry.
pub fn planar_central_potential(
    a: f64,
    b: f64,
    rot: f64,
    radial: f64,
    asym: f64,
) -> LagrangianSystem {
    let channel = NoiseChannel {
        potential: Arc::new(move |q: &[f64]| 0.5 * radial * (q[0] * q[0] + q[1] * q[1])),
        grad_potential: Arc::new(move |q: &[f64]| vec![radial * q[0], radial * q[1]]),
        field: Arc::new(move |q: &[f64]| vec![-rot * q[1], rot * q[0]]),
        jac_field: Arc::new(move |_| vec![0.0, -rot, rot, 0.0]),
    };
    LagrangianSystem::new(
        2,
        Arc::new(move |q: &[f64], v: &[f64]| {
            let r2 = q[0] * q[0] + q[1] * q[1];
            0.5 * (v[0] * v[0] + v[1] * v[1]) - (0.5 * a * r2 + 0.25 * b * r2 * r2) - asym * q[0]
        }),
        Arc::new(move |q: &[f64], _| {
            let r2 = q[0] * q[0] + q[1] * q[1];
            let s = a + b * r2;
            vec![-s * q[0] - asym, -s * q[1]]
        }),
        Arc::new(|_, v: &[f64]| v.to_vec()),
        LegendreInverseMode::ClosedForm(Arc::new(|_, p: &[f64]| p.to_vec())),
        vec![channel],
    )
}

/// `L = cosh(v) - pot * q^2 / 2` on `R`, with the Legendre inverse recovered
/// by Newton iteration (`asinh` would be the closed form). One channel
/// `V_1 = 0`, `L_1(q) = force_noise * q`.
pub fn cosh_lagrangian(pot: f64, force_noise: f64) -> LagrangianSystem {
    let channel = NoiseChannel {
        potential: Arc::new(move |q: &[f64]| force_noise * q[0]),
        grad_potential: Arc::new(move |_| vec![force_noise]),
        field: Arc::new(|_| vec![0.0]),
        jac_field: Arc::new(|_| vec![0.0]),
    };
    LagrangianSystem::new(
        1,
        Arc::new(move |q: &[f64], v: &[f64]| v[0].cosh() - 0.5 * pot * q[0] * q[0]),
        Arc::new(move |q: &[f64], _| vec![-pot * q[0]]),
        Arc::new(|_, v: &[f64]| vec![v[0].sinh()]),
        LegendreInverseMode::Newton,
        vec![channel],
    )
}

/// Catalog names accepted by [`build`].
pub fn names() -> &'static [&'static str] {
    &[
        "free_particle",
        "harmonic_oscillator",
        "planar_central_potential",
        "cosh_lagrangian",
    ]
}

fn take(params: &mut BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.remove(key).unwrap_or(default)
}

fn take_dim(params: &mut BTreeMap<String, f64>, default: usize) -> Result<usize> {
    match params.remove("dim") {
        None => Ok(default),
        Some(x) if x >= 1.0 && x.fract() == 0.0 && x <= 16.0 => Ok(x as usize),
        Some(x) => Err(Error::invalid(format!(
            "dim must be an integer in 1..=16, got {x}"
        ))),
    }
}

/// Build a catalog system by name. Unknown names and unknown parameter keys
/// are rejected.
pub fn build(name: &str, params: &BTreeMap<String, f64>) -> Result<LagrangianSystem> {
    let mut params = params.clone();
    let sys = match name {
        "free_particle" => {
            let dim = take_dim(&mut params, 1)?;
            let mass = take(&mut params, "mass", 1.0);
            let additive = take(&mut params, "additive", 0.0);
            if additive != 0.0 {
                if dim != 1 {
                    return Err(Error::invalid(
                        "free_particle with additive noise is one-dimensional",
                    ));
                }
                free_particle_with_linear_noise(additive)
            } else {
                free_particle(dim, mass)
            }
        }
        "harmonic_oscillator" => {
            let dim = take_dim(&mut params, 1)?;
            let mass = take(&mut params, "mass", 1.0);
            let omega = take(&mut params, "omega", 1.0);
            let force_noise = take(&mut params, "force_noise", 0.0);
            harmonic_oscillator(dim, mass, omega, force_noise)
        }
        "planar_central_potential" => {
            let a = take(&mut params, "a", 1.0);
            let b = take(&mut params, "b", 0.25);
            let rot = take(&mut params, "rot", 0.5);
            let radial = take(&mut params, "radial", 0.25);
            let asym = take(&mut params, "asym", 0.0);
            planar_central_potential(a, b, rot, radial, asym)
        }
        "cosh_lagrangian" => {
            let pot = take(&mut params, "pot", 1.0);
            let force_noise = take(&mut params, "force_noise", 0.0);
            cosh_lagrangian(pot, force_noise)
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown catalog system `{other}` (known: {})",
                names().join(", ")
            )))
        }
    };
    if let Some(key) = params.keys().next() {
        return Err(Error::invalid(format!(
            "unknown parameter `{key}` for system `{name}`"
        )));
    }
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanics::validate_gradients;

    #[test]
    fn build_by_name_with_defaults() {
        let params = BTreeMap::new();
        for name in names() {
            let sys = build(name, &params).unwrap();
            validate_gradients(&sys, 8, 3).unwrap();
        }
    }

    #[test]
    fn build_rejects_unknown_names_and_params() {
        let params = BTreeMap::new();
        assert!(build("nonexistent", &params).is_err());
        let mut params = BTreeMap::new();
        params.insert("massx".to_string(), 2.0);
        assert!(build("free_particle", &params).is_err());
    }

    #[test]
    fn build_applies_parameters() {
        let mut params = BTreeMap::new();
        params.insert("mass".to_string(), 2.0);
        let sys = build("free_particle", &params).unwrap();
        assert_eq!(crate::mechanics::legendre(&sys, &[0.0], &[3.0]), vec![6.0]);
    }
}

//! Independent oracles shared by the integration tests. Nothing here calls
//! into the difference operator or the bracket code of the library.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use bciphs::models::ModelDefinition;
use bciphs::structure::{AdmissibleRegion, FieldState, Grid, PointState, ThermoClosure, Transport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Reference coordinate of every node.
pub fn xi(grid: &Grid) -> Vec<f64> {
    (0..grid.len())
        .map(|k| k as f64 / (grid.len() - 1) as f64)
        .collect()
}

/// `mean + a1 cos(pi xi) + a2 cos(2 pi xi)`: zero gradient at both ends.
pub fn cos_profile(grid: &Grid, mean: f64, a1: f64, a2: f64) -> Vec<f64> {
    xi(grid)
        .iter()
        .map(|x| mean + a1 * (PI * x).cos() + a2 * (2.0 * PI * x).cos())
        .collect()
}

/// Smooth profile without any boundary compatibility.
pub fn smooth_profile(grid: &Grid, mean: f64, amp: f64, phase: f64) -> Vec<f64> {
    xi(grid)
        .iter()
        .map(|x| mean + amp * (PI * x + phase).sin() + 0.3 * amp * (3.0 * PI * x).cos())
        .collect()
}

/// Relative spread `u` in `[-1, 1)`.
pub fn unit(r: &mut ChaCha8Rng) -> f64 {
    r.random_range(-1.0..1.0)
}

/// A random admissible state for a built-in model. With `compatible`, every
/// profile has zero gradient at both ends.
pub fn random_state(
    model: &ModelDefinition,
    grid: &Grid,
    r: &mut ChaCha8Rng,
    compatible: bool,
) -> FieldState {
    let p = &model.params;
    let prof = |mean: f64, amp: f64, r: &mut ChaCha8Rng| {
        let a1 = amp * unit(r);
        let a2 = 0.5 * amp * unit(r);
        if compatible {
            cos_profile(grid, mean, a1, a2)
        } else {
            smooth_profile(grid, mean, a1, PI * unit(r))
        }
    };
    let (x, t) = match model.name.as_str() {
        "heat_conduction" => (vec![], prof(p["t0"], 0.2 * p["t0"], r)),
        "p_system_reversible" | "p_system_viscous" => {
            let phi = prof(p["phi0"], 0.2 * p["phi0"], r);
            let u = prof(0.0, 0.3, r);
            let t = prof(p["t0"] * p["phi0"], 0.1 * p["t0"] * p["phi0"], r);
            (vec![phi, u], t)
        }
        "diffusion_reaction_ab" => {
            let ca = prof(1.0, 0.3, r);
            let cb = prof(0.6, 0.2, r);
            let t = prof(p["t_ref"], 20.0, r);
            (vec![ca, cb], t)
        }
        other => panic!("no random state for {other}"),
    };
    FieldState::from_temperature(*grid, x, &t, model.closure.as_ref()).unwrap()
}

/// Wraps a closure and switches every irreversible process off.
#[derive(Debug)]
pub struct Frozen(pub Arc<dyn ThermoClosure>);

impl ThermoClosure for Frozen {
    fn n(&self) -> usize {
        self.0.n()
    }
    fn m(&self) -> usize {
        self.0.m()
    }
    fn energy(&self, x: &[f64], s: f64) -> f64 {
        self.0.energy(x, s)
    }
    fn intensive(&self, x: &[f64], s: f64, out: &mut [f64]) {
        self.0.intensive(x, s, out)
    }
    fn temperature(&self, x: &[f64], s: f64) -> f64 {
        self.0.temperature(x, s)
    }
    fn entropy_at(&self, x: &[f64], temperature: f64) -> f64 {
        self.0.entropy_at(x, temperature)
    }
    fn region(&self) -> AdmissibleRegion {
        self.0.region()
    }
    fn transport(&self, x: &[f64], s: f64) -> Transport {
        self.0.transport(x, s)
    }
    fn gamma0(&self, _i: usize, _p: &PointState<'_>) -> f64 {
        0.0
    }
    fn gamma1(&self, _i: usize, _p: &PointState<'_>) -> f64 {
        0.0
    }
    fn gamma_s(&self, _p: &PointState<'_>) -> f64 {
        0.0
    }
}

pub fn frozen(model: &ModelDefinition) -> ModelDefinition {
    let mut m = model.clone();
    m.closure = Arc::new(Frozen(model.closure.clone()));
    m
}

/// Boundary derivative by the first-order one-sided difference.
pub fn edge_slopes(f: &[f64], dz: f64) -> (f64, f64) {
    let n = f.len();
    ((f[1] - f[0]) / dz, (f[n - 1] - f[n - 2]) / dz)
}

/// Trapezoid rule, written out independently of [`Grid::integrate`].
pub fn trapezoid(f: &[f64], dz: f64) -> f64 {
    let n = f.len();
    dz * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n - 1]))
}

/// Classical RK4 for a scalar autonomous ODE.
pub fn rk4_scalar(f: impl Fn(f64) -> f64, y0: f64, t_end: f64, steps: usize) -> f64 {
    let h = t_end / steps as f64;
    let mut y = y0;
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f(y + 0.5 * h * k1);
        let k3 = f(y + 0.5 * h * k2);
        let k4 = f(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

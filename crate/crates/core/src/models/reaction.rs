use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::dmatrix;

use super::{
    apply_overrides, positive, unit_grid, InitialProfiles, ModelDefinition, PortDoc, Profile,
};
use crate::ports::assemble_pe;
use crate::simulator::AuditTolerance;
use crate::structure::{
    AdmissibleRegion, Bounds, PointState, StructureMatrices, ThermoClosure, Transport,
};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionParams {
    pub l_a: f64,
    pub l_b: f64,
    pub lambda: f64,
    /// Pre-exponential factor of `k(T) = k0 exp(-ea/(R T))`.
    pub k0: f64,
    pub ea: f64,
    /// Equilibrium constant at `t_ref`.
    pub keq_ref: f64,
    /// Reaction energy `u_B0 - u_A0`.
    pub delta_u: f64,
    /// Heat capacity per unit length of the solvent/matrix.
    pub c_m: f64,
    /// Molar heat capacity of both species.
    pub cv_hat: f64,
    pub t_ref: f64,
    pub r_gas: f64,
    pub c_ref: f64,
    /// Nonzero selects the one-way rate `r = k c_A`.
    pub one_way: f64,
}

impl Default for ReactionParams {
    fn default() -> Self {
        Self {
            l_a: 1e-2,
            l_b: 5e-3,
            lambda: 5.0,
            k0: 1.0,
            ea: 2000.0,
            keq_ref: 2.0,
            delta_u: 0.0,
            c_m: 50.0,
            cv_hat: 30.0,
            t_ref: 300.0,
            r_gas: 8.314,
            c_ref: 1.0,
            one_way: 0.0,
        }
    }
}

impl ReactionParams {
    pub fn pairs(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("l_a", self.l_a),
            ("l_b", self.l_b),
            ("lambda", self.lambda),
            ("k0", self.k0),
            ("ea", self.ea),
            ("keq_ref", self.keq_ref),
            ("delta_u", self.delta_u),
            ("c_m", self.c_m),
            ("cv_hat", self.cv_hat),
            ("t_ref", self.t_ref),
            ("r_gas", self.r_gas),
            ("c_ref", self.c_ref),
            ("one_way", self.one_way),
        ]
    }

    pub fn from_overrides(o: &BTreeMap<String, f64>) -> Result<Self> {
        let mut p = Self::default();
        let ReactionParams {
            l_a,
            l_b,
            lambda,
            k0,
            ea,
            keq_ref,
            delta_u,
            c_m,
            cv_hat,
            t_ref,
            r_gas,
            c_ref,
            one_way,
        } = &mut p;
        apply_overrides(
            "diffusion_reaction_ab",
            &mut [
                ("l_a", l_a),
                ("l_b", l_b),
                ("lambda", lambda),
                ("k0", k0),
                ("ea", ea),
                ("keq_ref", keq_ref),
                ("delta_u", delta_u),
                ("c_m", c_m),
                ("cv_hat", cv_hat),
                ("t_ref", t_ref),
                ("r_gas", r_gas),
                ("c_ref", c_ref),
                ("one_way", one_way),
            ],
            o,
        )?;
        Ok(p)
    }
}

/// Ideal mixture of A and B in a matrix of heat capacity `c_m`.
///
/// With `C = c_m + cv_hat (c_A + c_B)` and
/// `theta = (s - sum c_i (s0_i - R ln(c_i/c_ref))) / C`:
/// `T = t_ref exp(theta)` and `h = sum c_i u0_i + C t_ref (exp(theta) - 1)`.
/// The reference entropies are fixed so that the equilibrium constant
/// equals `keq_ref` at `t_ref`; `u0_A = s0_A = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionClosure {
    pub params: ReactionParams,
    s0_b: f64,
}

impl ReactionClosure {
    pub fn new(params: ReactionParams) -> Result<Self> {
        if !(params.k0 > 0.0) || !params.k0.is_finite() {
            return Err(Error::InvalidKinetics(format!(
                "k0 must be positive, got {}",
                params.k0
            )));
        }
        if !(params.keq_ref > 0.0) || !params.keq_ref.is_finite() {
            return Err(Error::InvalidKinetics(format!(
                "equilibrium constant must be positive, got {}",
                params.keq_ref
            )));
        }
        let s0_b =
            (params.r_gas * params.t_ref * params.keq_ref.ln() + params.delta_u) / params.t_ref;
        Ok(Self { params, s0_b })
    }

    fn u0(&self) -> [f64; 2] {
        [0.0, self.params.delta_u]
    }

    fn s0(&self) -> [f64; 2] {
        [0.0, self.s0_b]
    }

    fn capacity(&self, x: &[f64]) -> f64 {
        self.params.c_m + self.params.cv_hat * (x[0] + x[1])
    }

    fn theta(&self, x: &[f64], s: f64) -> f64 {
        let p = &self.params;
        let s0 = self.s0();
        let mix: f64 = (0..2)
            .map(|i| x[i] * (s0[i] - p.r_gas * (x[i] / p.c_ref).ln()))
            .sum();
        (s - mix) / self.capacity(x)
    }

    /// Equilibrium constant `exp(-(du - T ds0)/(R T))`.
    pub fn keq(&self, temperature: f64) -> f64 {
        let p = &self.params;
        (-(p.delta_u - temperature * self.s0_b) / (p.r_gas * temperature)).exp()
    }

    /// Rate constant `k0 exp(-ea/(R T))`.
    pub fn rate_constant(&self, temperature: f64) -> f64 {
        let p = &self.params;
        p.k0 * (-p.ea / (p.r_gas * temperature)).exp()
    }

    /// Reaction rate: reversible mass action, or `k c_A` when `one_way`.
    pub fn rate(&self, c: &[f64], temperature: f64) -> f64 {
        let k = self.rate_constant(temperature);
        if self.params.one_way != 0.0 {
            k * c[0]
        } else {
            k * (c[0] - c[1] / self.keq(temperature))
        }
    }

    /// Chemical affinity `mu_A - mu_B`, in closed form `R T ln(K c_A/c_B)`.
    pub fn affinity(&self, c: &[f64], temperature: f64) -> f64 {
        self.params.r_gas * temperature * self.log_ratio(c, temperature)
    }

    fn log_ratio(&self, c: &[f64], temperature: f64) -> f64 {
        self.keq(temperature).ln() + c[0].ln() - c[1].ln()
    }
}

impl ThermoClosure for ReactionClosure {
    fn n(&self) -> usize {
        2
    }

    fn m(&self) -> usize {
        2
    }

    fn energy(&self, x: &[f64], s: f64) -> f64 {
        let u0 = self.u0();
        x[0] * u0[0]
            + x[1] * u0[1]
            + self.capacity(x) * self.params.t_ref * self.theta(x, s).exp_m1()
    }

    fn intensive(&self, x: &[f64], s: f64, out: &mut [f64]) {
        let p = &self.params;
        let theta = self.theta(x, s);
        let t = p.t_ref * theta.exp();
        let (u0, s0) = (self.u0(), self.s0());
        for i in 0..2 {
            out[i] = u0[i] + p.cv_hat * (t - p.t_ref) - t * s0[i]
                + p.r_gas * t * (x[i] / p.c_ref).ln()
                + p.r_gas * t
                - p.cv_hat * t * theta;
        }
    }

    fn temperature(&self, x: &[f64], s: f64) -> f64 {
        self.params.t_ref * self.theta(x, s).exp()
    }

    fn entropy_at(&self, x: &[f64], temperature: f64) -> f64 {
        let p = &self.params;
        let s0 = self.s0();
        let mix: f64 = (0..2)
            .map(|i| x[i] * (s0[i] - p.r_gas * (x[i] / p.c_ref).ln()))
            .sum();
        self.capacity(x) * (temperature / p.t_ref).ln() + mix
    }

    /// `r/(T A)`, written so that it stays finite at equilibrium. Under the
    /// one-way rate this changes sign with the affinity and is infinite at
    /// equilibrium; the closure validator reports such states.
    fn gamma0(&self, i: usize, p: &PointState<'_>) -> f64 {
        if i != 0 {
            return 0.0;
        }
        let t = p.temperature;
        let k = self.rate_constant(t);
        let l = self.log_ratio(p.x, t);
        let rt2 = self.params.r_gas * t * t;
        if self.params.one_way != 0.0 {
            return k * p.x[0] / (rt2 * l);
        }
        let ratio = if l.abs() < 1e-12 { 1.0 } else { l.exp_m1() / l };
        k * (p.x[1] / self.keq(t)) * ratio / rt2
    }

    fn gamma1(&self, i: usize, p: &PointState<'_>) -> f64 {
        let l = if i == 0 {
            self.params.l_a
        } else {
            self.params.l_b
        };
        l / (p.temperature * p.temperature)
    }

    fn gamma_s(&self, p: &PointState<'_>) -> f64 {
        self.params.lambda / (p.temperature * p.temperature)
    }

    fn region(&self) -> AdmissibleRegion {
        AdmissibleRegion {
            x: vec![Bounds::new(0.05, 5.0), Bounds::new(0.05, 5.0)],
            s: Bounds::new(-50.0, 50.0),
            positive: vec![0, 1],
        }
    }

    fn transport(&self, x: &[f64], s: f64) -> Transport {
        let p = &self.params;
        let species = (p.l_a / x[0]).max(p.l_b / x[1]) * p.r_gas;
        let heat = p.lambda / self.capacity(x);
        let _ = s;
        Transport {
            diffusivity: species.max(heat),
            wave_speed: 0.0,
        }
    }
}

/// Diffusion-reaction `A -> B` on the state `(c_A, c_B)`: process 0 is the
/// reaction (stoichiometry `(-1, 1)`) together with diffusion of A, process
/// 1 is diffusion of B; heat conduction is the entropy flux.
///
/// Inputs are the molar and entropy fluxes `(L_i/T) dmu_i/dz`,
/// `(lambda/T) dT/dz` at `a` then at `b`; outputs are
/// `[-mu_A(a), -mu_B(a), -T(a), mu_A(b), mu_B(b), T(b)]`.
pub fn diffusion_reaction_ab(params: ReactionParams) -> Result<ModelDefinition> {
    let model = "diffusion_reaction_ab";
    let closure = ReactionClosure::new(params)?;
    for (name, v) in [
        ("l_a", params.l_a),
        ("l_b", params.l_b),
        ("lambda", params.lambda),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidModel(format!(
                "{model}: {name} must be nonnegative, got {v}"
            )));
        }
    }
    for (name, v) in [
        ("c_m", params.c_m),
        ("t_ref", params.t_ref),
        ("r_gas", params.r_gas),
        ("c_ref", params.c_ref),
    ] {
        positive(model, name, v)?;
    }
    if !(params.cv_hat >= 0.0) || !(params.ea >= 0.0) {
        return Err(Error::InvalidModel(format!(
            "{model}: cv_hat and ea must be nonnegative"
        )));
    }
    let mut sm = StructureMatrices::zeros(2, 2);
    sm.g0 = dmatrix![-1.0, 0.0; 1.0, 0.0];
    sm.g1 = Matrix::identity(2, 2);
    sm.gs = 1.0;
    let basis = assemble_pe(&sm);
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let mut xi1 = Matrix::zeros(6, 6);
    let mut xi2 = Matrix::zeros(6, 6);
    for i in 0..3 {
        xi1[(i, 3 + i)] = -c;
        xi1[(3 + i, 3 + i)] = c;
        xi2[(i, i)] = c;
        xi2[(3 + i, i)] = c;
    }
    let grid = unit_grid(51);
    Ok(ModelDefinition {
        name: model.into(),
        sm,
        closure: Arc::new(closure),
        basis,
        xi1,
        xi2,
        field_names: vec!["c_a", "c_b"],
        port_docs: vec![
            PortDoc {
                input: "molar flux of A at a",
                output: "-mu_A at a",
            },
            PortDoc {
                input: "molar flux of B at a",
                output: "-mu_B at a",
            },
            PortDoc {
                input: "entropy flux at a",
                output: "-T at a",
            },
            PortDoc {
                input: "molar flux of A at b",
                output: "mu_A at b",
            },
            PortDoc {
                input: "molar flux of B at b",
                output: "mu_B at b",
            },
            PortDoc {
                input: "entropy flux at b",
                output: "T at b",
            },
        ],
        params: params
            .pairs()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        default_grid: grid,
        default_dt: 2e-4,
        default_t_end: 1.0,
        initial: InitialProfiles {
            x: vec![
                Profile::Cos {
                    mean: 1.0,
                    amplitude: 0.2,
                    modes: 1.0,
                },
                Profile::Cos {
                    mean: 0.3,
                    amplitude: 0.1,
                    modes: 2.0,
                },
            ],
            temperature: Profile::Cos {
                mean: params.t_ref,
                amplitude: 10.0,
                modes: 1.0,
            },
        },
        audit: AuditTolerance {
            space: 250.0,
            time: 1.0,
            scale: 1.0,
        },
    })
}

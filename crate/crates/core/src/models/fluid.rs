use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::dmatrix;

use super::{
    apply_overrides, positive, unit_grid, InitialProfiles, ModelDefinition, PortDoc, Profile,
};
use crate::ports::default_xi;
use crate::simulator::AuditTolerance;
use crate::structure::{
    AdmissibleRegion, Bounds, PointState, StructureMatrices, ThermoClosure, Transport,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidParams {
    /// Stiffness of the quadratic equation of state, `p = -kappa (phi - phi0)`.
    pub kappa: f64,
    /// Reference specific volume.
    pub phi0: f64,
    pub c_v: f64,
    pub t0: f64,
    /// Viscosity; ignored by the reversible model.
    pub mu_hat: f64,
}

impl Default for FluidParams {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            phi0: 1.0,
            c_v: 1.0,
            t0: 1.0,
            mu_hat: 0.01,
        }
    }
}

impl FluidParams {
    pub fn pairs(&self, viscous: bool) -> Vec<(&'static str, f64)> {
        let mut v = vec![
            ("kappa", self.kappa),
            ("phi0", self.phi0),
            ("c_v", self.c_v),
            ("t0", self.t0),
        ];
        if viscous {
            v.push(("mu_hat", self.mu_hat));
        }
        v
    }

    pub fn from_overrides(o: &BTreeMap<String, f64>, viscous: bool) -> Result<Self> {
        let mut p = Self::default();
        let name = if viscous {
            "p_system_viscous"
        } else {
            "p_system_reversible"
        };
        let FluidParams {
            kappa,
            phi0,
            c_v,
            t0,
            mu_hat,
        } = &mut p;
        let mut slots = vec![("kappa", kappa), ("phi0", phi0), ("c_v", c_v), ("t0", t0)];
        if viscous {
            slots.push(("mu_hat", mu_hat));
        }
        apply_overrides(name, &mut slots, o)?;
        Ok(p)
    }

    fn check(&self, model: &str) -> Result<()> {
        positive(model, "kappa", self.kappa)?;
        positive(model, "phi0", self.phi0)?;
        positive(model, "c_v", self.c_v)?;
        positive(model, "t0", self.t0)
    }
}

/// `h = 1/2 upsilon^2 + 1/2 kappa (phi - phi0)^2 + c_v T0 phi0 exp(s/c_v)` on
/// the state `(phi, upsilon)`. With `viscous`, one irreversible process with
/// `gamma_1 = mu_hat/T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidClosure {
    pub params: FluidParams,
    pub viscous: bool,
}

impl ThermoClosure for FluidClosure {
    fn n(&self) -> usize {
        2
    }

    fn m(&self) -> usize {
        usize::from(self.viscous)
    }

    fn energy(&self, x: &[f64], s: f64) -> f64 {
        let p = &self.params;
        let dphi = x[0] - p.phi0;
        0.5 * x[1] * x[1] + 0.5 * p.kappa * dphi * dphi + p.c_v * p.t0 * p.phi0 * (s / p.c_v).exp()
    }

    fn intensive(&self, x: &[f64], _s: f64, out: &mut [f64]) {
        out[0] = self.params.kappa * (x[0] - self.params.phi0);
        out[1] = x[1];
    }

    fn temperature(&self, _x: &[f64], s: f64) -> f64 {
        let p = &self.params;
        p.t0 * p.phi0 * (s / p.c_v).exp()
    }

    fn entropy_at(&self, _x: &[f64], temperature: f64) -> f64 {
        let p = &self.params;
        p.c_v * (temperature / (p.t0 * p.phi0)).ln()
    }

    fn gamma1(&self, _i: usize, p: &PointState<'_>) -> f64 {
        self.params.mu_hat / p.temperature
    }

    fn region(&self) -> AdmissibleRegion {
        let p = &self.params;
        AdmissibleRegion {
            x: vec![
                Bounds::new(0.2 * p.phi0, 5.0 * p.phi0),
                Bounds::new(-10.0, 10.0),
            ],
            s: Bounds::new(-2.0 * p.c_v, 2.0 * p.c_v),
            positive: vec![0],
        }
    }

    fn transport(&self, _x: &[f64], _s: f64) -> Transport {
        Transport {
            diffusivity: if self.viscous {
                self.params.mu_hat
            } else {
                0.0
            },
            wave_speed: self.params.kappa.sqrt(),
        }
    }
}

fn fluid_model(name: &str, params: FluidParams, viscous: bool) -> ModelDefinition {
    let mut sm = StructureMatrices::zeros(2, usize::from(viscous));
    sm.p1 = dmatrix![0.0, 1.0; 1.0, 0.0];
    let basis = if viscous {
        sm.g1 = dmatrix![0.0; 1.0];
        dmatrix![
            0.0, 0.5;
            1.0, 0.0;
            0.0, 0.0;
            0.0, 0.5;
            0.0, 0.0
        ]
    } else {
        dmatrix![
            0.0, 1.0;
            1.0, 0.0;
            0.0, 0.0;
            0.0, 0.0
        ]
    };
    let (xi1, xi2) = default_xi(2);
    let grid = unit_grid(101);
    let mut dt = 0.25 * grid.dz() / params.kappa.sqrt();
    if viscous && params.mu_hat > 0.0 {
        dt = dt.min(0.25 * grid.dz() * grid.dz() / params.mu_hat);
    }
    ModelDefinition {
        name: name.into(),
        sm,
        closure: Arc::new(FluidClosure { params, viscous }),
        basis,
        xi1,
        xi2,
        field_names: vec!["phi", "upsilon"],
        port_docs: vec![
            PortDoc {
                input: "-p (plus viscous stress) at b",
                output: "velocity at b",
            },
            PortDoc {
                input: "p (minus viscous stress) at a",
                output: "velocity at a",
            },
        ],
        params: params
            .pairs(viscous)
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        default_grid: grid,
        default_dt: dt,
        default_t_end: 2.0,
        initial: InitialProfiles {
            x: vec![
                Profile::Sin {
                    mean: params.phi0,
                    amplitude: 0.1 * params.phi0,
                    modes: 1.0,
                },
                Profile::Cos {
                    mean: 0.0,
                    amplitude: 0.1,
                    modes: 1.0,
                },
            ],
            temperature: Profile::Const(params.t0 * params.phi0),
        },
        audit: AuditTolerance {
            space: 1.0,
            // acoustic modes make d3S/dt3 about omega^2/6 times dS/dt
            time: 15.0,
            scale: 1.0,
        },
    }
}

/// Reversible p-system in Lagrangian coordinates, state `(phi, upsilon)`.
/// Inputs `[-p(b); p(a)]`, outputs `[upsilon(b); upsilon(a)]`.
pub fn p_system_reversible(params: FluidParams) -> Result<ModelDefinition> {
    params.check("p_system_reversible")?;
    Ok(fluid_model("p_system_reversible", params, false))
}

/// Viscous p-system. Inputs are the boundary stresses
/// `[-p(b) + mu_hat dv/dz(b); p(a) - mu_hat dv/dz(a)]`; outputs the
/// velocities. `mu_hat = 0` is allowed and reproduces the reversible model.
pub fn p_system_viscous(params: FluidParams) -> Result<ModelDefinition> {
    params.check("p_system_viscous")?;
    if !(params.mu_hat >= 0.0) || !params.mu_hat.is_finite() {
        return Err(Error::InvalidModel(format!(
            "p_system_viscous: mu_hat must be nonnegative, got {}",
            params.mu_hat
        )));
    }
    Ok(fluid_model("p_system_viscous", params, true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rest_state_has_zero_pressure() {
        let tc = FluidClosure {
            params: FluidParams::default(),
            viscous: false,
        };
        let mut e = [0.0; 2];
        tc.intensive(&[1.0, 0.3], 0.0, &mut e);
        assert_eq!(e, [0.0, 0.3]);
        tc.intensive(&[1.5, 0.0], 0.0, &mut e);
        // dh/dphi = -p, and p decreases with phi
        assert!(e[0] > 0.0);
    }

    #[test]
    fn negative_viscosity_is_rejected() {
        let p = FluidParams {
            mu_hat: -1.0,
            ..FluidParams::default()
        };
        assert!(p_system_viscous(p).is_err());
        assert!(p_system_viscous(FluidParams {
            mu_hat: 0.0,
            ..FluidParams::default()
        })
        .is_ok());
    }
}

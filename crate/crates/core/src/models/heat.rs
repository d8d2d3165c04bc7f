use std::collections::BTreeMap;
use std::sync::Arc;

use super::{
    apply_overrides, positive, unit_grid, InitialProfiles, ModelDefinition, PortDoc, Profile,
};
use crate::ports::default_xi;
use crate::simulator::AuditTolerance;
use crate::structure::{
    AdmissibleRegion, Bounds, PointState, StructureMatrices, ThermoClosure, Transport,
};
use crate::{Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatParams {
    /// Heat conduction coefficient.
    pub lambda: f64,
    /// Heat capacity per unit length.
    pub c_v: f64,
    /// Reference temperature, reached at `s = 0`.
    pub t0: f64,
}

impl Default for HeatParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            c_v: 1.0,
            t0: 300.0,
        }
    }
}

impl HeatParams {
    pub fn pairs(&self) -> Vec<(&'static str, f64)> {
        vec![("lambda", self.lambda), ("c_v", self.c_v), ("t0", self.t0)]
    }

    pub fn from_overrides(o: &BTreeMap<String, f64>) -> Result<Self> {
        let mut p = Self::default();
        apply_overrides(
            "heat_conduction",
            &mut [
                ("lambda", &mut p.lambda),
                ("c_v", &mut p.c_v),
                ("t0", &mut p.t0),
            ],
            o,
        )?;
        Ok(p)
    }
}

/// `u(s) = c_v T0 exp(s/c_v)`, so `T = T0 exp(s/c_v)`, with `gamma_s = lambda/T^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatClosure {
    pub params: HeatParams,
}

impl ThermoClosure for HeatClosure {
    fn n(&self) -> usize {
        0
    }

    fn m(&self) -> usize {
        0
    }

    fn energy(&self, _x: &[f64], s: f64) -> f64 {
        let p = &self.params;
        p.c_v * p.t0 * (s / p.c_v).exp()
    }

    fn intensive(&self, _x: &[f64], _s: f64, _out: &mut [f64]) {}

    fn temperature(&self, _x: &[f64], s: f64) -> f64 {
        self.params.t0 * (s / self.params.c_v).exp()
    }

    fn entropy_at(&self, _x: &[f64], temperature: f64) -> f64 {
        self.params.c_v * (temperature / self.params.t0).ln()
    }

    fn gamma_s(&self, p: &PointState<'_>) -> f64 {
        self.params.lambda / (p.temperature * p.temperature)
    }

    fn region(&self) -> AdmissibleRegion {
        let c = self.params.c_v;
        AdmissibleRegion {
            x: vec![],
            s: Bounds::new(-2.0 * c, 2.0 * c),
            positive: vec![],
        }
    }

    fn transport(&self, _x: &[f64], _s: f64) -> Transport {
        Transport {
            diffusivity: self.params.lambda / self.params.c_v,
            wave_speed: 0.0,
        }
    }
}

/// Heat conduction: no extensive fields besides entropy, one entropy flux.
/// Inputs are the entropy flux `(lambda/T) dT/dz` at `b` and its negative
/// at `a`; outputs are the boundary temperatures.
pub fn heat_conduction(params: HeatParams) -> Result<ModelDefinition> {
    positive("heat_conduction", "lambda", params.lambda)?;
    positive("heat_conduction", "c_v", params.c_v)?;
    positive("heat_conduction", "t0", params.t0)?;
    let mut sm = StructureMatrices::zeros(0, 0);
    sm.gs = 1.0;
    let (xi1, xi2) = default_xi(2);
    let grid = unit_grid(101);
    let dt = 0.25 * grid.dz() * grid.dz() * params.c_v / params.lambda;
    Ok(ModelDefinition {
        name: "heat_conduction".into(),
        sm,
        closure: Arc::new(HeatClosure { params }),
        basis: Matrix::identity(2, 2),
        xi1,
        xi2,
        field_names: vec![],
        port_docs: vec![
            PortDoc {
                input: "entropy flux (lambda/T) dT/dz at b",
                output: "temperature at b",
            },
            PortDoc {
                input: "entropy flux -(lambda/T) dT/dz at a",
                output: "temperature at a",
            },
        ],
        params: params
            .pairs()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        default_grid: grid,
        default_dt: dt,
        default_t_end: 0.25,
        initial: InitialProfiles {
            x: vec![],
            temperature: Profile::Cos {
                mean: params.t0,
                amplitude: 50.0,
                modes: 1.0,
            },
        },
        audit: AuditTolerance {
            space: 20.0,
            time: 1.0,
            scale: 1.0,
        },
    })
}

//! Built-in models and the name registry used by the command line.

mod fluid;
mod heat;
mod reaction;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

pub use fluid::{p_system_reversible, p_system_viscous, FluidClosure, FluidParams};
pub use heat::{heat_conduction, HeatClosure, HeatParams};
pub use reaction::{diffusion_reaction_ab, ReactionClosure, ReactionParams};

use crate::ports::{self, PortParametrization};
use crate::simulator::AuditTolerance;
use crate::structure::{
    sample_region, validate_closure, validate_structure, FieldState, Grid, StructureMatrices,
    ThermoClosure, ValidationReport,
};
use crate::{Error, Matrix, Result};

/// Names accepted by [`build`].
pub const MODEL_NAMES: [&str; 4] = [
    "heat_conduction",
    "p_system_reversible",
    "p_system_viscous",
    "diffusion_reaction_ab",
];

/// Meaning of one input/output pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PortDoc {
    pub input: &'static str,
    pub output: &'static str,
}

/// Shape of a default initial profile, on `xi = (z - a)/(b - a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Const(f64),
    /// `mean + amplitude * sin(modes * pi * xi)`
    Sin {
        mean: f64,
        amplitude: f64,
        modes: f64,
    },
    /// `mean + amplitude * cos(modes * pi * xi)`
    Cos {
        mean: f64,
        amplitude: f64,
        modes: f64,
    },
    /// `mean + amplitude * (2 xi - 1)`
    Linear {
        mean: f64,
        amplitude: f64,
    },
}

impl Profile {
    pub fn eval(&self, grid: &Grid) -> Vec<f64> {
        let span = grid.b() - grid.a();
        grid.nodes()
            .iter()
            .map(|z| {
                let xi = (z - grid.a()) / span;
                match *self {
                    Profile::Const(c) => c,
                    Profile::Sin {
                        mean,
                        amplitude,
                        modes,
                    } => mean + amplitude * (modes * PI * xi).sin(),
                    Profile::Cos {
                        mean,
                        amplitude,
                        modes,
                    } => mean + amplitude * (modes * PI * xi).cos(),
                    Profile::Linear { mean, amplitude } => mean + amplitude * (2.0 * xi - 1.0),
                }
            })
            .collect()
    }
}

/// Initial data in terms of the extensive fields and the temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialProfiles {
    pub x: Vec<Profile>,
    pub temperature: Profile,
}

/// A complete model: structure, closure, port basis and defaults.
#[derive(Debug, Clone)]
pub struct ModelDefinition {
    pub name: String,
    pub sm: StructureMatrices,
    pub closure: Arc<dyn ThermoClosure>,
    /// Basis of the column space of the port matrix.
    pub basis: Matrix,
    pub xi1: Matrix,
    pub xi2: Matrix,
    pub field_names: Vec<&'static str>,
    pub port_docs: Vec<PortDoc>,
    /// Resolved parameter values, including defaults.
    pub params: BTreeMap<String, f64>,
    pub default_grid: Grid,
    pub default_dt: f64,
    pub default_t_end: f64,
    pub initial: InitialProfiles,
    /// Audit constants calibrated on this model.
    pub audit: AuditTolerance,
}

impl ModelDefinition {
    pub fn pe(&self) -> Matrix {
        ports::assemble_pe(&self.sm)
    }

    pub fn ports(&self) -> Result<PortParametrization> {
        ports::build_ports(&self.basis, &self.pe(), &self.xi1, &self.xi2)
    }

    /// Number of inputs.
    pub fn port_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn initial_state(&self, grid: &Grid) -> Result<FieldState> {
        let x = self.initial.x.iter().map(|p| p.eval(grid)).collect();
        let t = self.initial.temperature.eval(grid);
        FieldState::from_temperature(*grid, x, &t, self.closure.as_ref())
    }

    /// Runs the structure, closure, parametrization and (for nonsingular
    /// `P1`) reversible boundary-condition validators.
    pub fn validate(&self, samples: usize, seed: u64) -> ValidationReport {
        let mut report = validate_structure(&self.sm);
        if self.closure.n() != self.sm.n || self.closure.m() != self.sm.m {
            report.push(
                "dimensions",
                format!(
                    "closure has n={}, m={} but structure has n={}, m={}",
                    self.closure.n(),
                    self.closure.m(),
                    self.sm.n,
                    self.sm.m
                ),
            );
            return report;
        }
        let smp = sample_region(self.closure.as_ref(), &self.default_grid, samples, seed);
        report.merge(validate_closure(self.closure.as_ref(), &smp));
        if !report.is_clean() {
            return report;
        }
        let pp = match self.ports() {
            Ok(pp) => pp,
            Err(e) => {
                report.push("ports", e.to_string());
                return report;
            }
        };
        let pe = self.pe();
        let proj = &pp.m * &pp.mp * &pe;
        let span = (proj - &pe).amax();
        if !(span <= 1e-10) {
            report.push(
                "ports",
                format!("basis does not span the port matrix (deviation {span:e})"),
            );
        }
        if self.sm.n > 0 && self.sm.p1.clone().try_inverse().is_some() {
            let wb = ports::restrict_to_extensive(&pp.wb, self.sm.n);
            let wc = ports::restrict_to_extensive(&pp.wc, self.sm.n);
            match ports::validate_bcphs(&wb, &wc, &self.sm.p1) {
                Ok(r) => report.merge(r),
                Err(e) => report.push("bcphs", e.to_string()),
            }
        }
        report
    }
}

/// Builds a built-in model with parameter overrides. Unknown parameter
/// names are rejected.
pub fn build(name: &str, overrides: &BTreeMap<String, f64>) -> Result<ModelDefinition> {
    match name {
        "heat_conduction" => heat_conduction(HeatParams::from_overrides(overrides)?),
        "p_system_reversible" => {
            p_system_reversible(FluidParams::from_overrides(overrides, false)?)
        }
        "p_system_viscous" => p_system_viscous(FluidParams::from_overrides(overrides, true)?),
        "diffusion_reaction_ab" => {
            diffusion_reaction_ab(ReactionParams::from_overrides(overrides)?)
        }
        other => Err(Error::InvalidModel(format!(
            "unknown model '{other}', expected one of {}",
            MODEL_NAMES.join(", ")
        ))),
    }
}

/// Default parameters of a model, in declaration order.
pub fn default_params(name: &str) -> Result<Vec<(&'static str, f64)>> {
    match name {
        "heat_conduction" => Ok(HeatParams::default().pairs()),
        "p_system_reversible" => Ok(FluidParams::default().pairs(false)),
        "p_system_viscous" => Ok(FluidParams::default().pairs(true)),
        "diffusion_reaction_ab" => Ok(ReactionParams::default().pairs()),
        other => Err(Error::InvalidModel(format!("unknown model '{other}'"))),
    }
}

/// Applies overrides onto named parameter slots.
pub(crate) fn apply_overrides(
    model: &str,
    slots: &mut [(&'static str, &mut f64)],
    overrides: &BTreeMap<String, f64>,
) -> Result<()> {
    for (key, value) in overrides {
        match slots.iter_mut().find(|(name, _)| name == key) {
            Some((_, slot)) => **slot = *value,
            None => {
                let known: Vec<&str> = slots.iter().map(|(n, _)| *n).collect();
                return Err(Error::InvalidModel(format!(
                    "model {model} has no parameter '{key}' (known: {})",
                    known.join(", ")
                )));
            }
        }
    }
    Ok(())
}

pub(crate) fn positive(model: &str, name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!(
            "{model}: parameter {name} must be positive, got {v}"
        )))
    }
}

pub(crate) fn unit_grid(n: usize) -> Grid {
    Grid::new(0.0, 1.0, n).expect("static grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_model_validates() {
        for name in MODEL_NAMES {
            let model = build(name, &BTreeMap::new()).unwrap();
            let report = model.validate(200, 7);
            assert!(report.is_clean(), "{name}: {report}");
            assert_eq!(model.port_docs.len(), model.port_dim(), "{name}");
            let grid = model.default_grid;
            let state = model.initial_state(&grid).unwrap();
            state.check_admissible(model.closure.as_ref()).unwrap();
        }
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(matches!(
            build("navier_stokes", &BTreeMap::new()),
            Err(Error::InvalidModel(_))
        ));
        let mut o = BTreeMap::new();
        o.insert("viscosity".to_string(), 1.0);
        let err = build("heat_conduction", &o).unwrap_err();
        assert!(err.to_string().contains("viscosity"));
    }

    #[test]
    fn default_param_lists_match_models() {
        for name in MODEL_NAMES {
            let model = build(name, &BTreeMap::new()).unwrap();
            let pairs = default_params(name).unwrap();
            assert_eq!(pairs.len(), model.params.len(), "{name}");
            for (k, v) in pairs {
                assert_eq!(model.params[k], v);
            }
        }
    }

    #[test]
    fn profiles_evaluate_on_reference_coordinate() {
        let g = Grid::new(2.0, 4.0, 5).unwrap();
        let lin = Profile::Linear {
            mean: 1.0,
            amplitude: 0.5,
        }
        .eval(&g);
        assert_eq!(lin, vec![0.5, 0.75, 1.0, 1.25, 1.5]);
        let s = Profile::Sin {
            mean: 0.0,
            amplitude: 1.0,
            modes: 1.0,
        }
        .eval(&g);
        assert!((s[2] - 1.0).abs() < 1e-15 && s[0] == 0.0);
    }
}

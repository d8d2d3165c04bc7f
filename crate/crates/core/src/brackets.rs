//! Pseudo-brackets with the entropy functional, modulated driving forces and
//! local entropy production.

use crate::discretization::DiffOperator;
use crate::structure::{FieldState, PointState, StructureMatrices, ThermoClosure};
use crate::{Error, Result};

/// Co-energy variables on the grid: `dh/dx` (n fields) and `T = dh/ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoEnergy {
    pub dh_dx: Vec<Vec<f64>>,
    pub dh_ds: Vec<f64>,
}

impl CoEnergy {
    pub fn len(&self) -> usize {
        self.dh_ds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dh_ds.is_empty()
    }

    pub fn n(&self) -> usize {
        self.dh_dx.len()
    }
}

/// Sign used for the first-order brackets.
///
/// `Physical` gives `+g^T d/dz (dh/dx)`, the gradient of the intensive
/// variable, and makes every production term a square. `Literal` expands the
/// bracket formula with the entropy functional verbatim and returns the
/// opposite sign; the energy balance still closes but the first-order
/// production terms change sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BracketConvention {
    #[default]
    Physical,
    Literal,
}

impl BracketConvention {
    pub fn name(&self) -> &'static str {
        match self {
            BracketConvention::Physical => "physical",
            BracketConvention::Literal => "literal",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "physical" => Some(BracketConvention::Physical),
            "literal" => Some(BracketConvention::Literal),
            _ => None,
        }
    }
}

/// Evaluates the co-energy at every node.
pub fn co_energy(state: &FieldState, tc: &dyn ThermoClosure) -> Result<CoEnergy> {
    let n = state.n();
    if tc.n() != n {
        return Err(Error::DimensionMismatch {
            context: "closure extensive variable count",
            expected: n,
            got: tc.n(),
        });
    }
    let len = state.len();
    let mut dh_dx = vec![vec![0.0; len]; n];
    let mut dh_ds = vec![0.0; len];
    let mut xk = vec![0.0; n];
    let mut ek = vec![0.0; n];
    for k in 0..len {
        state.x_at(k, &mut xk);
        let t = tc.temperature(&xk, state.s[k]);
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InadmissibleState {
                node: k,
                reason: format!("temperature {t} is not positive"),
            });
        }
        tc.intensive(&xk, state.s[k], &mut ek);
        for i in 0..n {
            dh_dx[i][k] = ek[i];
        }
        dh_ds[k] = t;
    }
    Ok(CoEnergy { dh_dx, dh_ds })
}

fn check_col(ce: &CoEnergy, g_col: &[f64]) -> Result<()> {
    if g_col.len() != ce.n() {
        return Err(Error::DimensionMismatch {
            context: "bracket column length",
            expected: ce.n(),
            got: g_col.len(),
        });
    }
    Ok(())
}

/// Zero-order bracket `-g^T dh/dx` at each node (the affinity for a
/// stoichiometric column).
pub fn bracket_zero(ce: &CoEnergy, g_col: &[f64]) -> Result<Vec<f64>> {
    check_col(ce, g_col)?;
    let mut out = vec![0.0; ce.len()];
    for (g, f) in g_col.iter().zip(&ce.dh_dx) {
        if *g == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(f) {
            *o -= g * v;
        }
    }
    Ok(out)
}

/// First-order bracket `±g^T d/dz (dh/dx)` at each node.
pub fn bracket_one(
    ce: &CoEnergy,
    g_col: &[f64],
    d: &DiffOperator,
    convention: BracketConvention,
) -> Result<Vec<f64>> {
    check_col(ce, g_col)?;
    let mut combo = vec![0.0; ce.len()];
    for (g, f) in g_col.iter().zip(&ce.dh_dx) {
        if *g == 0.0 {
            continue;
        }
        for (o, v) in combo.iter_mut().zip(f) {
            *o += g * v;
        }
    }
    let mut out = d.d_dz(&combo);
    if convention == BracketConvention::Literal {
        out.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(out)
}

/// Temperature gradient `d/dz (dh/ds)`.
pub fn bracket_s(ce: &CoEnergy, d: &DiffOperator) -> Vec<f64> {
    d.d_dz(&ce.dh_ds)
}

/// Modulated driving forces and the matching entropy production densities.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingForces {
    pub r0: Vec<Vec<f64>>,
    pub r1: Vec<Vec<f64>>,
    pub rs: Vec<f64>,
    pub sigma0: Vec<Vec<f64>>,
    pub sigma1: Vec<Vec<f64>>,
    pub sigma_s: Vec<f64>,
}

impl DrivingForces {
    /// Total production density `sum sigma0 + sum sigma1 + gs sigma_s`.
    pub fn sigma_total(&self, gs: f64) -> Vec<f64> {
        let len = self.rs.len();
        (0..len)
            .map(|k| {
                let mut acc = 0.0;
                for f in self.sigma0.iter().chain(&self.sigma1) {
                    acc += f[k];
                }
                acc + gs * self.sigma_s[k]
            })
            .collect()
    }
}

pub fn driving_forces(
    state: &FieldState,
    tc: &dyn ThermoClosure,
    sm: &StructureMatrices,
    d: &DiffOperator,
) -> Result<DrivingForces> {
    let ce = co_energy(state, tc)?;
    driving_forces_with(state, tc, sm, d, &ce, BracketConvention::Physical)
}

/// Same as [`driving_forces`] with a precomputed co-energy.
pub fn driving_forces_with(
    state: &FieldState,
    tc: &dyn ThermoClosure,
    sm: &StructureMatrices,
    d: &DiffOperator,
    ce: &CoEnergy,
    convention: BracketConvention,
) -> Result<DrivingForces> {
    let (n, m) = (sm.n, sm.m);
    if tc.m() != m {
        return Err(Error::DimensionMismatch {
            context: "closure process count",
            expected: m,
            got: tc.m(),
        });
    }
    let len = state.len();
    let b0: Vec<Vec<f64>> = (0..m)
        .map(|l| bracket_zero(ce, sm.g0.column(l).as_slice()))
        .collect::<Result<_>>()?;
    let b1: Vec<Vec<f64>> = (0..m)
        .map(|l| bracket_one(ce, sm.g1.column(l).as_slice(), d, convention))
        .collect::<Result<_>>()?;
    let bs = bracket_s(ce, d);

    let mut out = DrivingForces {
        r0: vec![vec![0.0; len]; m],
        r1: vec![vec![0.0; len]; m],
        rs: vec![0.0; len],
        sigma0: vec![vec![0.0; len]; m],
        sigma1: vec![vec![0.0; len]; m],
        sigma_s: vec![0.0; len],
    };
    let grid = state.grid();
    let mut xk = vec![0.0; n];
    let mut ek = vec![0.0; n];
    for k in 0..len {
        state.x_at(k, &mut xk);
        for i in 0..n {
            ek[i] = ce.dh_dx[i][k];
        }
        let p = PointState {
            x: &xk,
            s: state.s[k],
            z: grid.node(k),
            dh_dx: &ek,
            temperature: ce.dh_ds[k],
        };
        for l in 0..m {
            let g0 = tc.gamma0(l, &p);
            let g1 = tc.gamma1(l, &p);
            out.r0[l][k] = g0 * b0[l][k];
            out.r1[l][k] = g1 * b1[l][k];
            out.sigma0[l][k] = g0 * b0[l][k] * b0[l][k];
            out.sigma1[l][k] = g1 * b1[l][k] * b1[l][k];
        }
        let gs = tc.gamma_s(&p);
        out.rs[k] = gs * bs[k];
        out.sigma_s[k] = gs * bs[k] * bs[k];
    }
    Ok(out)
}

//! Collocated finite differences, trapezoid quadrature and the semi-discrete
//! right-hand side.
//!
//! The right-hand side is written in flux form
//!
//! ```text
//! dx/dt = P0 e + G0 (R0 T) + d/dz F_x,   F_x = P1 e + G1 (R1 T)
//! ds/dt = R0.(-G0^T e) + R1.(G1^T de/dz) + gs rs dT/dz + d/dz F_s,   F_s = gs rs T
//! ```
//!
//! where `e = dh/dx` and `T = dh/ds`. Boundary inputs overwrite boundary
//! values of `F_x`, `F_s` only; production terms always use constitutive
//! values so that the local entropy production stays nonnegative.

use crate::brackets::{self, BracketConvention, CoEnergy, DrivingForces};
use crate::structure::{FieldState, Grid, StructureMatrices, ThermoClosure};
use crate::{Error, Matrix, Result};

/// Largest grid accepted by [`dense_operator`].
pub const DENSE_NODE_CAP: usize = 64;

/// Boundary closure of the first-derivative stencil. Interior rows are
/// always centered second-order differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// First-order one-sided boundary rows, `(f1 - f0)/dz`. Together with
    /// trapezoid weights this satisfies summation by parts exactly.
    #[default]
    Sbp21,
    /// Second-order one-sided boundary rows, `(-3 f0 + 4 f1 - f2)/(2 dz)`.
    OneSided2,
}

impl Stencil {
    pub fn name(&self) -> &'static str {
        match self {
            Stencil::Sbp21 => "sbp21",
            Stencil::OneSided2 => "one-sided2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sbp21" => Some(Stencil::Sbp21),
            "one-sided2" => Some(Stencil::OneSided2),
            _ => None,
        }
    }
}

/// First-derivative operator on a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffOperator {
    stencil: Stencil,
    len: usize,
    dz: f64,
}

impl DiffOperator {
    pub fn new(grid: &Grid, stencil: Stencil) -> Self {
        Self {
            stencil,
            len: grid.len(),
            dz: grid.dz(),
        }
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        let n = self.len;
        debug_assert!(f.len() == n && out.len() == n);
        let h2 = 0.5 / self.dz;
        for k in 1..n - 1 {
            out[k] = (f[k + 1] - f[k - 1]) * h2;
        }
        match self.stencil {
            Stencil::Sbp21 => {
                out[0] = (f[1] - f[0]) / self.dz;
                out[n - 1] = (f[n - 1] - f[n - 2]) / self.dz;
            }
            Stencil::OneSided2 => {
                out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * h2;
                out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * h2;
            }
        }
    }

    pub fn d_dz(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        self.apply_into(f, &mut out);
        out
    }

    /// The operator as an explicit `N x N` matrix.
    pub fn matrix(&self) -> Matrix {
        let n = self.len;
        let mut d = Matrix::zeros(n, n);
        let mut unit = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            unit[j] = 1.0;
            self.apply_into(&unit, &mut col);
            for i in 0..n {
                d[(i, j)] = col[i];
            }
            unit[j] = 0.0;
        }
        d
    }
}

/// Optional boundary values for the `n + 1` flux components (the `n`
/// extensive fluxes followed by the entropy flux).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFluxes {
    pub a: Vec<Option<f64>>,
    pub b: Vec<Option<f64>>,
}

impl BoundaryFluxes {
    /// No overrides: every flux keeps its constitutive boundary value.
    pub fn free(n: usize) -> Self {
        Self {
            a: vec![None; n + 1],
            b: vec![None; n + 1],
        }
    }
}

/// Full evaluation of the semi-discrete right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsEval {
    pub dx_dt: Vec<Vec<f64>>,
    pub ds_dt: Vec<f64>,
    pub co_energy: CoEnergy,
    pub forces: DrivingForces,
    /// Constitutive fluxes `F_x` (n fields) followed by `F_s`.
    pub flux: Vec<Vec<f64>>,
    /// Same as `flux` with the boundary overrides applied.
    pub enforced_flux: Vec<Vec<f64>>,
}

/// Right-hand side with the physical bracket convention and no boundary
/// overrides.
pub fn apply_rhs(
    state: &FieldState,
    sm: &StructureMatrices,
    tc: &dyn ThermoClosure,
    d: &DiffOperator,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let eval = evaluate_rhs(
        state,
        sm,
        tc,
        d,
        BracketConvention::Physical,
        &BoundaryFluxes::free(sm.n),
    )?;
    Ok((eval.dx_dt, eval.ds_dt))
}

fn check_dims(
    state: &FieldState,
    sm: &StructureMatrices,
    tc: &dyn ThermoClosure,
    d: &DiffOperator,
) -> Result<()> {
    if state.n() != sm.n || tc.n() != sm.n {
        return Err(Error::DimensionMismatch {
            context: "extensive variable count",
            expected: sm.n,
            got: if state.n() != sm.n { state.n() } else { tc.n() },
        });
    }
    if tc.m() != sm.m {
        return Err(Error::DimensionMismatch {
            context: "irreversible process count",
            expected: sm.m,
            got: tc.m(),
        });
    }
    if d.len() != state.len() {
        return Err(Error::DimensionMismatch {
            context: "difference operator size",
            expected: state.len(),
            got: d.len(),
        });
    }
    Ok(())
}

pub fn evaluate_rhs(
    state: &FieldState,
    sm: &StructureMatrices,
    tc: &dyn ThermoClosure,
    d: &DiffOperator,
    convention: BracketConvention,
    overrides: &BoundaryFluxes,
) -> Result<RhsEval> {
    check_dims(state, sm, tc, d)?;
    let (n, m) = (sm.n, sm.m);
    let len = state.len();
    let ce = brackets::co_energy(state, tc)?;
    let forces = brackets::driving_forces_with(state, tc, sm, d, &ce, convention)?;
    let t = &ce.dh_ds;

    let mut rt1 = vec![vec![0.0; len]; m];
    let mut rt0 = vec![vec![0.0; len]; m];
    for l in 0..m {
        for k in 0..len {
            rt1[l][k] = forces.r1[l][k] * t[k];
            rt0[l][k] = forces.r0[l][k] * t[k];
        }
    }

    let mut flux = vec![vec![0.0; len]; n + 1];
    for i in 0..n {
        for k in 0..len {
            let mut acc = 0.0;
            for j in 0..n {
                acc += sm.p1[(i, j)] * ce.dh_dx[j][k];
            }
            for l in 0..m {
                acc += sm.g1[(i, l)] * rt1[l][k];
            }
            flux[i][k] = acc;
        }
    }
    for k in 0..len {
        flux[n][k] = sm.gs * forces.rs[k] * t[k];
    }

    let mut enforced = flux.clone();
    for i in 0..=n {
        if let Some(v) = overrides.a.get(i).copied().flatten() {
            enforced[i][0] = v;
        }
        if let Some(v) = overrides.b.get(i).copied().flatten() {
            enforced[i][len - 1] = v;
        }
    }

    let mut buf = vec![0.0; len];
    let mut dx_dt = vec![vec![0.0; len]; n];
    for i in 0..n {
        d.apply_into(&enforced[i], &mut buf);
        for k in 0..len {
            let mut acc = 0.0;
            for j in 0..n {
                acc += sm.p0[(i, j)] * ce.dh_dx[j][k];
            }
            for l in 0..m {
                acc += sm.g0[(i, l)] * rt0[l][k];
            }
            dx_dt[i][k] = acc + buf[k];
        }
    }

    // production terms: R0.(-G0^T e) + R1.(G1^T de/dz) + gs rs dT/dz
    let de: Vec<Vec<f64>> = ce.dh_dx.iter().map(|f| d.d_dz(f)).collect();
    let dt = d.d_dz(t);
    d.apply_into(&enforced[n], &mut buf);
    let mut ds_dt = vec![0.0; len];
    for k in 0..len {
        let mut acc = 0.0;
        for l in 0..m {
            let mut g0e = 0.0;
            let mut g1de = 0.0;
            for i in 0..n {
                g0e += sm.g0[(i, l)] * ce.dh_dx[i][k];
                g1de += sm.g1[(i, l)] * de[i][k];
            }
            acc += forces.r0[l][k] * (-g0e) + forces.r1[l][k] * g1de;
        }
        acc += sm.gs * forces.rs[k] * dt[k];
        ds_dt[k] = acc + buf[k];
    }

    Ok(RhsEval {
        dx_dt,
        ds_dt,
        co_energy: ce,
        forces,
        flux,
        enforced_flux: enforced,
    })
}

/// Stacks co-energy node values as `[e_0 (N); ...; e_{n-1} (N); T (N)]`.
pub fn stack_co_energy(ce: &CoEnergy) -> Vec<f64> {
    ce.dh_dx
        .iter()
        .flat_map(|f| f.iter().copied())
        .chain(ce.dh_ds.iter().copied())
        .collect()
}

/// Stacks a right-hand side in the same layout as [`stack_co_energy`].
pub fn stack_fields(x: &[Vec<f64>], s: &[f64]) -> Vec<f64> {
    x.iter()
        .flat_map(|f| f.iter().copied())
        .chain(s.iter().copied())
        .collect()
}

/// The operator of the right-hand side as an explicit matrix acting on
/// stacked co-energy values, with the driving forces `R0`, `R1`, `rs`
/// frozen at `state`. No boundary overrides are applied.
pub fn dense_operator(
    state: &FieldState,
    sm: &StructureMatrices,
    tc: &dyn ThermoClosure,
    d: &DiffOperator,
) -> Result<Matrix> {
    let len = state.len();
    if len > DENSE_NODE_CAP {
        return Err(Error::TooLarge {
            nodes: len,
            cap: DENSE_NODE_CAP,
        });
    }
    check_dims(state, sm, tc, d)?;
    let (n, m) = (sm.n, sm.m);
    let ce = brackets::co_energy(state, tc)?;
    let f = brackets::driving_forces_with(state, tc, sm, d, &ce, BracketConvention::Physical)?;
    let dm = d.matrix();
    let size = (n + 1) * len;
    let mut a = Matrix::zeros(size, size);
    let blk = |i: usize| i * len..(i + 1) * len;

    // adds `coef * diag(w) * D` (or `coef * D * diag(w)` when `right`) to block (bi, bj)
    let add_d =
        |a: &mut Matrix, bi: usize, bj: usize, coef: f64, w: Option<&[f64]>, right: bool| {
            if coef == 0.0 {
                return;
            }
            for (r, row) in blk(bi).enumerate() {
                for (c, col) in blk(bj).enumerate() {
                    let scale = match (w, right) {
                        (None, _) => 1.0,
                        (Some(w), false) => w[r],
                        (Some(w), true) => w[c],
                    };
                    a[(row, col)] += coef * dm[(r, c)] * scale;
                }
            }
        };
    let add_diag = |a: &mut Matrix, bi: usize, bj: usize, coef: f64, w: &[f64]| {
        if coef == 0.0 {
            return;
        }
        for (k, (row, col)) in blk(bi).zip(blk(bj)).enumerate() {
            a[(row, col)] += coef * w[k];
        }
    };
    let ones = vec![1.0; len];

    for i in 0..n {
        for j in 0..n {
            add_diag(&mut a, i, j, sm.p0[(i, j)], &ones);
            add_d(&mut a, i, j, sm.p1[(i, j)], None, false);
        }
        for l in 0..m {
            add_diag(&mut a, i, n, sm.g0[(i, l)], &f.r0[l]);
            add_d(&mut a, i, n, sm.g1[(i, l)], Some(&f.r1[l]), true);
            add_diag(&mut a, n, i, -sm.g0[(i, l)], &f.r0[l]);
            add_d(&mut a, n, i, sm.g1[(i, l)], Some(&f.r1[l]), false);
        }
    }
    add_d(&mut a, n, n, sm.gs, Some(&f.rs), false);
    add_d(&mut a, n, n, sm.gs, Some(&f.rs), true);
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        Grid::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn constants_map_to_zero() {
        for st in [Stencil::Sbp21, Stencil::OneSided2] {
            let d = DiffOperator::new(&grid(7), st);
            assert!(d.d_dz(&[3.5; 7]).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn linear_fields_are_exact() {
        let g = grid(11);
        let z = g.nodes();
        for st in [Stencil::Sbp21, Stencil::OneSided2] {
            let d = DiffOperator::new(&g, st);
            for v in d.d_dz(&z) {
                assert!((v - 1.0).abs() < 1e-12, "{st:?}: {v}");
            }
        }
    }

    #[test]
    fn quadratic_interior_error_is_second_order() {
        let err = |n: usize| {
            let g = grid(n);
            let z = g.nodes();
            let f: Vec<f64> = z.iter().map(|z| z * z * z).collect();
            let d = DiffOperator::new(&g, Stencil::Sbp21).d_dz(&f);
            (1..n - 1)
                .map(|k| (d[k] - 3.0 * z[k] * z[k]).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(51) / err(101);
        assert!((3.8..4.2).contains(&ratio), "ratio {ratio}");
        // z^2 is differentiated exactly in the interior by centered differences
        let g = grid(101);
        let z = g.nodes();
        let f: Vec<f64> = z.iter().map(|z| z * z).collect();
        let d = DiffOperator::new(&g, Stencil::Sbp21).d_dz(&f);
        for k in 1..100 {
            assert!((d[k] - 2.0 * z[k]).abs() <= 1e-10);
        }
    }

    #[test]
    fn one_sided_boundary_rows_are_second_order() {
        let err = |n: usize| {
            let g = grid(n);
            let f: Vec<f64> = g.nodes().iter().map(|z| (2.0 * z).sin()).collect();
            let d = DiffOperator::new(&g, Stencil::OneSided2).d_dz(&f);
            (d[0] - 2.0).abs().max((d[n - 1] - 2.0 * 2f64.cos()).abs())
        };
        let ratio = err(41) / err(81);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn sbp_identity_holds_for_arbitrary_vectors() {
        // sum_k w_k (u_k (Dv)_k + (Du)_k v_k) = u_N v_N - u_0 v_0
        let g = grid(9);
        let d = DiffOperator::new(&g, Stencil::Sbp21);
        let u: Vec<f64> = (0..9).map(|k| ((k * 7 + 3) % 5) as f64 - 1.3).collect();
        let v: Vec<f64> = (0..9).map(|k| ((k * 3 + 1) % 4) as f64 * 0.7).collect();
        let (du, dv) = (d.d_dz(&u), d.d_dz(&v));
        let lhs: f64 = g
            .weights()
            .iter()
            .enumerate()
            .map(|(k, w)| w * (u[k] * dv[k] + du[k] * v[k]))
            .sum();
        assert!((lhs - (u[8] * v[8] - u[0] * v[0])).abs() < 1e-12);
    }

    #[test]
    fn matrix_matches_apply() {
        let g = grid(6);
        let d = DiffOperator::new(&g, Stencil::OneSided2);
        let f = [0.3, -1.0, 2.0, 0.5, 0.25, 4.0];
        let via_matrix = d.matrix() * nalgebra::DVector::from_column_slice(&f);
        for (a, b) in via_matrix.iter().zip(d.d_dz(&f)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stencil_names_round_trip() {
        for st in [Stencil::Sbp21, Stencil::OneSided2] {
            assert_eq!(Stencil::from_name(st.name()), Some(st));
        }
        assert_eq!(Stencil::from_name("upwind"), None);
    }
}

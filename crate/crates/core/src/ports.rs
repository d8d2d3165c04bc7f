//! Boundary ports: the extended port matrix, its rank factorization, the
//! input/output maps `W_B`, `W_C` and their validators.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::brackets::{CoEnergy, DrivingForces};
use crate::structure::{StructureMatrices, ValidationReport};
use crate::{Error, Matrix, Result};

/// Relative threshold used by [`rank_factor`] by default.
pub const RANK_REL_TOL: f64 = 1e-10;
/// Entrywise tolerance of the parametrization conditions.
pub const XI_TOL: f64 = 1e-12;
/// Tolerance of the reversible boundary-condition checks.
pub const BCPHS_TOL: f64 = 1e-10;
const GRAM_RCOND_MIN: f64 = 1e-12;

/// Side of the spatial domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

/// Assembles `[[P1,0,G1,0],[0,0,0,gs],[G1^T,0,0,0],[0,gs,0,0]]`.
pub fn assemble_pe(sm: &StructureMatrices) -> Matrix {
    let (n, m) = (sm.n, sm.m);
    let k = n + m + 2;
    let mut pe = Matrix::zeros(k, k);
    for i in 0..n {
        for j in 0..n {
            pe[(i, j)] = sm.p1[(i, j)];
        }
        for l in 0..m {
            pe[(i, n + 1 + l)] = sm.g1[(i, l)];
            pe[(n + 1 + l, i)] = sm.g1[(i, l)];
        }
    }
    pe[(n, n + m + 1)] = sm.gs;
    pe[(n + m + 1, n)] = sm.gs;
    pe
}

/// Orthonormal basis of the column space of `pe` by column-pivoted
/// Gram-Schmidt. Columns whose residual norm is at most
/// `rel_tol * ||pe||_F` are treated as dependent; ties go to the lower
/// column index.
pub fn rank_factor(pe: &Matrix, rel_tol: f64) -> Matrix {
    let rows = pe.nrows();
    let thr = rel_tol * pe.norm();
    let mut residual: Vec<DVector<f64>> = pe.column_iter().map(|c| c.into_owned()).collect();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut used = vec![false; residual.len()];
    loop {
        let mut best: Option<(usize, f64)> = None;
        for (j, r) in residual.iter().enumerate() {
            if used[j] {
                continue;
            }
            let nrm = r.norm();
            if best.is_none_or(|(_, b)| nrm > b) {
                best = Some((j, nrm));
            }
        }
        let Some((j, nrm)) = best else { break };
        if !(nrm > thr) || nrm == 0.0 {
            break;
        }
        used[j] = true;
        let mut q = residual[j].clone();
        // second pass restores orthogonality lost to cancellation
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&q);
                q.axpy(-c, b, 1.0);
            }
        }
        let qn = q.norm();
        q /= qn;
        for (jj, r) in residual.iter_mut().enumerate() {
            if !used[jj] {
                let c = q.dot(r);
                r.axpy(-c, &q, 1.0);
            }
        }
        basis.push(q);
    }
    let mut m = Matrix::zeros(rows, basis.len());
    for (j, b) in basis.iter().enumerate() {
        m.set_column(j, b);
    }
    m
}

/// Checks `Xi2^T Xi1 + Xi1^T Xi2 = 0` and `Xi2^T Xi2 + Xi1^T Xi1 = I`.
pub fn check_xi(xi1: &Matrix, xi2: &Matrix) -> Result<()> {
    let r = xi1.nrows();
    if xi1.ncols() != r || xi2.nrows() != r || xi2.ncols() != r {
        return Err(Error::InvalidParametrization(format!(
            "Xi1 is {}x{} and Xi2 is {}x{}; both must be square of the same side",
            xi1.nrows(),
            xi1.ncols(),
            xi2.nrows(),
            xi2.ncols()
        )));
    }
    let skew = xi2.transpose() * xi1 + xi1.transpose() * xi2;
    let ortho = xi2.transpose() * xi2 + xi1.transpose() * xi1 - Matrix::identity(r, r);
    let e1 = skew.amax();
    let e2 = ortho.amax();
    if !(e1 <= XI_TOL) {
        return Err(Error::InvalidParametrization(format!(
            "Xi2^T Xi1 + Xi1^T Xi2 deviates from zero by {e1:e}"
        )));
    }
    if !(e2 <= XI_TOL) {
        return Err(Error::InvalidParametrization(format!(
            "Xi2^T Xi2 + Xi1^T Xi1 deviates from the identity by {e2:e}"
        )));
    }
    Ok(())
}

/// Default parametrization of side `r`. For even `r = 2k`:
/// `Xi1 = [[I,0],[I,0]]/sqrt2`, `Xi2 = [[0,I],[0,-I]]/sqrt2`, which makes the
/// first `k` inputs act on `z = b` and the last `k` on `z = a`. For odd `r`:
/// `Xi1 = I`, `Xi2 = 0`.
pub fn default_xi(r: usize) -> (Matrix, Matrix) {
    if r % 2 == 1 {
        return (Matrix::identity(r, r), Matrix::zeros(r, r));
    }
    let k = r / 2;
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let mut xi1 = Matrix::zeros(r, r);
    let mut xi2 = Matrix::zeros(r, r);
    for i in 0..k {
        xi1[(i, i)] = c;
        xi1[(k + i, i)] = c;
        xi2[(i, k + i)] = c;
        xi2[(k + i, k + i)] = -c;
    }
    (xi1, xi2)
}

fn random_orthogonal(r: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let a = Matrix::from_fn(r, r, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q()
}

/// Random valid parametrization `Xi1 = (U+V)/2`, `Xi2 = (U-V)/2` for
/// orthogonal `U`, `V`.
pub fn random_xi(r: usize, seed: u64) -> (Matrix, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_orthogonal(r, &mut rng);
    let v = random_orthogonal(r, &mut rng);
    ((&u + &v) * 0.5, (&u - &v) * 0.5)
}

/// Boundary port parametrization.
#[derive(Debug, Clone, PartialEq)]
pub struct PortParametrization {
    pub xi1: Matrix,
    pub xi2: Matrix,
    pub m: Matrix,
    pub mp: Matrix,
    pub pep: Matrix,
    pub wb: Matrix,
    pub wc: Matrix,
}

impl PortParametrization {
    /// Number of inputs (and outputs).
    pub fn dim(&self) -> usize {
        self.m.ncols()
    }

    /// Length of one boundary trace vector.
    pub fn trace_len(&self) -> usize {
        self.m.nrows()
    }
}

/// Builds `Mp`, `Pep`, `W_B` and `W_C` from a basis `m` of `col(pe)`.
pub fn build_ports(
    m: &Matrix,
    pe: &Matrix,
    xi1: &Matrix,
    xi2: &Matrix,
) -> Result<PortParametrization> {
    let k = pe.nrows();
    let r = m.ncols();
    if pe.ncols() != k {
        return Err(Error::DimensionMismatch {
            context: "port matrix columns",
            expected: k,
            got: pe.ncols(),
        });
    }
    if m.nrows() != k {
        return Err(Error::DimensionMismatch {
            context: "basis rows",
            expected: k,
            got: m.nrows(),
        });
    }
    if xi1.nrows() != r {
        return Err(Error::InvalidParametrization(format!(
            "Xi has side {} but the basis has {r} columns",
            xi1.nrows()
        )));
    }
    check_xi(xi1, xi2)?;
    let mp = if r == 0 {
        Matrix::zeros(0, k)
    } else {
        let gram = m.transpose() * m;
        let sv = gram.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        let rcond = if smax > 0.0 { smin / smax } else { 0.0 };
        if !(rcond > GRAM_RCOND_MIN) {
            return Err(Error::SingularGram { rcond });
        }
        let inv = gram.try_inverse().ok_or(Error::SingularGram { rcond })?;
        inv * m.transpose()
    };
    let pep = m.transpose() * pe * m;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let x1p = xi1 * &pep;
    let x2p = xi2 * &pep;
    let mut wb = Matrix::zeros(r, 2 * k);
    let mut wc = Matrix::zeros(r, 2 * k);
    wb.columns_mut(0, k).copy_from(&((xi2 + &x1p) * &mp * s));
    wb.columns_mut(k, k).copy_from(&((xi2 - &x1p) * &mp * s));
    wc.columns_mut(0, k).copy_from(&((xi1 + &x2p) * &mp * s));
    wc.columns_mut(k, k).copy_from(&((xi1 - &x2p) * &mp * s));
    Ok(PortParametrization {
        xi1: xi1.clone(),
        xi2: xi2.clone(),
        m: m.clone(),
        mp,
        pep,
        wb,
        wc,
    })
}

/// Boundary port variables at both ends, each ordered as
/// `[dh/dx (n); T; R1 T (m); rs T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub e_b: Vec<f64>,
    pub e_a: Vec<f64>,
}

impl BoundaryTrace {
    /// `[e_b; e_a]`.
    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.e_b.len() + self.e_a.len(),
            self.e_b.iter().chain(&self.e_a).copied(),
        )
    }
}

fn trace_at(ce: &CoEnergy, forces: &DrivingForces, k: usize) -> Vec<f64> {
    let t = ce.dh_ds[k];
    ce.dh_dx
        .iter()
        .map(|f| f[k])
        .chain(std::iter::once(t))
        .chain(forces.r1.iter().map(|f| f[k] * t))
        .chain(std::iter::once(forces.rs[k] * t))
        .collect()
}

/// Assembles the boundary trace from boundary-node values.
pub fn boundary_trace(ce: &CoEnergy, forces: &DrivingForces) -> BoundaryTrace {
    let last = ce.len() - 1;
    BoundaryTrace {
        e_b: trace_at(ce, forces, last),
        e_a: trace_at(ce, forces, 0),
    }
}

/// `v = W_B [e_b; e_a]`, `y = W_C [e_b; e_a]`.
pub fn evaluate_ports(
    pp: &PortParametrization,
    tr: &BoundaryTrace,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = pp.trace_len();
    for (len, ctx) in [(tr.e_b.len(), "trace at b"), (tr.e_a.len(), "trace at a")] {
        if len != k {
            return Err(Error::DimensionMismatch {
                context: ctx,
                expected: k,
                got: len,
            });
        }
    }
    let e = tr.stacked();
    let v = &pp.wb * &e;
    let y = &pp.wc * &e;
    Ok((v.iter().copied().collect(), y.iter().copied().collect()))
}

/// Boundary energy flow `1/2 [e^T Pe e]_a^b`.
pub fn boundary_energy_flow(pe: &Matrix, tr: &BoundaryTrace) -> f64 {
    let quad = |e: &[f64]| {
        let v = DVector::from_column_slice(e);
        v.dot(&(pe * &v))
    };
    0.5 * (quad(&tr.e_b) - quad(&tr.e_a))
}

/// Columns of `w` (with `2k` columns) acting on the first `n` trace entries
/// at each side.
pub fn restrict_to_extensive(w: &Matrix, n: usize) -> Matrix {
    let k = w.ncols() / 2;
    let mut out = Matrix::zeros(w.nrows(), 2 * n);
    out.columns_mut(0, n).copy_from(&w.columns(0, n));
    out.columns_mut(n, n).copy_from(&w.columns(k, n));
    out
}

/// Checks the reversible boundary conditions
/// `W_B S W_B^T = W_C S W_C^T = 0`, `W_B S W_C^T = I` with
/// `S = diag(P1^-1, -P1^-1)`.
pub fn validate_bcphs(wb: &Matrix, wc: &Matrix, p1: &Matrix) -> Result<ValidationReport> {
    let n = p1.nrows();
    let p1inv = p1.clone().try_inverse().ok_or(Error::SingularP1)?;
    if !p1inv.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularP1);
    }
    for (w, ctx) in [(wb, "W_B columns"), (wc, "W_C columns")] {
        if w.ncols() != 2 * n {
            return Err(Error::DimensionMismatch {
                context: ctx,
                expected: 2 * n,
                got: w.ncols(),
            });
        }
    }
    let mut sigma = Matrix::zeros(2 * n, 2 * n);
    sigma.view_mut((0, 0), (n, n)).copy_from(&p1inv);
    sigma.view_mut((n, n), (n, n)).copy_from(&(-&p1inv));
    let mut report = ValidationReport::new();
    let bb = wb * &sigma * wb.transpose();
    let cc = wc * &sigma * wc.transpose();
    let bc = wb * &sigma * wc.transpose();
    let eye = Matrix::identity(bc.nrows(), bc.ncols());
    if !(bb.amax() <= BCPHS_TOL) {
        report.push("W_B S W_B^T = 0", format!("max deviation {:e}", bb.amax()));
    }
    if !(cc.amax() <= BCPHS_TOL) {
        report.push("W_C S W_C^T = 0", format!("max deviation {:e}", cc.amax()));
    }
    let dev = (bc - eye).amax();
    if !(dev <= BCPHS_TOL) {
        report.push("W_B S W_C^T = I", format!("max deviation {dev:e}"));
    }
    Ok(report)
}

/// An input entry that prescribes one boundary flux: `v[port] = scale * F[flux]`
/// at `side`, where fluxes are indexed as `F_x` (0..n) then `F_s` (n).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputBinding {
    pub port: usize,
    pub flux: usize,
    pub side: Side,
    pub scale: f64,
}

/// Identifies each row of `W_B` with a single boundary flux. A flux
/// component `F_i` equals row `i` of `Pe` applied to the trace, so a row of
/// `W_B` of the form `[c Pe_i, 0]` or `[0, c Pe_i]` prescribes `F_i` at
/// `b` or `a`. Rows of any other form cannot be imposed by flux
/// substitution.
pub fn input_bindings(
    pp: &PortParametrization,
    pe: &Matrix,
    n: usize,
) -> Result<Vec<InputBinding>> {
    let k = pe.nrows();
    let mut out = Vec::with_capacity(pp.dim());
    for j in 0..pp.dim() {
        let row = pp.wb.row(j);
        let scale_ref = row.amax().max(f64::MIN_POSITIVE);
        let mut found = None;
        'search: for (side, off, other) in [(Side::B, 0, k), (Side::A, k, 0)] {
            let rest = row.columns(other, k);
            if rest.amax() > 1e-10 * scale_ref {
                continue;
            }
            let half = row.columns(off, k);
            for i in 0..=n {
                let p = pe.row(i);
                let pp2 = p.dot(&p);
                if pp2 == 0.0 {
                    continue;
                }
                let c = half.dot(&p) / pp2;
                if c.abs() <= 1e-10 * scale_ref {
                    continue;
                }
                let resid = (half - p * c).amax();
                if resid <= 1e-10 * scale_ref {
                    found = Some(InputBinding {
                        port: j,
                        flux: i,
                        side,
                        scale: c,
                    });
                    break 'search;
                }
            }
        }
        match found {
            Some(b) => out.push(b),
            None => {
                return Err(Error::UnsupportedInput {
                    port: j,
                    reason: "input row does not prescribe a single boundary flux".into(),
                })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn viscous_sm() -> StructureMatrices {
        let mut sm = StructureMatrices::zeros(2, 1);
        sm.p1 = dmatrix![0.0, 1.0; 1.0, 0.0];
        sm.g1 = dmatrix![0.0; 1.0];
        sm
    }

    #[test]
    fn pe_of_viscous_fluid() {
        let pe = assemble_pe(&viscous_sm());
        let expected = dmatrix![
            0.0, 1.0, 0.0, 0.0, 0.0;
            1.0, 0.0, 0.0, 1.0, 0.0;
            0.0, 0.0, 0.0, 0.0, 0.0;
            0.0, 1.0, 0.0, 0.0, 0.0;
            0.0, 0.0, 0.0, 0.0, 0.0
        ];
        assert_eq!(pe, expected);
        assert_eq!(
            assemble_pe(&StructureMatrices::zeros(1, 1)),
            Matrix::zeros(4, 4)
        );
    }

    #[test]
    fn rank_factor_of_zero_is_empty() {
        let m = rank_factor(&Matrix::zeros(4, 4), RANK_REL_TOL);
        assert_eq!(m.ncols(), 0);
        assert_eq!(m.nrows(), 4);
    }

    #[test]
    fn rank_factor_is_orthonormal_and_spanning() {
        let pe = assemble_pe(&viscous_sm());
        let m = rank_factor(&pe, RANK_REL_TOL);
        assert_eq!(m.ncols(), 2);
        let gram = m.transpose() * &m;
        assert!((gram - Matrix::identity(2, 2)).amax() < 1e-14);
        let proj = &m * m.transpose() * &pe;
        assert!((proj - &pe).amax() < 1e-12);
    }

    #[test]
    fn identity_parametrization() {
        let eye = Matrix::identity(2, 2);
        let zero = Matrix::zeros(2, 2);
        check_xi(&eye, &zero).unwrap();
        let pe = dmatrix![0.0, 1.0; 1.0, 0.0];
        let pp = build_ports(&eye, &pe, &eye, &zero).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expected_left = &pp.pep * &pp.mp * s;
        assert!((pp.wb.columns(0, 2) - &expected_left).amax() < 1e-15);
        assert!((pp.wb.columns(2, 2) + &expected_left).amax() < 1e-15);
    }

    #[test]
    fn invalid_xi_is_rejected() {
        let eye = Matrix::identity(2, 2);
        assert!(matches!(
            check_xi(&eye, &eye),
            Err(Error::InvalidParametrization(_))
        ));
        let pe = dmatrix![0.0, 1.0; 1.0, 0.0];
        assert!(build_ports(&eye, &pe, &eye, &eye).is_err());
    }

    #[test]
    fn dependent_basis_is_singular() {
        let pe = dmatrix![0.0, 1.0; 1.0, 0.0];
        let m = dmatrix![1.0, 2.0; 1.0, 2.0];
        let (x1, x2) = default_xi(2);
        assert!(matches!(
            build_ports(&m, &pe, &x1, &x2),
            Err(Error::SingularGram { .. })
        ));
    }

    #[test]
    fn generated_parametrizations_are_valid() {
        for r in 0..7 {
            let (a, b) = default_xi(r);
            check_xi(&a, &b).unwrap();
            let (a, b) = random_xi(r, 17 + r as u64);
            check_xi(&a, &b).unwrap();
        }
    }

    #[test]
    fn identical_maps_fail_bcphs() {
        let p1 = dmatrix![0.0, 1.0; 1.0, 0.0];
        let wb = dmatrix![1.0, 0.0, 0.0, 0.0; 0.0, 0.0, -1.0, 0.0];
        let report = validate_bcphs(&wb, &wb, &p1).unwrap();
        assert!(report.contains("W_B S W_C^T = I"));
        assert!(!report.contains("W_B S W_B^T = 0"));
        assert_eq!(
            validate_bcphs(&wb, &wb, &Matrix::zeros(2, 2)),
            Err(Error::SingularP1)
        );
    }

    #[test]
    fn zero_trace_gives_zero_ports() {
        let pe = assemble_pe(&viscous_sm());
        let m = rank_factor(&pe, RANK_REL_TOL);
        let (x1, x2) = default_xi(2);
        let pp = build_ports(&m, &pe, &x1, &x2).unwrap();
        let tr = BoundaryTrace {
            e_b: vec![0.0; 5],
            e_a: vec![0.0; 5],
        };
        let (v, y) = evaluate_ports(&pp, &tr).unwrap();
        assert!(v.iter().chain(&y).all(|x| *x == 0.0));
        let short = BoundaryTrace {
            e_b: vec![0.0; 4],
            e_a: vec![0.0; 5],
        };
        assert!(evaluate_ports(&pp, &short).is_err());
    }

    #[test]
    fn mixed_rows_are_not_bindable() {
        let pe = dmatrix![0.0, 1.0; 1.0, 0.0];
        let (x1, x2) = random_xi(2, 3);
        let pp = build_ports(&Matrix::identity(2, 2), &pe, &x1, &x2).unwrap();
        assert!(matches!(
            input_bindings(&pp, &pe, 0),
            Err(Error::UnsupportedInput { .. })
        ));
    }
}

//! Model data: structure matrices, thermodynamic closures, grids and states.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Matrix, Result};

/// Uniform 1D grid on `[a, b]` with `n` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    a: f64,
    b: f64,
    n: usize,
}

impl Grid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::InvalidGrid(format!(
                "need finite a < b, got [{a}, {b}]"
            )));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes, got {n}"
            )));
        }
        Ok(Self { a, b, n })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Node count.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dz(&self) -> f64 {
        (self.b - self.a) / (self.n - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.b
        } else {
            self.a + k as f64 * self.dz()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.node(k)).collect()
    }

    /// Trapezoid quadrature weights.
    pub fn weights(&self) -> Vec<f64> {
        let dz = self.dz();
        let mut w = vec![dz; self.n];
        w[0] = 0.5 * dz;
        w[self.n - 1] = 0.5 * dz;
        w
    }

    /// Trapezoid integral of nodal values.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.n);
        let inner: f64 = f[1..self.n - 1].iter().sum();
        self.dz() * (inner + 0.5 * (f[0] + f[self.n - 1]))
    }
}

/// Constant matrices of the irreversible port-Hamiltonian operator.
///
/// `n` counts the non-entropy extensive variables and `m` the irreversible
/// processes. No invariant is enforced at construction; use
/// [`validate_structure`].
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMatrices {
    pub n: usize,
    pub m: usize,
    pub p0: Matrix,
    pub p1: Matrix,
    pub g0: Matrix,
    pub g1: Matrix,
    pub gs: f64,
}

impl StructureMatrices {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            p0: Matrix::zeros(n, n),
            p1: Matrix::zeros(n, n),
            g0: Matrix::zeros(n, m),
            g1: Matrix::zeros(n, m),
            gs: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub check: String,
    pub detail: String,
}

/// Outcome of a validator. Validators never abort; they collect.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, check: impl Into<String>, detail: impl Into<String>) {
        self.violations.push(Violation {
            check: check.into(),
            detail: detail.into(),
        });
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.violations
            .iter()
            .any(|v| v.detail.contains(needle) || v.check.contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "no violations");
        }
        for v in &self.violations {
            writeln!(f, "[{}] {}", v.check, v.detail)?;
        }
        Ok(())
    }
}

fn check_shape(
    report: &mut ValidationReport,
    name: &str,
    mat: &Matrix,
    rows: usize,
    cols: usize,
) -> bool {
    if mat.nrows() != rows || mat.ncols() != cols {
        report.push(
            "dimensions",
            format!(
                "{name} has shape {}x{}, expected {rows}x{cols}",
                mat.nrows(),
                mat.ncols()
            ),
        );
        return false;
    }
    if mat.iter().any(|v| !v.is_finite()) {
        report.push("finite", format!("{name} has non-finite entries"));
    }
    true
}

/// Checks skew-symmetry of P0, symmetry of P1 (both exact, entrywise) and
/// all block dimensions.
pub fn validate_structure(sm: &StructureMatrices) -> ValidationReport {
    let mut report = ValidationReport::new();
    let (n, m) = (sm.n, sm.m);
    if check_shape(&mut report, "P0", &sm.p0, n, n) {
        for i in 0..n {
            for j in 0..=i {
                if sm.p0[(i, j)] != -sm.p0[(j, i)] {
                    report.push(
                        "P0 skew-symmetry",
                        format!("P0 not skew-symmetric at ({i},{j})"),
                    );
                }
            }
        }
    }
    if check_shape(&mut report, "P1", &sm.p1, n, n) {
        for i in 0..n {
            for j in 0..i {
                if sm.p1[(i, j)] != sm.p1[(j, i)] {
                    report.push("P1 symmetry", format!("P1 not symmetric at ({i},{j})"));
                }
            }
        }
    }
    check_shape(&mut report, "G0", &sm.g0, n, m);
    check_shape(&mut report, "G1", &sm.g1, n, m);
    if !sm.gs.is_finite() {
        report.push("finite", "gs is not finite");
    }
    report
}

/// Open interval bounds used to declare admissible boxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v > self.lo && v < self.hi
    }
}

/// Admissible region of a closure.
///
/// `x` and `s` form the sampling box used by the validators; `positive`
/// lists the extensive variables that must stay strictly positive during a
/// simulation (temperature positivity is always required).
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleRegion {
    pub x: Vec<Bounds>,
    pub s: Bounds,
    pub positive: Vec<usize>,
}

impl AdmissibleRegion {
    pub fn contains(&self, x: &[f64], s: f64) -> bool {
        self.x.iter().zip(x).all(|(b, v)| b.contains(*v)) && self.s.contains(s)
    }
}

/// Pointwise arguments handed to the modulation functions.
#[derive(Debug, Clone, Copy)]
pub struct PointState<'a> {
    pub x: &'a [f64],
    pub s: f64,
    pub z: f64,
    pub dh_dx: &'a [f64],
    pub temperature: f64,
}

/// Local transport scales used for time-step bounds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Transport {
    pub diffusivity: f64,
    pub wave_speed: f64,
}

/// Thermodynamic closure: energy density, its co-energy maps and the
/// nonnegative modulation functions of the irreversible processes.
///
/// Closures supply their own derivatives; [`validate_closure`] checks them
/// against finite differences of [`ThermoClosure::energy`].
pub trait ThermoClosure: fmt::Debug + Send + Sync {
    /// Number of non-entropy extensive variables.
    fn n(&self) -> usize;

    /// Number of irreversible processes.
    fn m(&self) -> usize;

    /// Energy per unit length `h(x, s)`.
    fn energy(&self, x: &[f64], s: f64) -> f64;

    /// Writes `dh/dx` into `out`.
    fn intensive(&self, x: &[f64], s: f64, out: &mut [f64]);

    /// `dh/ds`.
    fn temperature(&self, x: &[f64], s: f64) -> f64;

    /// Inverse of [`ThermoClosure::temperature`] in `s` at fixed `x`.
    fn entropy_at(&self, x: &[f64], temperature: f64) -> f64;

    fn gamma0(&self, _i: usize, _p: &PointState<'_>) -> f64 {
        0.0
    }

    fn gamma1(&self, _i: usize, _p: &PointState<'_>) -> f64 {
        0.0
    }

    fn gamma_s(&self, _p: &PointState<'_>) -> f64 {
        0.0
    }

    fn region(&self) -> AdmissibleRegion;

    fn transport(&self, _x: &[f64], _s: f64) -> Transport {
        Transport::default()
    }
}

/// One sampled point `(x, s, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub s: f64,
    pub z: f64,
}

/// Deterministic uniform samples from the closure's admissible box.
pub fn sample_region(tc: &dyn ThermoClosure, grid: &Grid, count: usize, seed: u64) -> Vec<Sample> {
    let region = tc.region();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x = region.x.iter().map(|b| sample_open(&mut rng, *b)).collect();
            let s = sample_open(&mut rng, region.s);
            let z = rng.random_range(grid.a()..=grid.b());
            Sample { x, s, z }
        })
        .collect()
}

fn sample_open(rng: &mut ChaCha8Rng, b: Bounds) -> f64 {
    // keep a margin so that samples are strictly interior
    let width = b.hi - b.lo;
    rng.random_range(b.lo + 1e-6 * width..b.hi - 1e-6 * width)
}

pub const FD_REL_TOL: f64 = 1e-6;

fn fd_step(v: f64) -> f64 {
    1e-6 * (1.0 + v.abs())
}

fn fd_agrees(analytic: f64, fd: f64, noise: f64) -> bool {
    (analytic - fd).abs() <= FD_REL_TOL * analytic.abs().max(fd.abs()) + noise
}

/// Checks temperature positivity, nonnegativity of every modulation
/// function and consistency of the co-energy maps with central finite
/// differences of the energy density.
pub fn validate_closure(tc: &dyn ThermoClosure, samples: &[Sample]) -> ValidationReport {
    let mut report = ValidationReport::new();
    let n = tc.n();
    let mut dh_dx = vec![0.0; n];
    let mut xp = vec![0.0; n];
    for (k, smp) in samples.iter().enumerate() {
        if smp.x.len() != n {
            report.push(
                "dimensions",
                format!(
                    "sample {k} has {} extensive values, expected {n}",
                    smp.x.len()
                ),
            );
            continue;
        }
        let t = tc.temperature(&smp.x, smp.s);
        if !(t > 0.0) {
            report.push(
                "temperature positivity",
                format!("temperature positivity violated at sample {k} (T = {t})"),
            );
        }
        tc.intensive(&smp.x, smp.s, &mut dh_dx);
        let p = PointState {
            x: &smp.x,
            s: smp.s,
            z: smp.z,
            dh_dx: &dh_dx,
            temperature: t,
        };
        for i in 0..tc.m() {
            for (name, g) in [("gamma0", tc.gamma0(i, &p)), ("gamma1", tc.gamma1(i, &p))] {
                if !(g >= 0.0) || !g.is_finite() {
                    report.push(
                        "modulation nonnegativity",
                        format!("{name}[{i}] = {g} at sample {k}"),
                    );
                }
            }
        }
        let g = tc.gamma_s(&p);
        if !(g >= 0.0) || !g.is_finite() {
            report.push(
                "modulation nonnegativity",
                format!("gamma_s = {g} at sample {k}"),
            );
        }

        // finite-difference consistency; `noise` bounds the cancellation
        // error of the difference quotient itself
        for i in 0..n {
            let step = fd_step(smp.x[i]);
            xp.copy_from_slice(&smp.x);
            xp[i] = smp.x[i] + step;
            let hp = tc.energy(&xp, smp.s);
            xp[i] = smp.x[i] - step;
            let hm = tc.energy(&xp, smp.s);
            let fd = (hp - hm) / (2.0 * step);
            let noise = 8.0 * f64::EPSILON * (hp.abs() + hm.abs()) / (2.0 * step);
            if !fd_agrees(dh_dx[i], fd, noise) {
                report.push(
                    "derivative consistency",
                    format!(
                        "dh/dx[{i}] = {} but finite difference gives {fd} at sample {k}",
                        dh_dx[i]
                    ),
                );
            }
        }
        let step = fd_step(smp.s);
        let hp = tc.energy(&smp.x, smp.s + step);
        let hm = tc.energy(&smp.x, smp.s - step);
        let fd = (hp - hm) / (2.0 * step);
        let noise = 8.0 * f64::EPSILON * (hp.abs() + hm.abs()) / (2.0 * step);
        if !fd_agrees(t, fd, noise) {
            report.push(
                "derivative consistency",
                format!("dh/ds = {t} but finite difference gives {fd} at sample {k}"),
            );
        }
    }
    report
}

/// Sampled extensive fields on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    grid: Grid,
    pub x: Vec<Vec<f64>>,
    pub s: Vec<f64>,
}

impl FieldState {
    pub fn new(grid: Grid, x: Vec<Vec<f64>>, s: Vec<f64>) -> Result<Self> {
        let len = grid.len();
        if s.len() != len {
            return Err(Error::DimensionMismatch {
                context: "entropy field length",
                expected: len,
                got: s.len(),
            });
        }
        for f in &x {
            if f.len() != len {
                return Err(Error::DimensionMismatch {
                    context: "extensive field length",
                    expected: len,
                    got: f.len(),
                });
            }
        }
        Ok(Self { grid, x, s })
    }

    /// Builds a state from extensive fields and a temperature profile.
    pub fn from_temperature(
        grid: Grid,
        x: Vec<Vec<f64>>,
        temperature: &[f64],
        tc: &dyn ThermoClosure,
    ) -> Result<Self> {
        if temperature.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                context: "temperature profile length",
                expected: grid.len(),
                got: temperature.len(),
            });
        }
        let s = vec![0.0; grid.len()];
        let mut state = Self::new(grid, x, s)?;
        let mut xk = vec![0.0; state.n()];
        for (k, t) in temperature.iter().enumerate() {
            if !(*t > 0.0) {
                return Err(Error::InadmissibleState {
                    node: k,
                    reason: format!("temperature {t} is not positive"),
                });
            }
            state.x_at(k, &mut xk);
            state.s[k] = tc.entropy_at(&xk, *t);
        }
        Ok(state)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Number of non-entropy fields.
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Copies the extensive values at node `k` into `out`.
    pub fn x_at(&self, k: usize, out: &mut [f64]) {
        for (o, f) in out.iter_mut().zip(&self.x) {
            *o = f[k];
        }
    }

    /// Checks finiteness, declared positivity and `T > 0` at every node.
    pub fn check_admissible(&self, tc: &dyn ThermoClosure) -> Result<()> {
        let region = tc.region();
        let mut xk = vec![0.0; self.n()];
        for k in 0..self.len() {
            self.x_at(k, &mut xk);
            if xk.iter().any(|v| !v.is_finite()) || !self.s[k].is_finite() {
                return Err(Error::InadmissibleState {
                    node: k,
                    reason: "non-finite field value".into(),
                });
            }
            for &i in &region.positive {
                if !(xk[i] > 0.0) {
                    return Err(Error::InadmissibleState {
                        node: k,
                        reason: format!("x[{i}] = {} must be positive", xk[i]),
                    });
                }
            }
            let t = tc.temperature(&xk, self.s[k]);
            if !(t > 0.0) {
                return Err(Error::InadmissibleState {
                    node: k,
                    reason: format!("temperature {t} is not positive"),
                });
            }
        }
        Ok(())
    }

    /// Trapezoid integral of the energy density.
    pub fn total_energy(&self, tc: &dyn ThermoClosure) -> f64 {
        let mut xk = vec![0.0; self.n()];
        let h: Vec<f64> = (0..self.len())
            .map(|k| {
                self.x_at(k, &mut xk);
                tc.energy(&xk, self.s[k])
            })
            .collect();
        self.grid.integrate(&h)
    }

    pub fn total_entropy(&self) -> f64 {
        self.grid.integrate(&self.s)
    }

    /// `self + c * other`, fieldwise.
    pub(crate) fn axpy(&self, c: f64, dx: &[Vec<f64>], ds: &[f64]) -> FieldState {
        let x = self
            .x
            .iter()
            .zip(dx)
            .map(|(f, d)| f.iter().zip(d).map(|(a, b)| a + c * b).collect())
            .collect();
        let s = self.s.iter().zip(ds).map(|(a, b)| a + c * b).collect();
        FieldState {
            grid: self.grid,
            x,
            s,
        }
    }
}

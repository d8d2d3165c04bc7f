//! Fixed-step RK4 time integration with boundary inputs, and the energy and
//! entropy balance audits.

use nalgebra::{DMatrix, DVector};

use crate::brackets::BracketConvention;
use crate::discretization::{evaluate_rhs, BoundaryFluxes, DiffOperator, RhsEval, Stencil};
use crate::models::ModelDefinition;
use crate::ports::{self, BoundaryTrace, InputBinding, PortParametrization, Side};
use crate::structure::{FieldState, Grid};
use crate::{Error, Matrix, Result};

/// Default Courant-type factor.
pub const DEFAULT_CFL: f64 = 0.25;
/// Floor below which a production density counts as negative.
pub const SIGMA_FLOOR: f64 = -1e-12;

/// Boundary input `t -> v(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    /// `v = 0`.
    Closed,
    Constant(Vec<f64>),
    /// Piecewise-linear in time, held constant outside the table.
    Table {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl Signal {
    /// Checks dimensions, finiteness and table ordering against `r` ports.
    pub fn check(&self, r: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(format!("signal: {msg}")));
        match self {
            Signal::Closed => Ok(()),
            Signal::Constant(v) => {
                if v.len() != r {
                    return bad(format!("has {} entries, model has {r} ports", v.len()));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return bad("non-finite value".into());
                }
                Ok(())
            }
            Signal::Table { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return bad("table needs matching, nonempty times and values".into());
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("table times must be strictly increasing".into());
                }
                for v in values {
                    if v.len() != r {
                        return bad(format!("row has {} entries, model has {r} ports", v.len()));
                    }
                    if v.iter().any(|x| !x.is_finite()) {
                        return bad("non-finite value".into());
                    }
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64, r: usize) -> Vec<f64> {
        match self {
            Signal::Closed => vec![0.0; r],
            Signal::Constant(v) => v.clone(),
            Signal::Table { times, values } => {
                let last = times.len() - 1;
                if t <= times[0] {
                    return values[0].clone();
                }
                if t >= times[last] {
                    return values[last].clone();
                }
                let j = times.partition_point(|&x| x <= t);
                let (t0, t1) = (times[j - 1], times[j]);
                let w = (t - t0) / (t1 - t0);
                values[j - 1]
                    .iter()
                    .zip(&values[j])
                    .map(|(a, b)| a + w * (b - a))
                    .collect()
            }
        }
    }
}

/// Numerical options of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub stencil: Stencil,
    pub convention: BracketConvention,
    pub cfl: f64,
    /// Record a report every this many steps (the final state is always
    /// recorded).
    pub output_every: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            stencil: Stencil::default(),
            convention: BracketConvention::default(),
            cfl: DEFAULT_CFL,
            output_every: 1,
        }
    }
}

/// Balance quantities at one output time. `dh_dt` and `ds_dt` are time
/// differences of the recorded totals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceReport {
    pub t: f64,
    pub h: f64,
    pub s: f64,
    pub power: f64,
    pub sigma_total: f64,
    pub entropy_flux: f64,
    pub energy_residual: f64,
    pub entropy_residual: f64,
    pub sigma_min: f64,
    pub dh_dt: f64,
    pub ds_dt: f64,
}

/// Trajectory, reports and, for an aborted run, the error that stopped it.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Vec<(f64, FieldState)>,
    pub reports: Vec<BalanceReport>,
    pub error: Option<Error>,
    pub dt: f64,
    pub steps: usize,
}

impl RunOutcome {
    pub fn aborted(&self) -> bool {
        self.error.is_some()
    }

    pub fn final_state(&self) -> &FieldState {
        &self
            .trajectory
            .last()
            .expect("at least the initial state")
            .1
    }
}

/// A model bound to a grid, with its ports and input bindings resolved.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub model: ModelDefinition,
    pub grid: Grid,
    pub options: SimOptions,
    pub ports: PortParametrization,
    pub pe: Matrix,
    pub bindings: Vec<InputBinding>,
    pub op: DiffOperator,
}

impl Simulator {
    pub fn new(model: &ModelDefinition, grid: Grid, options: SimOptions) -> Result<Self> {
        if !(options.cfl > 0.0) {
            return Err(Error::StepRejected(format!(
                "CFL factor must be positive, got {}",
                options.cfl
            )));
        }
        let pe = model.pe();
        let ports = model.ports()?;
        let bindings = ports::input_bindings(&ports, &pe, model.sm.n)?;
        Ok(Self {
            model: model.clone(),
            grid,
            options,
            ports,
            pe,
            bindings,
            op: DiffOperator::new(&grid, options.stencil),
        })
    }

    pub fn port_dim(&self) -> usize {
        self.ports.dim()
    }

    fn overrides(&self, v: &[f64]) -> BoundaryFluxes {
        let mut bf = BoundaryFluxes::free(self.model.sm.n);
        for b in &self.bindings {
            let val = v[b.port] / b.scale;
            match b.side {
                Side::A => bf.a[b.flux] = Some(val),
                Side::B => bf.b[b.flux] = Some(val),
            }
        }
        bf
    }

    /// Right-hand side with the inputs `v` imposed.
    pub fn rhs(&self, state: &FieldState, v: &[f64]) -> Result<RhsEval> {
        evaluate_rhs(
            state,
            &self.model.sm,
            self.model.closure.as_ref(),
            &self.op,
            self.options.convention,
            &self.overrides(v),
        )
    }

    /// Largest step allowed by the transport scales of `state`.
    pub fn max_stable_dt(&self, state: &FieldState) -> f64 {
        let tc = self.model.closure.as_ref();
        let (mut diff, mut wave) = (0.0f64, 0.0f64);
        let mut xk = vec![0.0; state.n()];
        for k in 0..state.len() {
            state.x_at(k, &mut xk);
            let tr = tc.transport(&xk, state.s[k]);
            diff = diff.max(tr.diffusivity);
            wave = wave.max(tr.wave_speed);
        }
        let dz = self.grid.dz();
        let mut bound = f64::INFINITY;
        if diff > 0.0 {
            bound = bound.min(dz * dz / diff);
        }
        if wave > 0.0 {
            bound = bound.min(dz / wave);
        }
        self.options.cfl * bound
    }

    pub fn check_step(&self, state: &FieldState, dt: f64) -> Result<()> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::StepRejected(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let limit = self.max_stable_dt(state);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::StepRejected(format!(
                "time step {dt:e} exceeds the stability bound {limit:e}"
            )));
        }
        Ok(())
    }

    /// One classical RK4 step from `t`, inputs evaluated at the stage times.
    pub fn step(&self, state: &FieldState, dt: f64, signal: &Signal, t: f64) -> Result<FieldState> {
        let r = self.port_dim();
        let tc = self.model.closure.as_ref();
        let k1 = self.rhs(state, &signal.eval(t, r))?;
        let s2 = state.axpy(0.5 * dt, &k1.dx_dt, &k1.ds_dt);
        s2.check_admissible(tc)?;
        let k2 = self.rhs(&s2, &signal.eval(t + 0.5 * dt, r))?;
        let s3 = state.axpy(0.5 * dt, &k2.dx_dt, &k2.ds_dt);
        s3.check_admissible(tc)?;
        let k3 = self.rhs(&s3, &signal.eval(t + 0.5 * dt, r))?;
        let s4 = state.axpy(dt, &k3.dx_dt, &k3.ds_dt);
        s4.check_admissible(tc)?;
        let k4 = self.rhs(&s4, &signal.eval(t + dt, r))?;

        let c = dt / 6.0;
        let combine = |a: &[f64], b: &[f64], cc: &[f64], d: &[f64], base: &[f64]| -> Vec<f64> {
            (0..base.len())
                .map(|k| base[k] + c * (a[k] + 2.0 * b[k] + 2.0 * cc[k] + d[k]))
                .collect()
        };
        let x = (0..state.n())
            .map(|i| {
                combine(
                    &k1.dx_dt[i],
                    &k2.dx_dt[i],
                    &k3.dx_dt[i],
                    &k4.dx_dt[i],
                    &state.x[i],
                )
            })
            .collect();
        let s = combine(&k1.ds_dt, &k2.ds_dt, &k3.ds_dt, &k4.ds_dt, &state.s);
        let next = FieldState::new(self.grid, x, s)?;
        next.check_admissible(tc)?;
        Ok(next)
    }

    /// Boundary trace with the entries that carry imposed fluxes adjusted
    /// so that `Pe e` reproduces the imposed values where possible.
    pub fn enforced_trace(&self, eval: &RhsEval) -> BoundaryTrace {
        let mut tr = ports::boundary_trace(&eval.co_energy, &eval.forces);
        let n = self.model.sm.n;
        let k = self.pe.nrows();
        let last = self.grid.len() - 1;
        for (side, node) in [(Side::A, 0usize), (Side::B, last)] {
            let bound: Vec<usize> = self
                .bindings
                .iter()
                .filter(|b| b.side == side)
                .map(|b| b.flux)
                .collect();
            if bound.is_empty() {
                continue;
            }
            let e = match side {
                Side::A => &mut tr.e_a,
                Side::B => &mut tr.e_b,
            };
            let free = k - (n + 1);
            let b = DMatrix::from_fn(bound.len(), free, |r, c| self.pe[(bound[r], n + 1 + c)]);
            let gap = DVector::from_iterator(
                bound.len(),
                bound
                    .iter()
                    .map(|&i| eval.enforced_flux[i][node] - eval.flux[i][node]),
            );
            if gap.amax() == 0.0 || b.amax() == 0.0 {
                continue;
            }
            if let Ok(delta) = b.svd(true, true).solve(&gap, 1e-12) {
                for c in 0..free {
                    e[n + 1 + c] += delta[c];
                }
            }
        }
        tr
    }

    /// Balance quantities of `state` at time `t`; time derivatives and
    /// residuals are filled in by [`Simulator::run`].
    pub fn snapshot(&self, state: &FieldState, t: f64, signal: &Signal) -> Result<BalanceReport> {
        let r = self.port_dim();
        let v = signal.eval(t, r);
        let eval = self.rhs(state, &v)?;
        let tr = self.enforced_trace(&eval);
        let (_, y) = ports::evaluate_ports(&self.ports, &tr)?;
        let power: f64 = y.iter().zip(&v).map(|(a, b)| a * b).sum();
        let sigma = eval.forces.sigma_total(self.model.sm.gs);
        let n = self.model.sm.n;
        let fs = &eval.enforced_flux[n];
        Ok(BalanceReport {
            t,
            h: state.total_energy(self.model.closure.as_ref()),
            s: state.total_entropy(),
            power,
            sigma_total: self.grid.integrate(&sigma),
            entropy_flux: fs[0] - fs[fs.len() - 1],
            energy_residual: f64::NAN,
            entropy_residual: f64::NAN,
            sigma_min: sigma.iter().copied().fold(f64::INFINITY, f64::min),
            dh_dt: f64::NAN,
            ds_dt: f64::NAN,
        })
    }

    /// Fixed-step march to `t_end` with `dt` shortened so that it divides
    /// the horizon. A failing step ends the run and is returned in the
    /// outcome together with everything recorded so far.
    pub fn run(
        &self,
        initial: &FieldState,
        t_end: f64,
        dt: f64,
        signal: &Signal,
    ) -> Result<RunOutcome> {
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::StepRejected(format!(
                "horizon must be nonnegative, got {t_end}"
            )));
        }
        if *initial.grid() != self.grid {
            return Err(Error::InvalidGrid(
                "initial state lives on a different grid".into(),
            ));
        }
        signal.check(self.port_dim())?;
        initial.check_admissible(self.model.closure.as_ref())?;
        let steps = if t_end == 0.0 {
            0
        } else {
            if !(dt > 0.0) {
                return Err(Error::StepRejected(format!(
                    "time step must be positive, got {dt}"
                )));
            }
            (t_end / dt - 1e-9).ceil().max(1.0) as usize
        };
        let dt_eff = if steps == 0 { dt } else { t_end / steps as f64 };
        if steps > 0 {
            self.check_step(initial, dt_eff)?;
        }
        let every = self.options.output_every.max(1);

        let mut out = RunOutcome {
            trajectory: vec![(0.0, initial.clone())],
            reports: vec![self.snapshot(initial, 0.0, signal)?],
            error: None,
            dt: dt_eff,
            steps,
        };
        let mut state = initial.clone();
        for i in 0..steps {
            let t = i as f64 * dt_eff;
            let result = self.step(&state, dt_eff, signal, t).and_then(|next| {
                let t_next = if i + 1 == steps {
                    t_end
                } else {
                    (i + 1) as f64 * dt_eff
                };
                if (i + 1) % every == 0 || i + 1 == steps {
                    let rep = self.snapshot(&next, t_next, signal)?;
                    self.check_step(&next, dt_eff)?;
                    Ok((next, Some((t_next, rep))))
                } else {
                    Ok((next, None))
                }
            });
            match result {
                Ok((next, rec)) => {
                    if let Some((t_next, rep)) = rec {
                        out.trajectory.push((t_next, next.clone()));
                        out.reports.push(rep);
                    }
                    state = next;
                }
                Err(e) => {
                    out.error = Some(e);
                    break;
                }
            }
        }
        fill_residuals(&mut out.reports);
        Ok(out)
    }
}

/// Derivative of samples `f` at `ts[i]` by three-point differences:
/// centered in the interior, one-sided at the ends. Two samples give a
/// first-order difference; one gives NaN.
pub fn time_derivative(ts: &[f64], f: &[f64]) -> Vec<f64> {
    let n = ts.len();
    match n {
        0 => vec![],
        1 => vec![f64::NAN],
        2 => {
            let d = (f[1] - f[0]) / (ts[1] - ts[0]);
            vec![d, d]
        }
        _ => (0..n)
            .map(|i| {
                let j = i.clamp(1, n - 2);
                let (t0, t1, t2) = (ts[j - 1], ts[j], ts[j + 1]);
                let t = ts[i];
                // derivative of the quadratic interpolant through the three points
                let l0 = (2.0 * t - t1 - t2) / ((t0 - t1) * (t0 - t2));
                let l1 = (2.0 * t - t0 - t2) / ((t1 - t0) * (t1 - t2));
                let l2 = (2.0 * t - t0 - t1) / ((t2 - t0) * (t2 - t1));
                l0 * f[j - 1] + l1 * f[j] + l2 * f[j + 1]
            })
            .collect(),
    }
}

fn fill_residuals(reports: &mut [BalanceReport]) {
    let ts: Vec<f64> = reports.iter().map(|r| r.t).collect();
    let h: Vec<f64> = reports.iter().map(|r| r.h).collect();
    let s: Vec<f64> = reports.iter().map(|r| r.s).collect();
    let dh = time_derivative(&ts, &h);
    let ds = time_derivative(&ts, &s);
    for (i, r) in reports.iter_mut().enumerate() {
        r.dh_dt = dh[i];
        r.ds_dt = ds[i];
        r.energy_residual = (dh[i] - r.power).abs();
        r.entropy_residual = (ds[i] - r.sigma_total + r.entropy_flux).abs();
    }
}

/// Audit tolerance `scale (space dz^2 + time dto^2) M + 1e-12 max|Q| / dto`,
/// where `M` is the largest magnitude among the balanced terms (at least 1),
/// `Q` the audited total and `dto` the largest output interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditTolerance {
    pub space: f64,
    pub time: f64,
    pub scale: f64,
}

impl Default for AuditTolerance {
    fn default() -> Self {
        Self {
            space: 1.0,
            time: 1.0,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditSummary {
    pub max_residual: f64,
    pub mean_residual: f64,
    pub tolerance: f64,
    /// Smallest nodewise production over the run (entropy audit only).
    pub sigma_min: f64,
    pub pass: bool,
}

fn max_abs(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, |a, b| a.max(b.abs()))
}

fn tolerance(
    reports: &[BalanceReport],
    dz: f64,
    tol: &AuditTolerance,
    mag: f64,
    total: f64,
) -> f64 {
    let dto = reports
        .windows(2)
        .map(|w| w[1].t - w[0].t)
        .fold(0.0, f64::max);
    let roundoff = if dto > 0.0 { 1e-12 * total / dto } else { 0.0 };
    tol.scale * (tol.space * dz * dz + tol.time * dto * dto) * mag.max(1.0) + roundoff
}

fn summarize(res: &[f64], tol: f64, sigma_min: f64, extra_ok: bool, enough: bool) -> AuditSummary {
    let finite = res.iter().all(|r| r.is_finite());
    let max = res.iter().copied().fold(0.0, f64::max);
    let mean = if res.is_empty() {
        0.0
    } else {
        res.iter().sum::<f64>() / res.len() as f64
    };
    AuditSummary {
        max_residual: if finite { max } else { f64::NAN },
        mean_residual: mean,
        tolerance: tol,
        sigma_min,
        pass: enough && finite && max <= tol && extra_ok,
    }
}

/// First-principle audit: `|dH/dt - y^T v|` over the run.
pub fn audit_energy(reports: &[BalanceReport], dz: f64, tol: &AuditTolerance) -> AuditSummary {
    let mag = max_abs(reports.iter().flat_map(|r| [r.power, r.dh_dt]));
    let total = max_abs(reports.iter().map(|r| r.h));
    let t = tolerance(reports, dz, tol, mag, total);
    let res: Vec<f64> = reports.iter().map(|r| r.energy_residual).collect();
    summarize(&res, t, f64::NAN, true, reports.len() >= 3)
}

/// Second-principle audit: nonnegative production everywhere and
/// `|dS/dt - int sigma + (f_s(b) - f_s(a))|` within tolerance.
pub fn audit_entropy(reports: &[BalanceReport], dz: f64, tol: &AuditTolerance) -> AuditSummary {
    let mag = max_abs(
        reports
            .iter()
            .flat_map(|r| [r.ds_dt, r.sigma_total, r.entropy_flux]),
    );
    let total = max_abs(reports.iter().map(|r| r.s));
    let t = tolerance(reports, dz, tol, mag, total);
    let res: Vec<f64> = reports.iter().map(|r| r.entropy_residual).collect();
    let sigma_min = reports
        .iter()
        .map(|r| r.sigma_min)
        .fold(f64::INFINITY, f64::min);
    let sig_ok = reports
        .iter()
        .all(|r| r.sigma_min >= SIGMA_FLOOR && r.sigma_total >= SIGMA_FLOOR);
    summarize(&res, t, sigma_min, sig_ok, reports.len() >= 3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_signal_interpolates_and_holds() {
        let sig = Signal::Table {
            times: vec![0.0, 1.0],
            values: vec![vec![0.0, 2.0], vec![1.0, 4.0]],
        };
        sig.check(2).unwrap();
        assert_eq!(sig.eval(0.25, 2), vec![0.25, 2.5]);
        assert_eq!(sig.eval(-1.0, 2), vec![0.0, 2.0]);
        assert_eq!(sig.eval(3.0, 2), vec![1.0, 4.0]);
        assert!(sig.check(3).is_err());
        assert!(Signal::Constant(vec![1.0; 3]).check(2).is_err());
        assert_eq!(Signal::Closed.eval(0.3, 2), vec![0.0, 0.0]);
    }

    #[test]
    fn three_point_derivative_is_exact_for_quadratics() {
        let ts = [0.0, 0.1, 0.2, 0.35, 0.5];
        let f: Vec<f64> = ts.iter().map(|t| 3.0 * t * t - t + 2.0).collect();
        for (t, d) in ts.iter().zip(time_derivative(&ts, &f)) {
            assert!((d - (6.0 * t - 1.0)).abs() < 1e-12);
        }
        assert!(time_derivative(&[0.0], &[1.0])[0].is_nan());
        assert_eq!(time_derivative(&[0.0, 2.0], &[1.0, 5.0]), vec![2.0, 2.0]);
    }
}

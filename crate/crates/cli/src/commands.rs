//! Subcommands. Each returns an [`Status`] and writes human-readable text
//! to the given sinks; files go under the resolved output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bciphs::models::{self, ModelDefinition, MODEL_NAMES};
use bciphs::ports;
use bciphs::simulator::{audit_energy, audit_entropy, AuditSummary, Simulator};
use bciphs::structure::ValidationReport;
use bciphs::Matrix;

use crate::config::{ConfigError, RunConfig};
use crate::output;

pub const OUT_DIR_ENV: &str = "BCIPHS_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "out";

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok = 0,
    /// A validator or an audit failed.
    Failed = 1,
    /// Unreadable or invalid configuration, or unwritable output.
    Config = 2,
    /// The run stopped early.
    Aborted = 3,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Settings taken from flags and the environment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Context {
    pub out: Option<PathBuf>,
    pub env_out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol_scale: Option<f64>,
}

impl Context {
    /// `--out`, then `[output].dir`, then `BCIPHS_OUT_DIR`, then `out`.
    pub fn out_dir(&self, cfg: &RunConfig) -> PathBuf {
        if let Some(p) = &self.out {
            return p.clone();
        }
        if !cfg.output.dir.is_empty() {
            return PathBuf::from(&cfg.output.dir);
        }
        self.env_out
            .clone()
            .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
    }

    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.tolerances.seed = s;
        }
        if let Some(t) = self.tol_scale {
            cfg.tolerances.scale = t;
        }
    }
}

/// Text collected for stdout and stderr.
#[derive(Debug, Default)]
pub struct Console {
    pub out: String,
    pub err: String,
}

fn fmt_matrix(m: &Matrix) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:?}", clean(m[(i, j)])))
            .collect();
        let _ = writeln!(s, "    [{}]", row.join(", "));
    }
    if m.nrows() == 0 {
        s.push_str("    []\n");
    }
    s
}

/// Rounds away last-bit noise so that printed matrices are stable.
fn clean(v: f64) -> f64 {
    let r = (v * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn config_failure(con: &mut Console, e: &ConfigError) -> Status {
    let _ = writeln!(con.err, "error: {e}");
    Status::Config
}

/// Structural, closure, parametrization and boundary checks of a model.
fn check_model(model: &ModelDefinition, cfg: &RunConfig) -> ValidationReport {
    let mut report = model.validate(cfg.tolerances.samples, cfg.tolerances.seed);
    if report.is_clean() {
        if let Ok(pp) = model.ports() {
            if let Err(e) = ports::input_bindings(&pp, &model.pe(), model.sm.n) {
                report.push("inputs", e.to_string());
            }
        }
    }
    report
}

pub fn validate(cfg: &RunConfig, con: &mut Console) -> Status {
    let model = match cfg.build_model() {
        Ok(m) => m,
        Err(e) => return config_failure(con, &e),
    };
    let o = &mut con.out;
    let _ = writeln!(
        o,
        "model {}: n = {}, m = {}, ports = {}",
        model.name,
        model.sm.n,
        model.sm.m,
        model.port_dim()
    );
    let report = check_model(&model, cfg);
    if let Ok(pp) = model.ports() {
        for (name, m) in [
            ("M", &pp.m),
            ("M_p", &pp.mp),
            ("P_ep", &pp.pep),
            ("W_B", &pp.wb),
            ("W_C", &pp.wc),
        ] {
            let _ = write!(o, "{name} =\n{}", fmt_matrix(m));
        }
        if cfg.model.ports.is_none() {
            for (i, d) in model.port_docs.iter().enumerate() {
                let _ = writeln!(o, "port {i}: input {}, output {}", d.input, d.output);
            }
        }
    }
    if report.is_clean() {
        let _ = writeln!(o, "validation: clean");
        Status::Ok
    } else {
        let _ = writeln!(o, "validation: {} violation(s)", report.violations().len());
        let _ = write!(o, "{report}");
        Status::Failed
    }
}

fn audit_line(name: &str, a: &AuditSummary) -> String {
    format!(
        "{name} audit: {} (max residual {:e}, mean {:e}, tolerance {:e})",
        if a.pass { "PASS" } else { "FAIL" },
        a.max_residual,
        a.mean_residual,
        a.tolerance
    )
}

fn write_file(dir: &Path, name: &str, text: &str, con: &mut Console) -> bool {
    let path = dir.join(name);
    match std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, text)) {
        Ok(()) => {
            let _ = writeln!(con.out, "wrote {}", path.display());
            true
        }
        Err(e) => {
            let _ = writeln!(con.err, "error: cannot write {}: {e}", path.display());
            false
        }
    }
}

/// Validates, runs and audits one configuration, writing into `dir`.
pub fn run_in(cfg: &RunConfig, dir: &Path, con: &mut Console) -> Status {
    let model = match cfg.build_model() {
        Ok(m) => m,
        Err(e) => return config_failure(con, &e),
    };
    let report = check_model(&model, cfg);
    if !report.is_clean() {
        let _ = write!(con.err, "validation failed:\n{report}");
        return Status::Failed;
    }
    let grid = match cfg.grid() {
        Ok(g) => g,
        Err(e) => return config_failure(con, &e),
    };
    let initial = match cfg.initial_state(&model, &grid) {
        Ok(s) => s,
        Err(e) => return config_failure(con, &e),
    };
    let sim = match Simulator::new(&model, grid, cfg.options()) {
        Ok(s) => s,
        Err(e) => {
            return config_failure(
                con,
                &ConfigError::Schema {
                    key: "model".into(),
                    message: e.to_string(),
                },
            )
        }
    };
    let out = match sim.run(
        &initial,
        cfg.time.t_end,
        cfg.time.dt,
        &cfg.signal.to_signal(),
    ) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(con.err, "error: run aborted before the first step: {e}");
            return Status::Aborted;
        }
    };
    let _ = writeln!(
        con.out,
        "{}: {} steps of {:e}, {} reports",
        model.name,
        out.steps,
        out.dt,
        out.reports.len()
    );
    let traj = output::trajectory_csv(&out.trajectory, &model.field_names, model.closure.as_ref());
    let rep = output::report_csv(&out.reports);
    if !(write_file(dir, &cfg.output.trajectory, &traj, con)
        && write_file(dir, &cfg.output.report, &rep, con))
    {
        return Status::Config;
    }
    if let Some(e) = &out.error {
        let t = out.reports.last().map_or(0.0, |r| r.t);
        let _ = writeln!(con.err, "error: run aborted after t = {t:?}: {e}");
        return Status::Aborted;
    }
    let dz = grid.dz();
    let tol = cfg.tolerances.audit();
    let audits = [
        ("energy", audit_energy(&out.reports, dz, &tol)),
        ("entropy", audit_entropy(&out.reports, dz, &tol)),
    ];
    for (name, a) in &audits {
        let _ = writeln!(con.out, "{}", audit_line(name, a));
    }
    match audits.iter().find(|(_, a)| !a.pass) {
        Some((name, _)) => {
            let _ = writeln!(con.err, "error: {name} audit failed");
            Status::Failed
        }
        None => Status::Ok,
    }
}

pub fn run(cfg: &RunConfig, ctx: &Context, con: &mut Console) -> Status {
    run_in(cfg, &ctx.out_dir(cfg), con)
}

/// Runs every value of the `[sweep]` section on its own thread. Outputs
/// go to `sweep_000`, `sweep_001`, ... under the output directory.
pub fn sweep(cfg: &RunConfig, ctx: &Context, con: &mut Console) -> Status {
    let Some(sw) = &cfg.sweep else {
        return config_failure(
            con,
            &ConfigError::Schema {
                key: "sweep".into(),
                message: "missing section".into(),
            },
        );
    };
    let mut variants = Vec::with_capacity(sw.values.len());
    for &v in &sw.values {
        match cfg.with_sweep_value(&sw.key, v) {
            Ok(mut c) => {
                ctx.apply(&mut c);
                variants.push(c);
            }
            Err(e) => return config_failure(con, &e),
        }
    }
    let root = ctx.out_dir(cfg);
    let results: Vec<(Status, Console)> = std::thread::scope(|s| {
        let handles: Vec<_> = variants
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let dir = root.join(format!("sweep_{i:03}"));
                s.spawn(move || {
                    let mut con = Console::default();
                    let st = run_in(c, &dir, &mut con);
                    (st, con)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker"))
            .collect()
    });
    let mut worst = Status::Ok;
    for (i, ((st, c), v)) in results.into_iter().zip(&sw.values).enumerate() {
        let _ = writeln!(con.out, "sweep {i:03} {} = {v:?}: {st:?}", sw.key);
        con.out.push_str(&c.out);
        con.err.push_str(&c.err);
        worst = worst.max(st);
    }
    worst
}

pub fn list_models(con: &mut Console) -> Status {
    for name in MODEL_NAMES {
        let m = models::build(name, &Default::default()).expect("built-in model");
        let _ = writeln!(con.out, "{name}");
        let params: Vec<String> = models::default_params(name)
            .expect("built-in model")
            .iter()
            .map(|(k, v)| format!("{k} = {v:?}"))
            .collect();
        let _ = writeln!(con.out, "  parameters: {}", params.join(", "));
        if !m.field_names.is_empty() {
            let _ = writeln!(con.out, "  fields: {}", m.field_names.join(", "));
        }
        for (i, d) in m.port_docs.iter().enumerate() {
            let _ = writeln!(
                con.out,
                "  port {i}: input {}, output {}",
                d.input, d.output
            );
        }
    }
    Status::Ok
}

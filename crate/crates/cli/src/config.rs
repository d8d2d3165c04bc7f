//! Run configuration: a TOML file with the sections `[model]`, `[grid]`,
//! `[time]`, `[signal]`, `[initial]`, `[output]`, `[tolerances]`,
//! `[scheme]` and `[sweep]`. Every section except `[model]` is optional;
//! [`parse_str`] fills in the model defaults so that the returned
//! [`RunConfig`] is fully resolved.

use std::collections::BTreeMap;
use std::path::Path;

use bciphs::brackets::BracketConvention;
use bciphs::discretization::Stencil;
use bciphs::models::{self, ModelDefinition, Profile};
use bciphs::simulator::{AuditTolerance, Signal, SimOptions, Simulator};
use bciphs::structure::{FieldState, Grid};
use bciphs::Matrix;
use serde::Serialize;
use thiserror::Error;
use toml::{Table, Value};

/// Number of reports aimed for when `output_every` is not given.
const DEFAULT_REPORTS: usize = 100;
/// Fraction of the stable step used when `dt` is not given.
const DEFAULT_DT_FRACTION: f64 = 0.9;
const DEFAULT_SAMPLES: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid value for `{key}`: {message}")]
    Schema { key: String, message: String },
}

impl ConfigError {
    fn schema(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Schema {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub time: TimeSection,
    pub signal: SignalSection,
    pub initial: InitialSection,
    pub output: OutputSection,
    pub tolerances: ToleranceSection,
    pub scheme: SchemeSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSection {
    pub name: String,
    /// All parameters of the model, defaults included.
    pub params: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ports: Option<PortSection>,
}

/// Replacement structure matrices, as row lists.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StructureSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p1: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g0: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g1: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gs: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PortSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi1: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi2: Option<Rows>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSection {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeSection {
    pub t_end: f64,
    pub dt: f64,
    pub output_every: usize,
    pub cfl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SignalSection {
    Closed,
    Constant { values: Vec<f64> },
    Table { times: Vec<f64>, values: Rows },
}

impl SignalSection {
    pub fn to_signal(&self) -> Signal {
        match self {
            SignalSection::Closed => Signal::Closed,
            SignalSection::Constant { values } => Signal::Constant(values.clone()),
            SignalSection::Table { times, values } => Signal::Table {
                times: times.clone(),
                values: values.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfileSpec {
    Const {
        value: f64,
    },
    Sin {
        mean: f64,
        amplitude: f64,
        modes: f64,
    },
    Cos {
        mean: f64,
        amplitude: f64,
        modes: f64,
    },
    Linear {
        mean: f64,
        amplitude: f64,
    },
    /// Explicit node values.
    Nodes {
        values: Vec<f64>,
    },
}

impl ProfileSpec {
    fn from_profile(p: &Profile) -> Self {
        match *p {
            Profile::Const(value) => ProfileSpec::Const { value },
            Profile::Sin {
                mean,
                amplitude,
                modes,
            } => ProfileSpec::Sin {
                mean,
                amplitude,
                modes,
            },
            Profile::Cos {
                mean,
                amplitude,
                modes,
            } => ProfileSpec::Cos {
                mean,
                amplitude,
                modes,
            },
            Profile::Linear { mean, amplitude } => ProfileSpec::Linear { mean, amplitude },
        }
    }

    pub fn eval(&self, grid: &Grid) -> Vec<f64> {
        let p = match *self {
            ProfileSpec::Nodes { ref values } => return values.clone(),
            ProfileSpec::Const { value } => Profile::Const(value),
            ProfileSpec::Sin {
                mean,
                amplitude,
                modes,
            } => Profile::Sin {
                mean,
                amplitude,
                modes,
            },
            ProfileSpec::Cos {
                mean,
                amplitude,
                modes,
            } => Profile::Cos {
                mean,
                amplitude,
                modes,
            },
            ProfileSpec::Linear { mean, amplitude } => Profile::Linear { mean, amplitude },
        };
        p.eval(grid)
    }
}

/// Initial extensive fields (one profile per field) and temperature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialSection {
    pub fields: Vec<ProfileSpec>,
    pub temperature: ProfileSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSection {
    /// Output directory; empty means "use --out, then BCIPHS_OUT_DIR".
    pub dir: String,
    pub trajectory: String,
    pub report: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToleranceSection {
    pub space: f64,
    pub time: f64,
    pub scale: f64,
    /// Closure samples drawn by the validator.
    pub samples: usize,
    pub seed: u64,
}

impl ToleranceSection {
    pub fn audit(&self) -> AuditTolerance {
        AuditTolerance {
            space: self.space,
            time: self.time,
            scale: self.scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeSection {
    pub stencil: String,
    pub convention: String,
}

/// One-parameter sweep. `key` is `params.<name>`, `grid.n`, `time.dt` or
/// `time.t_end`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSection {
    pub key: String,
    pub values: Vec<f64>,
}

impl RunConfig {
    /// Builds the model including structure and port overrides.
    pub fn build_model(&self) -> Result<ModelDefinition, ConfigError> {
        let mut m = models::build(&self.model.name, &self.model.params)
            .map_err(|e| ConfigError::schema("model", e.to_string()))?;
        if let Some(st) = &self.model.structure {
            let slots = [
                ("p0", &st.p0, &mut m.sm.p0),
                ("p1", &st.p1, &mut m.sm.p1),
                ("g0", &st.g0, &mut m.sm.g0),
                ("g1", &st.g1, &mut m.sm.g1),
            ];
            for (name, src, dst) in slots {
                if let Some(rows) = src {
                    *dst = to_matrix(&format!("model.structure.{name}"), rows, dst.ncols())?;
                }
            }
            if let Some(gs) = st.gs {
                m.sm.gs = gs;
            }
        }
        if let Some(p) = &self.model.ports {
            let k = m.basis.nrows();
            let r = m.basis.ncols();
            if let Some(rows) = &p.basis {
                m.basis = to_matrix("model.ports.basis", rows, r)?;
                if m.basis.nrows() != k {
                    return Err(ConfigError::schema(
                        "model.ports.basis",
                        format!("has {} rows, the port matrix has {k}", m.basis.nrows()),
                    ));
                }
            }
            let r = m.basis.ncols();
            if let Some(rows) = &p.xi1 {
                m.xi1 = to_matrix("model.ports.xi1", rows, r)?;
            }
            if let Some(rows) = &p.xi2 {
                m.xi2 = to_matrix("model.ports.xi2", rows, r)?;
            }
        }
        m.audit = self.tolerances.audit();
        Ok(m)
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.grid.a, self.grid.b, self.grid.n)
            .map_err(|e| ConfigError::schema("grid", e.to_string()))
    }

    pub fn options(&self) -> SimOptions {
        SimOptions {
            stencil: Stencil::from_name(&self.scheme.stencil).unwrap_or_default(),
            convention: BracketConvention::from_name(&self.scheme.convention).unwrap_or_default(),
            cfl: self.time.cfl,
            output_every: self.time.output_every,
        }
    }

    pub fn initial_state(
        &self,
        model: &ModelDefinition,
        grid: &Grid,
    ) -> Result<FieldState, ConfigError> {
        let x = self.initial.fields.iter().map(|p| p.eval(grid)).collect();
        let t = self.initial.temperature.eval(grid);
        FieldState::from_temperature(*grid, x, &t, model.closure.as_ref())
            .map_err(|e| ConfigError::schema("initial", e.to_string()))
    }

    /// Serializes back to the configuration format.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Copy with one swept value applied and the dependent defaults
    /// re-resolved.
    pub fn with_sweep_value(&self, key: &str, value: f64) -> Result<RunConfig, ConfigError> {
        let mut doc: Table = toml::from_str(&self.to_toml()).expect("round trip");
        doc.remove("sweep");
        let bad = || ConfigError::schema("sweep.key", format!("unsupported sweep key '{key}'"));
        let (section, field) = key.split_once('.').ok_or_else(bad)?;
        let v = match (section, field) {
            ("grid", "n") => {
                if value < 2.0 || value.fract() != 0.0 {
                    return Err(ConfigError::schema(
                        "sweep.values",
                        format!("grid.n must be an integer >= 2, got {value}"),
                    ));
                }
                Value::Integer(value as i64)
            }
            ("time", "dt" | "t_end") | ("params", _) => Value::Float(value),
            _ => return Err(bad()),
        };
        match section {
            "params" => {
                let model = doc
                    .get_mut("model")
                    .and_then(Value::as_table_mut)
                    .expect("model section");
                let params = model
                    .get_mut("params")
                    .and_then(Value::as_table_mut)
                    .expect("params");
                if !params.contains_key(field) {
                    return Err(ConfigError::schema(
                        "sweep.key",
                        format!("model {} has no parameter '{field}'", self.model.name),
                    ));
                }
                params.insert(field.into(), v);
            }
            _ => {
                let sec = doc
                    .get_mut(section)
                    .and_then(Value::as_table_mut)
                    .expect("section");
                sec.insert(field.into(), v);
            }
        }
        // dependent defaults are resolved again from scratch
        if key != "time.dt" {
            if let Some(t) = doc.get_mut("time").and_then(Value::as_table_mut) {
                if key != "time.t_end" || self.time.dt == 0.0 {
                    t.remove("dt");
                }
                t.remove("output_every");
            }
        }
        resolve(&doc)
    }
}

fn to_matrix(key: &str, rows: &Rows, cols_if_empty: usize) -> Result<Matrix, ConfigError> {
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, cols_if_empty));
    }
    let cols = rows[0].len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(ConfigError::schema(
                key,
                format!("row {i} has {} entries, expected {cols}", r.len()),
            ));
        }
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
    let doc: Table = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    resolve(&doc)
}

/// Typed, path-aware view of one table. Keys are marked as used when read
/// so that [`Section::finish`] can reject the rest.
struct Section<'a> {
    path: String,
    table: Option<&'a Table>,
    used: Vec<&'static str>,
}

impl<'a> Section<'a> {
    fn root(table: &'a Table) -> Self {
        Section {
            path: String::new(),
            table: Some(table),
            used: Vec::new(),
        }
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn get(&mut self, k: &'static str) -> Option<&'a Value> {
        self.used.push(k);
        self.table.and_then(|t| t.get(k))
    }

    fn sub(&mut self, k: &'static str) -> Result<Section<'a>, ConfigError> {
        let path = self.key(k);
        let table = match self.get(k) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => return Err(ConfigError::schema(path, "expected a table")),
        };
        Ok(Section {
            path,
            table,
            used: Vec::new(),
        })
    }

    fn present(&self) -> bool {
        self.table.is_some()
    }

    fn f64(&mut self, k: &'static str) -> Result<Option<f64>, ConfigError> {
        let key = self.key(k);
        self.get(k).map(|v| as_f64(&key, v)).transpose()
    }

    fn usize(&mut self, k: &'static str) -> Result<Option<usize>, ConfigError> {
        let key = self.key(k);
        match self.get(k) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(_) => Err(ConfigError::schema(key, "expected a nonnegative integer")),
        }
    }

    fn string(&mut self, k: &'static str) -> Result<Option<String>, ConfigError> {
        let key = self.key(k);
        match self.get(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(ConfigError::schema(key, "expected a string")),
        }
    }

    fn vector(&mut self, k: &'static str) -> Result<Option<Vec<f64>>, ConfigError> {
        let key = self.key(k);
        self.get(k).map(|v| as_vector(&key, v)).transpose()
    }

    fn rows(&mut self, k: &'static str) -> Result<Option<Rows>, ConfigError> {
        let key = self.key(k);
        match self.get(k) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .enumerate()
                .map(|(i, r)| as_vector(&format!("{key}[{i}]"), r))
                .collect::<Result<Rows, _>>()
                .map(Some),
            Some(_) => Err(ConfigError::schema(key, "expected a list of rows")),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        if let Some(t) = self.table {
            if let Some(k) = t.keys().find(|k| !self.used.contains(&k.as_str())) {
                return Err(ConfigError::schema(self.key(k), "unknown key"));
            }
        }
        Ok(())
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64, ConfigError> {
    match v {
        Value::Float(f) if f.is_finite() => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(ConfigError::schema(key, "expected a finite number")),
    }
}

fn as_vector(key: &str, v: &Value) -> Result<Vec<f64>, ConfigError> {
    match v {
        Value::Array(a) => a
            .iter()
            .enumerate()
            .map(|(i, x)| as_f64(&format!("{key}[{i}]"), x))
            .collect(),
        _ => Err(ConfigError::schema(key, "expected a list of numbers")),
    }
}

fn profile(key: &str, v: &Value, n: usize) -> Result<ProfileSpec, ConfigError> {
    let Value::Table(t) = v else {
        return Err(ConfigError::schema(
            key,
            "expected a table with a `kind` key",
        ));
    };
    let mut s = Section {
        path: key.to_string(),
        table: Some(t),
        used: Vec::new(),
    };
    let kind = s
        .string("kind")?
        .ok_or_else(|| ConfigError::schema(s.key("kind"), "missing"))?;
    let need = |s: &mut Section, k: &'static str| {
        s.f64(k)?
            .ok_or_else(|| ConfigError::schema(s.key(k), "missing"))
    };
    let p = match kind.as_str() {
        "const" => ProfileSpec::Const {
            value: need(&mut s, "value")?,
        },
        "sin" | "cos" => {
            let mean = need(&mut s, "mean")?;
            let amplitude = need(&mut s, "amplitude")?;
            let modes = s.f64("modes")?.unwrap_or(1.0);
            if kind == "sin" {
                ProfileSpec::Sin {
                    mean,
                    amplitude,
                    modes,
                }
            } else {
                ProfileSpec::Cos {
                    mean,
                    amplitude,
                    modes,
                }
            }
        }
        "linear" => ProfileSpec::Linear {
            mean: need(&mut s, "mean")?,
            amplitude: need(&mut s, "amplitude")?,
        },
        "nodes" => {
            let values = s
                .vector("values")?
                .ok_or_else(|| ConfigError::schema(s.key("values"), "missing"))?;
            if values.len() != n {
                return Err(ConfigError::schema(
                    s.key("values"),
                    format!("has {} entries, grid has {n} nodes", values.len()),
                ));
            }
            ProfileSpec::Nodes { values }
        }
        other => {
            return Err(ConfigError::schema(
                s.key("kind"),
                format!("unknown profile '{other}' (const, sin, cos, linear, nodes)"),
            ))
        }
    };
    s.finish()?;
    Ok(p)
}

fn positive(key: String, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::schema(
            key,
            format!("must be positive, got {v}"),
        ))
    }
}

fn resolve(doc: &Table) -> Result<RunConfig, ConfigError> {
    let mut root = Section::root(doc);

    let mut ms = root.sub("model")?;
    if !ms.present() {
        return Err(ConfigError::schema("model", "missing section"));
    }
    let name = ms
        .string("name")?
        .ok_or_else(|| ConfigError::schema("model.name", "missing"))?;
    let defaults = models::default_params(&name).map_err(|_| {
        ConfigError::schema(
            "model.name",
            format!(
                "unknown model '{name}' ({})",
                models::MODEL_NAMES.join(", ")
            ),
        )
    })?;
    let mut params: BTreeMap<String, f64> =
        defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let ps = ms.sub("params")?;
    if let Some(t) = ps.table {
        for (k, v) in t {
            let key = ps.key(k);
            if !params.contains_key(k) {
                return Err(ConfigError::schema(
                    key,
                    format!("model {name} has no such parameter"),
                ));
            }
            params.insert(k.clone(), as_f64(&key, v)?);
        }
    }
    let mut ss = ms.sub("structure")?;
    let structure = if ss.present() {
        let st = StructureSection {
            p0: ss.rows("p0")?,
            p1: ss.rows("p1")?,
            g0: ss.rows("g0")?,
            g1: ss.rows("g1")?,
            gs: ss.f64("gs")?,
        };
        ss.finish()?;
        Some(st)
    } else {
        None
    };
    let mut pts = ms.sub("ports")?;
    let ports = if pts.present() {
        let p = PortSection {
            basis: pts.rows("basis")?,
            xi1: pts.rows("xi1")?,
            xi2: pts.rows("xi2")?,
        };
        pts.finish()?;
        Some(p)
    } else {
        None
    };
    ms.finish()?;
    let model_section = ModelSection {
        name: name.clone(),
        params,
        structure,
        ports,
    };
    let base = models::build(&name, &model_section.params)
        .map_err(|e| ConfigError::schema("model.params", e.to_string()))?;

    let mut gs = root.sub("grid")?;
    let dg = base.default_grid;
    let grid = GridSection {
        a: gs.f64("a")?.unwrap_or(dg.a()),
        b: gs.f64("b")?.unwrap_or(dg.b()),
        n: gs.usize("n")?.unwrap_or(dg.len()),
    };
    gs.finish()?;
    let g = Grid::new(grid.a, grid.b, grid.n)
        .map_err(|e| ConfigError::schema("grid", e.to_string()))?;

    let mut sch = root.sub("scheme")?;
    let scheme = SchemeSection {
        stencil: sch
            .string("stencil")?
            .unwrap_or_else(|| Stencil::default().name().into()),
        convention: sch
            .string("convention")?
            .unwrap_or_else(|| BracketConvention::default().name().into()),
    };
    if Stencil::from_name(&scheme.stencil).is_none() {
        return Err(ConfigError::schema(
            "scheme.stencil",
            format!("unknown stencil '{}' (sbp21, one-sided2)", scheme.stencil),
        ));
    }
    if BracketConvention::from_name(&scheme.convention).is_none() {
        return Err(ConfigError::schema(
            "scheme.convention",
            format!(
                "unknown convention '{}' (physical, literal)",
                scheme.convention
            ),
        ));
    }
    sch.finish()?;

    let mut is = root.sub("initial")?;
    let fields = match is.get("fields") {
        None => base
            .initial
            .x
            .iter()
            .map(ProfileSpec::from_profile)
            .collect(),
        Some(Value::Array(a)) => a
            .iter()
            .enumerate()
            .map(|(i, v)| profile(&format!("initial.fields[{i}]"), v, grid.n))
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => {
            return Err(ConfigError::schema(
                "initial.fields",
                "expected a list of profiles",
            ))
        }
    };
    if fields.len() != base.sm.n {
        return Err(ConfigError::schema(
            "initial.fields",
            format!(
                "has {} profiles, model has {} fields",
                fields.len(),
                base.sm.n
            ),
        ));
    }
    let temperature = match is.get("temperature") {
        None => ProfileSpec::from_profile(&base.initial.temperature),
        Some(v) => profile("initial.temperature", v, grid.n)?,
    };
    is.finish()?;
    let initial = InitialSection {
        fields,
        temperature,
    };

    let mut ts = root.sub("time")?;
    let t_end = positive(
        "time.t_end".into(),
        ts.f64("t_end")?.unwrap_or(base.default_t_end),
    )?;
    let cfl = positive(
        "time.cfl".into(),
        ts.f64("cfl")?.unwrap_or(SimOptions::default().cfl),
    )?;
    let dt = match ts.f64("dt")? {
        Some(dt) => positive("time.dt".into(), dt)?,
        None => {
            let x = initial.fields.iter().map(|p| p.eval(&g)).collect();
            let st = FieldState::from_temperature(
                g,
                x,
                &initial.temperature.eval(&g),
                base.closure.as_ref(),
            )
            .map_err(|e| ConfigError::schema("initial", e.to_string()))?;
            let opts = SimOptions {
                cfl,
                ..SimOptions::default()
            };
            let bound = Simulator::new(&base, g, opts)
                .map(|s| s.max_stable_dt(&st))
                .unwrap_or(f64::INFINITY);
            if bound.is_finite() {
                DEFAULT_DT_FRACTION * bound
            } else {
                base.default_dt
            }
        }
    };
    let steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let output_every = match ts.usize("output_every")? {
        Some(0) => {
            return Err(ConfigError::schema(
                "time.output_every",
                "must be at least 1",
            ))
        }
        Some(k) => k,
        None => steps.div_ceil(DEFAULT_REPORTS).max(1),
    };
    ts.finish()?;
    let time = TimeSection {
        t_end,
        dt,
        output_every,
        cfl,
    };

    let mut sg = root.sub("signal")?;
    let r = base.port_dim();
    let kind = sg.string("kind")?.unwrap_or_else(|| "closed".into());
    let signal = match kind.as_str() {
        "closed" => SignalSection::Closed,
        "constant" => {
            let values = sg
                .vector("values")?
                .ok_or_else(|| ConfigError::schema("signal.values", "missing"))?;
            if values.len() != r {
                return Err(ConfigError::schema(
                    "signal.values",
                    format!("has {} entries, model {name} has {r} ports", values.len()),
                ));
            }
            SignalSection::Constant { values }
        }
        "table" => {
            let times = sg
                .vector("times")?
                .ok_or_else(|| ConfigError::schema("signal.times", "missing"))?;
            let values = sg
                .rows("values")?
                .ok_or_else(|| ConfigError::schema("signal.values", "missing"))?;
            if times.is_empty() || times.len() != values.len() {
                return Err(ConfigError::schema(
                    "signal.times",
                    "needs one time per row of signal.values",
                ));
            }
            if times.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(ConfigError::schema(
                    "signal.times",
                    "must be strictly increasing",
                ));
            }
            if let Some((i, row)) = values.iter().enumerate().find(|(_, v)| v.len() != r) {
                return Err(ConfigError::schema(
                    format!("signal.values[{i}]"),
                    format!("has {} entries, model {name} has {r} ports", row.len()),
                ));
            }
            SignalSection::Table { times, values }
        }
        other => {
            return Err(ConfigError::schema(
                "signal.kind",
                format!("unknown signal '{other}' (closed, constant, table)"),
            ))
        }
    };
    sg.finish()?;

    let mut os = root.sub("output")?;
    let output = OutputSection {
        dir: os.string("dir")?.unwrap_or_default(),
        trajectory: os
            .string("trajectory")?
            .unwrap_or_else(|| "trajectory.csv".into()),
        report: os.string("report")?.unwrap_or_else(|| "report.csv".into()),
    };
    os.finish()?;

    let mut tl = root.sub("tolerances")?;
    let tolerances = ToleranceSection {
        space: tl.f64("space")?.unwrap_or(base.audit.space),
        time: tl.f64("time")?.unwrap_or(base.audit.time),
        scale: positive(
            "tolerances.scale".into(),
            tl.f64("scale")?.unwrap_or(base.audit.scale),
        )?,
        samples: tl.usize("samples")?.unwrap_or(DEFAULT_SAMPLES),
        seed: tl.usize("seed")?.unwrap_or(0) as u64,
    };
    tl.finish()?;

    let mut sw = root.sub("sweep")?;
    let sweep = if sw.present() {
        let key = sw
            .string("key")?
            .ok_or_else(|| ConfigError::schema("sweep.key", "missing"))?;
        let values = sw
            .vector("values")?
            .ok_or_else(|| ConfigError::schema("sweep.values", "missing"))?;
        if values.is_empty() {
            return Err(ConfigError::schema("sweep.values", "must not be empty"));
        }
        sw.finish()?;
        Some(SweepSection { key, values })
    } else {
        None
    };
    root.finish()?;

    let cfg = RunConfig {
        model: model_section,
        grid,
        time,
        signal,
        initial,
        output,
        tolerances,
        scheme,
        sweep,
    };
    // shapes of overridden matrices are checked here, values by `validate`
    cfg.build_model()?;
    Ok(cfg)
}

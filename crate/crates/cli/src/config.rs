//! Experiment configuration: a versioned TOML document validated in full,
//! so a bad file reports every problem at once.

use std::collections::BTreeMap;
use std::fmt;

use monosde::greeks::BelWeight;
use monosde::solver::{SchemeChoice, SchemeKind};
use monosde::{zoo_lookup, DivergencePolicy, TimeGrid};
use toml::{Table, Value};

pub const SCHEMA_VERSION: i64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    Jacobian,
    Malliavin,
    Ladder,
    CameronMartin,
    Greeks,
    Verify,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Simulate,
        Experiment::Jacobian,
        Experiment::Malliavin,
        Experiment::Ladder,
        Experiment::CameronMartin,
        Experiment::Greeks,
        Experiment::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Jacobian => "jacobian",
            Experiment::Malliavin => "malliavin",
            Experiment::Ladder => "ladder",
            Experiment::CameronMartin => "cameron-martin",
            Experiment::Greeks => "greeks",
            Experiment::Verify => "verify",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub name: String,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MalliavinOptions {
    pub s_stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderOptions {
    pub epsilons: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Constant Cameron–Martin density `ḣ`.
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FunctionalChoice {
    /// `F ≡ 1`.
    One,
    /// First component of `X(T)`.
    Terminal,
    /// `min(‖X‖∞, clip)`.
    SupClipped { clip: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameronMartinOptions {
    pub h: f64,
    pub functional: FunctionalChoice,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PayoffChoice {
    Identity,
    Tanh,
    Digital { strike: f64 },
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreeksOptions {
    pub payoff: PayoffChoice,
    pub weight: BelWeight,
    pub fd_eps: f64,
    /// Target time, defaults to the horizon.
    pub time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// Criteria to run; empty means all.
    pub criteria: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub schema_version: i64,
    pub experiment: Experiment,
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub scheme: SchemeChoice,
    pub seed: u64,
    pub n_paths: usize,
    pub divergence: DivergencePolicy,
    /// Largest tolerated fraction of diverged paths under `exclude`.
    pub max_diverged_fraction: f64,
    pub malliavin: MalliavinOptions,
    pub ladder: LadderOptions,
    pub cameron_martin: CameronMartinOptions,
    pub greeks: GreeksOptions,
    pub verify: VerifyOptions,
    /// Artifact directory; `--out` takes precedence.
    pub output: Option<String>,
}

impl Default for LadderOptions {
    fn default() -> Self {
        Self {
            epsilons: (1..=7).map(|k| 0.5f64.powi(k)).collect(),
            deltas: vec![1e-1, 1e-2, 1e-3],
            h: 1.0,
        }
    }
}

impl Default for GreeksOptions {
    fn default() -> Self {
        Self {
            payoff: PayoffChoice::Identity,
            weight: BelWeight::Constant,
            fd_eps: 1e-3,
            time: None,
        }
    }
}

impl ExperimentConfig {
    /// Defaults for everything except the experiment kind.
    pub fn new(experiment: Experiment) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment,
            model: ModelConfig {
                name: "gbm".into(),
                params: BTreeMap::new(),
            },
            grid: GridConfig {
                horizon: 1.0,
                steps: 1024,
            },
            scheme: SchemeChoice::euler(),
            seed: 0,
            n_paths: 1,
            divergence: DivergencePolicy::Fail,
            max_diverged_fraction: 0.0,
            malliavin: MalliavinOptions { s_stride: 16 },
            ladder: LadderOptions::default(),
            cameron_martin: CameronMartinOptions {
                h: 0.5,
                functional: FunctionalChoice::Terminal,
            },
            greeks: GreeksOptions::default(),
            verify: VerifyOptions { criteria: Vec::new() },
            output: None,
        }
    }

    pub fn time_grid(&self) -> TimeGrid {
        TimeGrid::new(self.grid.horizon, self.grid.steps).expect("validated grid")
    }
}

/// Every problem found in a configuration.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub errors: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.errors.len())?;
        for e in &self.errors {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

const TOP_KEYS: &[&str] = &[
    "schema_version",
    "experiment",
    "seed",
    "n_paths",
    "divergence",
    "max_diverged_fraction",
    "model",
    "grid",
    "scheme",
    "malliavin",
    "ladder",
    "cameron_martin",
    "greeks",
    "verify",
    "output",
    "metadata",
];

/// Typed reads from one TOML table, recording problems instead of stopping.
struct Reader<'a, 'e> {
    table: &'a Table,
    prefix: &'a str,
    errors: &'e mut Vec<String>,
}

impl<'a, 'e> Reader<'a, 'e> {
    fn new(table: &'a Table, prefix: &'a str, known: &[&str], errors: &'e mut Vec<String>) -> Self {
        for key in table.keys() {
            if !known.contains(&key.as_str()) {
                errors.push(format!("unknown key `{}`", path(prefix, key)));
            }
        }
        Self { table, prefix, errors }
    }

    fn key(&self, k: &str) -> String {
        path(self.prefix, k)
    }

    fn float(&mut self, k: &str) -> Option<f64> {
        match self.table.get(k)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.errors.push(format!("{} must be a number, got {}", self.key(k), other.type_str()));
                None
            }
        }
    }

    fn int(&mut self, k: &str) -> Option<i64> {
        match self.table.get(k)? {
            Value::Integer(i) => Some(*i),
            other => {
                self.errors.push(format!("{} must be an integer, got {}", self.key(k), other.type_str()));
                None
            }
        }
    }

    fn count(&mut self, k: &str, min: i64) -> Option<usize> {
        let v = self.int(k)?;
        if v < min {
            self.errors.push(format!("{} must be >= {min}", self.key(k)));
            None
        } else {
            Some(v as usize)
        }
    }

    fn string(&mut self, k: &str) -> Option<&'a str> {
        match self.table.get(k)? {
            Value::String(s) => Some(s.as_str()),
            other => {
                self.errors.push(format!("{} must be a string, got {}", self.key(k), other.type_str()));
                None
            }
        }
    }

    fn floats(&mut self, k: &str) -> Option<Vec<f64>> {
        let Value::Array(items) = self.table.get(k)? else {
            self.errors.push(format!("{} must be an array of numbers", self.key(k)));
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for v in items {
            match v {
                Value::Float(f) => out.push(*f),
                Value::Integer(i) => out.push(*i as f64),
                _ => {
                    self.errors.push(format!("{} must be an array of numbers", self.key(k)));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn table(&mut self, k: &str) -> Option<&'a Table> {
        match self.table.get(k)? {
            Value::Table(t) => Some(t),
            other => {
                self.errors.push(format!("{} must be a table, got {}", self.key(k), other.type_str()));
                None
            }
        }
    }

    fn required<T>(&mut self, k: &str, v: Option<T>) -> Option<T> {
        if v.is_none() && !self.table.contains_key(k) {
            self.errors.push(format!("missing required field `{}`", self.key(k)));
        }
        v
    }
}

fn path(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn empty() -> &'static Table {
    static EMPTY: std::sync::OnceLock<Table> = std::sync::OnceLock::new();
    EMPTY.get_or_init(Table::new)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError {
        errors: vec![format!("parse error: {}", e.to_string().trim_end())],
    })?;
    let mut errors = Vec::new();
    let cfg = validate(&table, &mut errors);
    match cfg {
        Some(cfg) if errors.is_empty() => Ok(cfg),
        _ => Err(ConfigError { errors }),
    }
}

fn validate(table: &Table, errors: &mut Vec<String>) -> Option<ExperimentConfig> {
    let mut top = Reader::new(table, "", TOP_KEYS, errors);
    let version = top.int("schema_version");
    let version = top.required("schema_version", version);
    if let Some(v) = version {
        if v != SCHEMA_VERSION {
            top.errors.push(format!("schema_version {v} is not supported (expected {SCHEMA_VERSION})"));
        }
    }
    let experiment = top.string("experiment");
    let experiment = top.required("experiment", experiment).and_then(|s| {
        let e = Experiment::from_name(s);
        if e.is_none() {
            let known: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
            top.errors.push(format!("unknown experiment `{s}`; expected one of {}", known.join(", ")));
        }
        e
    });
    let mut cfg = ExperimentConfig::new(experiment.unwrap_or(Experiment::Verify));
    let needs_model = experiment.is_some_and(|e| e != Experiment::Verify);

    if let Some(seed) = top.int("seed") {
        if seed < 0 {
            top.errors.push("seed must be >= 0".into());
        } else {
            cfg.seed = seed as u64;
        }
    }
    if let Some(n) = top.count("n_paths", 1) {
        cfg.n_paths = n;
    }
    if let Some(p) = top.string("divergence") {
        match p {
            "fail" => cfg.divergence = DivergencePolicy::Fail,
            "exclude" => cfg.divergence = DivergencePolicy::Exclude,
            _ => top.errors.push(format!("divergence must be `fail` or `exclude`, got `{p}`")),
        }
    }
    if let Some(f) = top.float("max_diverged_fraction") {
        if (0.0..=1.0).contains(&f) {
            cfg.max_diverged_fraction = f;
        } else {
            top.errors.push("max_diverged_fraction must lie in [0, 1]".into());
        }
    }
    if let Some(o) = top.string("output") {
        if o.is_empty() {
            top.errors.push("output must be a non-empty path".into());
        } else {
            cfg.output = Some(o.to_string());
        }
    }
    let model = top.table("model");
    let grid = top.table("grid");
    let scheme = top.table("scheme").unwrap_or(empty());
    let malliavin = top.table("malliavin").unwrap_or(empty());
    let ladder = top.table("ladder").unwrap_or(empty());
    let cm = top.table("cameron_martin").unwrap_or(empty());
    let greeks = top.table("greeks").unwrap_or(empty());
    let verify = top.table("verify").unwrap_or(empty());
    if needs_model {
        top.required("model", model);
        top.required("grid", grid);
    }

    let before = errors.len();
    {
        let given = grid.is_some();
        let mut r = Reader::new(grid.unwrap_or(empty()), "grid", &["T", "N"], errors);
        let t = r.float("T");
        let n = r.int("N");
        if needs_model || given {
            r.required("T", t);
            r.required("N", n);
        }
        if let Some(t) = t {
            if !(t > 0.0 && t.is_finite()) {
                r.errors.push("grid.T must be > 0".into());
            } else {
                cfg.grid.horizon = t;
            }
        }
        if let Some(n) = n {
            if n < 1 {
                r.errors.push("grid.N must be >= 1".into());
            } else {
                cfg.grid.steps = n as usize;
            }
        }
    }
    let grid_ok = errors.len() == before;

    let before = errors.len();
    {
        let given = model.is_some();
        let mut r = Reader::new(model.unwrap_or(empty()), "model", &["name", "params"], errors);
        let name = r.string("name");
        if needs_model || given {
            r.required("name", name);
        }
        let params = r.table("params");
        let mut values = BTreeMap::new();
        if let Some(p) = params {
            for (k, v) in p {
                match v {
                    Value::Float(f) => {
                        values.insert(k.clone(), *f);
                    }
                    Value::Integer(i) => {
                        values.insert(k.clone(), *i as f64);
                    }
                    other => r.errors.push(format!("model.params.{k} must be a number, got {}", other.type_str())),
                }
            }
        }
        if let Some(name) = name {
            if let Err(e) = zoo_lookup(name, &values) {
                r.errors.push(format!("model: {e}"));
            }
            cfg.model = ModelConfig {
                name: name.to_string(),
                params: values,
            };
        }
    }
    let model_ok = errors.len() == before;

    {
        let mut r = Reader::new(scheme, "scheme", &["kind", "newton_tol", "newton_max_iter"], errors);
        if let Some(k) = r.string("kind") {
            match SchemeKind::from_name(k) {
                Some(kind) => cfg.scheme.kind = kind,
                None => r.errors.push(format!(
                    "scheme.kind `{k}` unknown; expected euler_maruyama, tamed_euler or split_step_implicit"
                )),
            }
        }
        if let Some(t) = r.float("newton_tol") {
            if t > 0.0 && t.is_finite() {
                cfg.scheme.newton_tol = t;
            } else {
                r.errors.push("scheme.newton_tol must be > 0".into());
            }
        }
        if let Some(n) = r.count("newton_max_iter", 1) {
            cfg.scheme.newton_max_iter = n;
        }
    }

    {
        let mut r = Reader::new(malliavin, "malliavin", &["s_stride"], errors);
        if let Some(s) = r.count("s_stride", 1) {
            cfg.malliavin.s_stride = s;
        }
    }

    {
        let mut r = Reader::new(ladder, "ladder", &["epsilons", "deltas", "h"], errors);
        if let Some(e) = r.floats("epsilons") {
            if e.is_empty() || e.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                r.errors.push("ladder.epsilons must be non-empty and positive".into());
            } else if e.windows(2).any(|p| p[1] >= p[0]) {
                r.errors.push("ladder.epsilons must be strictly decreasing".into());
            } else {
                cfg.ladder.epsilons = e;
            }
        }
        if let Some(d) = r.floats("deltas") {
            if d.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                r.errors.push("ladder.deltas must be positive".into());
            } else {
                cfg.ladder.deltas = d;
            }
        }
        if let Some(h) = r.float("h") {
            if h == 0.0 || !h.is_finite() {
                r.errors.push("ladder.h must be finite and nonzero".into());
            } else {
                cfg.ladder.h = h;
            }
        }
    }

    {
        let mut r = Reader::new(cm, "cameron_martin", &["h", "functional", "clip"], errors);
        if let Some(h) = r.float("h") {
            if h.is_finite() {
                cfg.cameron_martin.h = h;
            } else {
                r.errors.push("cameron_martin.h must be finite".into());
            }
        }
        let clip = r.float("clip");
        if let Some(f) = r.string("functional") {
            match f {
                "one" => cfg.cameron_martin.functional = FunctionalChoice::One,
                "terminal" => cfg.cameron_martin.functional = FunctionalChoice::Terminal,
                "sup_clipped" => {
                    let clip = clip.unwrap_or(10.0);
                    if clip > 0.0 && clip.is_finite() {
                        cfg.cameron_martin.functional = FunctionalChoice::SupClipped { clip };
                    } else {
                        r.errors.push("cameron_martin.clip must be > 0".into());
                    }
                }
                _ => r.errors.push(format!(
                    "cameron_martin.functional `{f}` unknown; expected one, terminal or sup_clipped"
                )),
            }
        }
        if clip.is_some() && !matches!(cfg.cameron_martin.functional, FunctionalChoice::SupClipped { .. }) {
            r.errors.push("cameron_martin.clip only applies to functional = \"sup_clipped\"".into());
        }
    }

    {
        let mut r = Reader::new(greeks, "greeks", &["payoff", "strike", "value", "weight", "fd_eps", "t"], errors);
        let strike = r.float("strike");
        let value = r.float("value");
        if let Some(p) = r.string("payoff") {
            match p {
                "identity" => cfg.greeks.payoff = PayoffChoice::Identity,
                "tanh" => cfg.greeks.payoff = PayoffChoice::Tanh,
                "digital" => match strike {
                    Some(k) if k.is_finite() => cfg.greeks.payoff = PayoffChoice::Digital { strike: k },
                    _ => r.errors.push("greeks.strike is required for the digital payoff".into()),
                },
                "constant" => cfg.greeks.payoff = PayoffChoice::Constant {
                    value: value.unwrap_or(1.0),
                },
                _ => r.errors.push(format!(
                    "greeks.payoff `{p}` unknown; expected identity, tanh, digital or constant"
                )),
            }
        }
        if let Some(w) = r.string("weight") {
            match w {
                "constant" => cfg.greeks.weight = BelWeight::Constant,
                "linear" => cfg.greeks.weight = BelWeight::Linear,
                _ => r.errors.push(format!("greeks.weight `{w}` unknown; expected constant or linear")),
            }
        }
        if let Some(e) = r.float("fd_eps") {
            if e > 0.0 && e.is_finite() {
                cfg.greeks.fd_eps = e;
            } else {
                r.errors.push("greeks.fd_eps must be > 0".into());
            }
        }
        if let Some(t) = r.float("t") {
            cfg.greeks.time = Some(t);
        }
    }

    {
        let mut r = Reader::new(verify, "verify", &["criteria"], errors);
        if let Some(c) = r.floats("criteria") {
            let mut ids = Vec::new();
            for v in c {
                if v.fract() == 0.0 && (1.0..=11.0).contains(&v) {
                    ids.push(v as u32);
                } else {
                    r.errors.push(format!("verify.criteria entry {v} is not a criterion number in 1..=11"));
                }
            }
            cfg.verify.criteria = ids;
        }
    }

    // Cross-field checks against module preconditions.
    if needs_model && grid_ok && model_ok {
        let grid = cfg.time_grid();
        let spec = zoo_lookup(&cfg.model.name, &cfg.model.params).expect("checked above");
        if cfg.scheme.kind == SchemeKind::SplitStepImplicit && grid.dt() * spec.field.monotone_const() >= 1.0 {
            errors.push(format!(
                "grid.N too small for split_step_implicit: dt * L_mono = {} must be < 1",
                grid.dt() * spec.field.monotone_const()
            ));
        }
        let exp = cfg.experiment;
        if exp == Experiment::Malliavin && !cfg.grid.steps.is_multiple_of(cfg.malliavin.s_stride) {
            errors.push("malliavin.s_stride must divide grid.N".into());
        }
        if matches!(exp, Experiment::Ladder | Experiment::CameronMartin | Experiment::Greeks) && cfg.n_paths < 2 {
            errors.push(format!("n_paths must be >= 2 for the {} experiment", exp.name()));
        }
        if exp == Experiment::Ladder && spec.noise_dim() != 1 {
            errors.push("ladder.h is a scalar density; the model must have one noise dimension".into());
        }
        if exp == Experiment::Greeks {
            if let Some(t) = cfg.greeks.time {
                match grid.node_index(t) {
                    Ok(0) | Err(_) => errors.push("greeks.t must be a grid node in (0, T]".into()),
                    Ok(_) => {}
                }
            }
            if spec.initial.is_random() {
                errors.push("greeks needs a fixed initial condition".into());
            }
        }
    }
    if let Some(e) = experiment {
        cfg.experiment = e;
    }
    Some(cfg)
}

fn float_value(v: f64) -> Value {
    Value::Float(v)
}

/// Serializes a configuration so that `parse_config(emit_config(c)) == c`.
pub fn emit_config(cfg: &ExperimentConfig) -> String {
    let mut t = Table::new();
    t.insert("schema_version".into(), Value::Integer(cfg.schema_version));
    t.insert("experiment".into(), Value::String(cfg.experiment.name().into()));
    t.insert("seed".into(), Value::Integer(cfg.seed as i64));
    t.insert("n_paths".into(), Value::Integer(cfg.n_paths as i64));
    t.insert(
        "divergence".into(),
        Value::String(
            match cfg.divergence {
                DivergencePolicy::Fail => "fail",
                DivergencePolicy::Exclude => "exclude",
            }
            .into(),
        ),
    );
    t.insert("max_diverged_fraction".into(), float_value(cfg.max_diverged_fraction));
    if let Some(o) = &cfg.output {
        t.insert("output".into(), Value::String(o.clone()));
    }

    let mut model = Table::new();
    model.insert("name".into(), Value::String(cfg.model.name.clone()));
    let params: Table = cfg.model.params.iter().map(|(k, v)| (k.clone(), float_value(*v))).collect();
    model.insert("params".into(), Value::Table(params));
    t.insert("model".into(), Value::Table(model));

    let mut grid = Table::new();
    grid.insert("T".into(), float_value(cfg.grid.horizon));
    grid.insert("N".into(), Value::Integer(cfg.grid.steps as i64));
    t.insert("grid".into(), Value::Table(grid));

    let mut scheme = Table::new();
    scheme.insert("kind".into(), Value::String(cfg.scheme.kind.name().into()));
    scheme.insert("newton_tol".into(), float_value(cfg.scheme.newton_tol));
    scheme.insert("newton_max_iter".into(), Value::Integer(cfg.scheme.newton_max_iter as i64));
    t.insert("scheme".into(), Value::Table(scheme));

    let mut mall = Table::new();
    mall.insert("s_stride".into(), Value::Integer(cfg.malliavin.s_stride as i64));
    t.insert("malliavin".into(), Value::Table(mall));

    let floats = |v: &[f64]| Value::Array(v.iter().map(|x| float_value(*x)).collect());
    let mut ladder = Table::new();
    ladder.insert("epsilons".into(), floats(&cfg.ladder.epsilons));
    ladder.insert("deltas".into(), floats(&cfg.ladder.deltas));
    ladder.insert("h".into(), float_value(cfg.ladder.h));
    t.insert("ladder".into(), Value::Table(ladder));

    let mut cm = Table::new();
    cm.insert("h".into(), float_value(cfg.cameron_martin.h));
    let functional = match cfg.cameron_martin.functional {
        FunctionalChoice::One => "one",
        FunctionalChoice::Terminal => "terminal",
        FunctionalChoice::SupClipped { clip } => {
            cm.insert("clip".into(), float_value(clip));
            "sup_clipped"
        }
    };
    cm.insert("functional".into(), Value::String(functional.into()));
    t.insert("cameron_martin".into(), Value::Table(cm));

    let mut greeks = Table::new();
    let payoff = match cfg.greeks.payoff {
        PayoffChoice::Identity => "identity",
        PayoffChoice::Tanh => "tanh",
        PayoffChoice::Digital { strike } => {
            greeks.insert("strike".into(), float_value(strike));
            "digital"
        }
        PayoffChoice::Constant { value } => {
            greeks.insert("value".into(), float_value(value));
            "constant"
        }
    };
    greeks.insert("payoff".into(), Value::String(payoff.into()));
    greeks.insert("weight".into(), Value::String(cfg.greeks.weight.name().into()));
    greeks.insert("fd_eps".into(), float_value(cfg.greeks.fd_eps));
    if let Some(time) = cfg.greeks.time {
        greeks.insert("t".into(), float_value(time));
    }
    t.insert("greeks".into(), Value::Table(greeks));

    let mut verify = Table::new();
    verify.insert(
        "criteria".into(),
        Value::Array(cfg.verify.criteria.iter().map(|c| Value::Integer(*c as i64)).collect()),
    );
    t.insert("verify".into(), Value::Table(verify));

    toml::to_string(&t).expect("plain tables serialize")
}

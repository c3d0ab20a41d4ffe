//! `key=value` run configuration: parsing, defaults, validation and
//! serialization.
//!
//! Tokens are separated by whitespace or newlines and `#` starts a comment,
//! so a manifest written by a previous run parses back as a configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use splitsde::likelihood::EstimatorKind;
use splitsde::model::{ModelKind, ParamVector};
use splitsde::scheme::SchemeKind;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Simulate,
    Converge,
    Infer,
    Wasserstein,
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Converge => "converge",
            Command::Infer => "infer",
            Command::Wasserstein => "wasserstein",
            Command::Check => "check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where a setting came from, for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag,
    Default,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Flag => f.write_str("command line"),
            Origin::Default => f.write_str("defaults"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{origin}: expected key=value, found `{token}`")]
    Syntax { origin: Origin, token: String },
    #[error("{origin}: `{key}` is set more than once")]
    Duplicate { origin: Origin, key: String },
    #[error("{origin}: unknown key `{key}` for model {model}; valid keys: {valid}")]
    UnknownKey { origin: Origin, key: String, model: ModelKind, valid: String },
    #[error("{origin}: bad value `{value}` for `{key}`: {reason}")]
    Value { origin: Origin, key: String, value: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

const KEYS: [&str; 16] = [
    "model",
    "scheme",
    "estimators",
    "fix",
    "x0",
    "h_fine",
    "h_obs",
    "T",
    "M",
    "N",
    "seed",
    "out",
    "paper_scale",
    "adaptive",
    "svg",
    "threads",
];

/// A fully resolved run. Every field holds a concrete value: defaults are
/// filled in at parse time so the serialized form is self-contained.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: ModelKind,
    pub params: ParamVector,
    /// Optimizer starting point (inference only).
    pub init: ParamVector,
    /// Names of parameters held at their true value during inference.
    pub fixed: Vec<String>,
    pub schemes: Vec<SchemeKind>,
    pub estimators: Vec<EstimatorKind>,
    pub x0: f64,
    pub h_fine: f64,
    pub h_obs: Vec<f64>,
    pub t: f64,
    pub m: usize,
    pub n: Vec<usize>,
    pub seed: u64,
    pub out: PathBuf,
    pub paper_scale: bool,
    pub adaptive: bool,
    pub svg: bool,
    /// Worker threads; 0 lets the pool decide. Results do not depend on it.
    pub threads: usize,
}

fn dyadic(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(-k)).collect()
}

impl RunConfig {
    /// Defaults for a command before any user setting is applied.
    pub fn defaults(command: Command, model: ModelKind, paper_scale: bool) -> Self {
        let params = model.reference_params();
        let schemes = match command {
            Command::Converge => vec![
                SchemeKind::LieTrotter,
                SchemeKind::Strang,
                SchemeKind::SemiDiscrete,
                SchemeKind::Milstein,
                SchemeKind::LampertiEuler,
                SchemeKind::EulerMaruyama,
            ],
            Command::Wasserstein => vec![SchemeKind::LieTrotter, SchemeKind::Strang, SchemeKind::EulerMaruyama],
            _ => vec![SchemeKind::LieTrotter],
        };
        let estimators = [EstimatorKind::LieTrotter, EstimatorKind::Strang, EstimatorKind::Kessler, EstimatorKind::EulerMaruyama]
            .into_iter()
            .filter(|e| e.supports(model))
            .collect();
        let (h_fine, h_obs, m) = match (command, paper_scale) {
            (Command::Simulate, _) => (0.01, vec![0.1], 10),
            (Command::Converge, false) => (2f64.powi(-12), dyadic(4, 9), 500),
            (Command::Converge, true) => (2f64.powi(-13), dyadic(4, 9), 1000),
            (Command::Infer, false) => (1e-3, vec![0.01, 0.1, 0.5], 100),
            (Command::Infer, true) => (1e-4, vec![0.01, 0.1, 0.5], 1000),
            (Command::Wasserstein, _) => (0.01, vec![0.1], 100_000),
            (Command::Check, _) => (0.01, vec![0.1], 1),
        };
        Self {
            command,
            model,
            init: params.clone(),
            params,
            fixed: Vec::new(),
            schemes,
            estimators,
            x0: model.reference_state(),
            h_fine,
            h_obs,
            t: 1.0,
            m,
            n: vec![200, 1000],
            seed: 2024,
            out: PathBuf::from("runs"),
            paper_scale,
            adaptive: false,
            svg: false,
            threads: 0,
        }
    }

    fn valid_keys(model: ModelKind) -> Vec<String> {
        let names = model.param_names();
        KEYS.iter()
            .map(|k| k.to_string())
            .chain(names.iter().map(|n| n.to_string()))
            .chain(names.iter().map(|n| format!("init.{n}")))
            .collect()
    }

    /// Fixed mask in flat parameter order, holding the true values.
    pub fn fixed_mask(&self) -> Option<Vec<Option<f64>>> {
        if self.fixed.is_empty() {
            return None;
        }
        let flat = self.params.to_flat();
        Some(self.model.param_names().iter().zip(flat).map(|(n, v)| self.fixed.iter().any(|f| f == n).then_some(v)).collect())
    }

    /// Canonical `key=value` text, one setting per line. Numbers use the
    /// shortest representation that parses back to the same value.
    pub fn serialize(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut lines = vec![format!("model={}", self.model)];
        let names = self.model.param_names();
        for (name, value) in names.iter().zip(self.params.to_flat()) {
            lines.push(format!("{name}={value:?}"));
        }
        for (name, value) in names.iter().zip(self.init.to_flat()) {
            lines.push(format!("init.{name}={value:?}"));
        }
        lines.push(format!("fix={}", self.fixed.join(",")));
        lines.push(format!("scheme={}", join(self.schemes.iter().map(|s| s.id().to_string()).collect())));
        lines.push(format!("estimators={}", join(self.estimators.iter().map(|e| e.id().to_string()).collect())));
        lines.push(format!("x0={:?}", self.x0));
        lines.push(format!("h_fine={:?}", self.h_fine));
        lines.push(format!("h_obs={}", join(self.h_obs.iter().map(|h| format!("{h:?}")).collect())));
        lines.push(format!("T={:?}", self.t));
        lines.push(format!("M={}", self.m));
        lines.push(format!("N={}", join(self.n.iter().map(|n| n.to_string()).collect())));
        lines.push(format!("seed={}", self.seed));
        lines.push(format!("out={}", self.out.display()));
        lines.push(format!("paper_scale={}", self.paper_scale));
        lines.push(format!("adaptive={}", self.adaptive));
        lines.push(format!("svg={}", self.svg));
        lines.push(format!("threads={}", self.threads));
        let mut text = lines.join("\n");
        text.push('\n');
        text
    }
}

/// Raw settings keyed by name, remembering where each came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    entries: BTreeMap<String, (String, Origin)>,
}

impl Settings {
    /// Reads `key=value` tokens. A key may appear only once per text.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut settings = Settings::default();
        for (index, line) in text.lines().enumerate() {
            let origin = Origin::Line(index + 1);
            let content = line.split('#').next().unwrap_or("");
            for token in content.split_whitespace() {
                let (key, value) = split_pair(token).ok_or_else(|| ConfigError::Syntax { origin: origin.clone(), token: token.to_string() })?;
                if settings.entries.contains_key(key) {
                    return Err(ConfigError::Duplicate { origin, key: key.to_string() });
                }
                settings.entries.insert(key.to_string(), (value.to_string(), origin.clone()));
            }
        }
        Ok(settings)
    }

    /// Sets a value from the command line; later calls win.
    pub fn set_flag(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), (value.into(), Origin::Flag));
    }

    /// Splits `k=v,k=v` and sets each pair, optionally under a key prefix.
    pub fn set_flag_pairs(&mut self, prefix: &str, list: &str) -> Result<(), ConfigError> {
        for token in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (key, value) = split_pair(token).ok_or_else(|| ConfigError::Syntax { origin: Origin::Flag, token: token.to_string() })?;
            self.set_flag(&format!("{prefix}{key}"), value);
        }
        Ok(())
    }

    pub fn merge(&mut self, other: Settings) {
        self.entries.extend(other.entries);
    }

    fn take(&mut self, key: &str) -> Option<(String, Origin)> {
        self.entries.remove(key)
    }
}

fn split_pair(token: &str) -> Option<(&str, &str)> {
    let (key, value) = token.split_once('=')?;
    (!key.is_empty()).then_some((key, value))
}

fn bad(key: &str, value: &str, origin: &Origin, reason: impl fmt::Display) -> ConfigError {
    ConfigError::Value { origin: origin.clone(), key: key.to_string(), value: value.to_string(), reason: reason.to_string() }
}

/// Parses a number, also accepting `2^k` for step sizes.
fn parse_f64(text: &str) -> Result<f64, String> {
    if let Some((base, exp)) = text.split_once('^') {
        let base: f64 = base.parse().map_err(|e| format!("{e}"))?;
        let exp: i32 = exp.parse().map_err(|e| format!("{e}"))?;
        return Ok(base.powi(exp));
    }
    text.parse().map_err(|e| format!("{e}"))
}

fn parse_list<T>(key: &str, value: &str, origin: &Origin, one: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, ConfigError> {
    value.split(',').filter(|s| !s.is_empty()).map(|s| one(s).map_err(|e| bad(key, value, origin, e))).collect()
}

fn parse_one<T: FromStr>(key: &str, value: &str, origin: &Origin) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| bad(key, value, origin, e))
}

/// Resolves settings into a validated configuration for `command`.
pub fn parse_config(command: Command, mut settings: Settings) -> Result<RunConfig, ConfigError> {
    let paper_scale = match settings.take("paper_scale") {
        Some((v, o)) => parse_one::<bool>("paper_scale", &v, &o)?,
        None => false,
    };
    let model = match settings.take("model") {
        Some((v, o)) => parse_one::<ModelKind>("model", &v, &o)?,
        None => ModelKind::Cir,
    };
    let mut cfg = RunConfig::defaults(command, model, paper_scale);
    let valid = RunConfig::valid_keys(model);
    if let Some((key, (_, origin))) = settings.entries.iter().find(|(k, _)| !valid.contains(k)) {
        return Err(ConfigError::UnknownKey { origin: origin.clone(), key: key.clone(), model, valid: valid.join(", ") });
    }

    let names = model.param_names();
    let mut params = cfg.params.to_flat();
    let mut init_set: Vec<Option<f64>> = vec![None; names.len()];
    for (i, name) in names.iter().enumerate() {
        if let Some((v, o)) = settings.take(name) {
            params[i] = parse_f64(&v).map_err(|e| bad(name, &v, &o, e))?;
        }
        let key = format!("init.{name}");
        if let Some((v, o)) = settings.take(&key) {
            init_set[i] = Some(parse_f64(&v).map_err(|e| bad(&key, &v, &o, e))?);
        }
    }
    let init: Vec<f64> = init_set.iter().zip(&params).map(|(s, p)| s.unwrap_or(*p)).collect();
    cfg.params = ParamVector::from_flat(model, &params).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    cfg.init = ParamVector::from_flat(model, &init).map_err(|e| ConfigError::Invalid(e.to_string()))?;

    while let Some((key, (value, origin))) = settings.entries.pop_first() {
        let (k, v, o) = (key.as_str(), value.as_str(), &origin);
        match k {
            "scheme" => cfg.schemes = parse_list(k, v, o, |s| s.parse::<SchemeKind>().map_err(|e| e.to_string()))?,
            "estimators" => cfg.estimators = parse_list(k, v, o, |s| s.parse::<EstimatorKind>().map_err(|e| e.to_string()))?,
            "fix" => {
                cfg.fixed = parse_list(k, v, o, |s| {
                    if names.contains(&s) {
                        Ok(s.to_string())
                    } else {
                        Err(format!("not a parameter of {model} ({})", names.join(", ")))
                    }
                })?
            }
            "x0" => cfg.x0 = parse_f64(v).map_err(|e| bad(k, v, o, e))?,
            "h_fine" => cfg.h_fine = parse_f64(v).map_err(|e| bad(k, v, o, e))?,
            "h_obs" => cfg.h_obs = parse_list(k, v, o, parse_f64)?,
            "T" => cfg.t = parse_f64(v).map_err(|e| bad(k, v, o, e))?,
            "M" => cfg.m = parse_one(k, v, o)?,
            "N" => cfg.n = parse_list(k, v, o, |s| s.parse::<usize>().map_err(|e| e.to_string()))?,
            "seed" => cfg.seed = parse_one(k, v, o)?,
            "out" => cfg.out = PathBuf::from(v),
            "adaptive" => cfg.adaptive = parse_one(k, v, o)?,
            "svg" => cfg.svg = parse_one(k, v, o)?,
            "threads" => cfg.threads = parse_one(k, v, o)?,
            _ => unreachable!("keys were checked against the valid set"),
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Checks everything that can be checked before computing.
pub fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    let model = cfg.model.bind(&cfg.params).map_err(|e| invalid(format!("parameters: {e}")))?;
    if !model.state_space().contains_interior(cfg.x0) {
        return Err(invalid(format!("x0 = {} is not inside the state space of {}", cfg.x0, cfg.model)));
    }
    let positive = |name: &str, v: f64| if v.is_finite() && v > 0.0 { Ok(()) } else { Err(invalid(format!("{name} must be positive, got {v}"))) };
    positive("h_fine", cfg.h_fine)?;
    positive("T", cfg.t)?;
    for &h in &cfg.h_obs {
        positive("h_obs", h)?;
    }
    if cfg.m == 0 {
        return Err(invalid("M must be at least 1"));
    }
    let exact_ok = |s: &SchemeKind| *s != SchemeKind::Exact || cfg.model.has_exact_law();
    if let Some(s) = cfg.schemes.iter().find(|s| !exact_ok(s)) {
        return Err(invalid(format!("scheme {s} needs a model with a closed-form law; {} has none", cfg.model)));
    }
    match cfg.command {
        Command::Simulate => {
            if cfg.schemes.len() != 1 {
                return Err(invalid("simulate takes exactly one scheme"));
            }
            steps(cfg.t, cfg.h_fine).ok_or_else(|| invalid(format!("T = {} is not a multiple of h_fine = {}", cfg.t, cfg.h_fine)))?;
        }
        Command::Converge => {
            if cfg.schemes.is_empty() || cfg.h_obs.len() < 3 {
                return Err(invalid("converge needs at least one scheme and three step sizes in h_obs"));
            }
            if cfg.schemes.contains(&SchemeKind::Exact) {
                return Err(invalid("the exact sampler cannot be coupled to a Brownian grid; drop it from scheme"));
            }
            let n_fine = steps(cfg.t, cfg.h_fine).ok_or_else(|| invalid(format!("T = {} is not a multiple of h_fine = {}", cfg.t, cfg.h_fine)))?;
            for &h in &cfg.h_obs {
                match steps(h, cfg.h_fine) {
                    Some(k) if n_fine % k == 0 => {}
                    _ => return Err(invalid(format!("h_obs = {h} is not a multiple of h_fine = {} dividing T", cfg.h_fine))),
                }
            }
        }
        Command::Infer => {
            if cfg.estimators.is_empty() || cfg.h_obs.is_empty() || cfg.n.is_empty() {
                return Err(invalid("infer needs estimators, h_obs and N"));
            }
            if let Some(e) = cfg.estimators.iter().find(|e| !e.supports(cfg.model)) {
                return Err(invalid(format!("estimator {e} is not available for {}", cfg.model)));
            }
            if let Some(n) = cfg.n.iter().find(|n| **n < 2) {
                return Err(invalid(format!("N must be at least 2, got {n}")));
            }
            if cfg.fixed.len() >= cfg.model.param_names().len() {
                return Err(invalid("at least one parameter must be free"));
            }
            cfg.model.bind(&cfg.init).map_err(|e| invalid(format!("initial guess: {e}")))?;
        }
        Command::Wasserstein => {
            if !cfg.model.has_exact_law() {
                return Err(invalid(format!("wasserstein compares against the exact law, which {} lacks", cfg.model)));
            }
            if cfg.schemes.is_empty() || cfg.h_obs.is_empty() {
                return Err(invalid("wasserstein needs schemes and h_obs"));
            }
        }
        Command::Check => {}
    }
    Ok(())
}

/// `a / b` as a whole number of steps, if it is one.
pub fn steps(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let k = r.round();
    ((r - k).abs() < 1e-9 * r.max(1.0) && k >= 1.0).then_some(k as usize)
}

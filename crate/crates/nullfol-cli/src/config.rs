//! Flat `key = value` run configuration with `[run]`, `[audit]` and
//! `[tolerances]` sections. Unknown sections and keys are errors.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    MinkowskiRound,
    MinkowskiAnisotropic,
    Perturbed,
    SyntheticCurvature,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::MinkowskiRound => "minkowski_round",
            Scenario::MinkowskiAnisotropic => "minkowski_anisotropic",
            Scenario::Perturbed => "perturbed",
            Scenario::SyntheticCurvature => "synthetic_curvature",
        }
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [Scenario::MinkowskiRound, Scenario::MinkowskiAnisotropic, Scenario::Perturbed, Scenario::SyntheticCurvature]
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown scenario {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Identities,
    Inequalities,
    Bootstrap,
    Commutators,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Identities, Suite::Inequalities, Suite::Bootstrap, Suite::Commutators];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Inequalities => "inequalities",
            Suite::Bootstrap => "bootstrap",
            Suite::Commutators => "commutators",
        }
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| format!("unknown audit suite {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    /// Local error bound of the step controller.
    pub step_tol: f64,
    /// Identity and constraint residuals counted as clean.
    pub identity: f64,
    /// Bianchi residuals above this flag the curvature input as inconsistent.
    pub bianchi: f64,
    /// Largest oracle error reported as a match.
    pub oracle: f64,
    /// Weak-sphericity threshold handed to the atlas audit.
    pub ws_threshold: f64,
    pub caustic_threshold: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { step_tol: 1e-9, identity: 1e-8, bianchi: 0.1, oracle: 1e-8, ws_threshold: 0.1, caustic_threshold: 1e6 }
    }
}

/// A validated run configuration. Relative output paths are resolved
/// against the directory of the configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub l_max: usize,
    pub r0: f64,
    pub s_end: f64,
    pub h: f64,
    pub seed: u64,
    /// Homogeneous data for `minkowski_anisotropic`.
    pub trchi0: f64,
    pub chih0: f64,
    /// Perturbation size for `perturbed`.
    pub eps: f64,
    /// Band limit of seeded perturbations and synthetic curvature.
    pub band: usize,
    /// Sup norm of synthetic curvature.
    pub amplitude: f64,
    pub record_stride: usize,
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub suites: Vec<Suite>,
    pub delta0: f64,
    /// Leaves passed to the history audits: every `audit_stride`-th recorded leaf and the last.
    pub audit_stride: usize,
    pub corpus_seed: u64,
    pub commutator_a: f64,
    pub commutator_eps: f64,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::MinkowskiRound,
            l_max: 12,
            r0: 1.0,
            s_end: 1.0,
            h: 1e-2,
            seed: 0,
            trchi0: 0.0,
            chih0: std::f64::consts::SQRT_2,
            eps: 1e-3,
            band: 4,
            amplitude: 1e-2,
            record_stride: 1,
            csv: None,
            json: None,
            suites: Vec::new(),
            delta0: 0.01,
            audit_stride: 10,
            corpus_seed: 2024,
            commutator_a: 0.5,
            commutator_eps: 0.1,
            tolerances: Tolerances::default(),
        }
    }
}

/// Parse or validation failure, located by line when it comes from the text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { line, field: field.to_string(), message: message.into() }
}

fn parse<T: FromStr>(line: usize, field: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e: T::Err| err(Some(line), field, format!("cannot parse {v:?}: {e}")))
}

fn parse_suites(line: usize, field: &str, v: &str) -> Result<Vec<Suite>, ConfigError> {
    let mut out = BTreeSet::new();
    for item in v.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        out.insert(item.parse::<Suite>().map_err(|e| err(Some(line), field, e))?);
    }
    Ok(out.into_iter().collect())
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(None, &path.display().to_string(), format!("cannot read: {e}")))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::parse(&text, base)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        cfg.csv.get_or_insert_with(|| base.join(format!("{stem}.csv")));
        cfg.json.get_or_insert_with(|| base.join(format!("{stem}.json")));
        Ok(cfg)
    }

    /// Parses configuration text; relative paths are joined to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut section: Option<String> = None;
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let t = raw.split('#').next().unwrap_or("").trim();
            if t.is_empty() {
                continue;
            }
            if let Some(name) = t.strip_prefix('[').and_then(|x| x.strip_suffix(']')) {
                let name = name.trim();
                if !matches!(name, "run" | "audit" | "tolerances") {
                    return Err(err(Some(line), name, "unknown section"));
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((k, v)) = t.split_once('=') else {
                return Err(err(Some(line), t, "expected `key = value`"));
            };
            let (k, v) = (k.trim(), v.trim());
            let Some(sec) = section.as_deref() else {
                return Err(err(Some(line), k, "key outside of a section"));
            };
            let field = format!("{sec}.{k}");
            if !seen.insert(field.clone()) {
                return Err(err(Some(line), &field, "duplicate key"));
            }
            let tol = &mut cfg.tolerances;
            match (sec, k) {
                ("run", "scenario") => cfg.scenario = v.parse().map_err(|e: String| err(Some(line), &field, e))?,
                ("run", "l_max") => cfg.l_max = parse(line, &field, v)?,
                ("run", "r0") => cfg.r0 = parse(line, &field, v)?,
                ("run", "s_end") => cfg.s_end = parse(line, &field, v)?,
                ("run", "h") => cfg.h = parse(line, &field, v)?,
                ("run", "seed") => cfg.seed = parse(line, &field, v)?,
                ("run", "trchi0") => cfg.trchi0 = parse(line, &field, v)?,
                ("run", "chih0") => cfg.chih0 = parse(line, &field, v)?,
                ("run", "eps") => cfg.eps = parse(line, &field, v)?,
                ("run", "band") => cfg.band = parse(line, &field, v)?,
                ("run", "amplitude") => cfg.amplitude = parse(line, &field, v)?,
                ("run", "record_stride") => cfg.record_stride = parse(line, &field, v)?,
                ("run", "csv") => cfg.csv = Some(base.join(v)),
                ("run", "json") => cfg.json = Some(base.join(v)),
                ("audit", "suites") => cfg.suites = parse_suites(line, &field, v)?,
                ("audit", "delta0") => cfg.delta0 = parse(line, &field, v)?,
                ("audit", "audit_stride") => cfg.audit_stride = parse(line, &field, v)?,
                ("audit", "corpus_seed") => cfg.corpus_seed = parse(line, &field, v)?,
                ("audit", "commutator_a") => cfg.commutator_a = parse(line, &field, v)?,
                ("audit", "commutator_eps") => cfg.commutator_eps = parse(line, &field, v)?,
                ("tolerances", "step_tol") => tol.step_tol = parse(line, &field, v)?,
                ("tolerances", "identity") => tol.identity = parse(line, &field, v)?,
                ("tolerances", "bianchi") => tol.bianchi = parse(line, &field, v)?,
                ("tolerances", "oracle") => tol.oracle = parse(line, &field, v)?,
                ("tolerances", "ws_threshold") => tol.ws_threshold = parse(line, &field, v)?,
                ("tolerances", "caustic_threshold") => tol.caustic_threshold = parse(line, &field, v)?,
                _ => return Err(err(Some(line), &field, "unknown key")),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        let checks: [(bool, &str, &str); 14] = [
            ((2..=64).contains(&self.l_max), "run.l_max", "must lie in 2..=64"),
            (self.r0 >= 1.0 && self.r0.is_finite(), "run.r0", "must be at least 1"),
            (self.s_end >= 0.0 && self.s_end.is_finite(), "run.s_end", "must be finite and non-negative"),
            (positive(self.h), "run.h", "must be positive"),
            (self.trchi0.is_finite() && self.chih0 >= 0.0 && self.chih0.is_finite(), "run.chih0", "needs finite trchi0 and chih0 >= 0"),
            (self.eps >= 0.0 && self.eps.is_finite(), "run.eps", "must be finite and non-negative"),
            (self.band >= 2 && self.band <= self.l_max, "run.band", "must lie in 2..=l_max"),
            (self.amplitude.is_finite(), "run.amplitude", "must be finite"),
            (self.record_stride >= 1, "run.record_stride", "must be at least 1"),
            (positive(self.delta0), "audit.delta0", "must be positive"),
            (self.audit_stride >= 1, "audit.audit_stride", "must be at least 1"),
            (self.commutator_a > 0.0 && self.commutator_a < 1.0, "audit.commutator_a", "must lie in (0, 1)"),
            (self.commutator_eps >= 0.0 && self.commutator_eps.is_finite(), "audit.commutator_eps", "must be non-negative"),
            (
                [self.tolerances.step_tol, self.tolerances.identity, self.tolerances.bianchi, self.tolerances.oracle, self.tolerances.ws_threshold, self.tolerances.caustic_threshold]
                    .iter()
                    .all(|x| positive(*x)),
                "tolerances",
                "all tolerances must be positive",
            ),
        ];
        match checks.iter().find(|(ok, _, _)| !ok) {
            Some((_, field, msg)) => Err(err(None, field, *msg)),
            None => Ok(()),
        }
    }
}

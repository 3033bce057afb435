//! Experiment specification files.
//!
//! A spec is a TOML document. Top-level keys:
//!
//! | key            | type              | default            |
//! |----------------|-------------------|--------------------|
//! | `problems`     | list of strings   | required           |
//! | `dims`         | list of integers  | none               |
//! | `problem_seed` | integer           | 1                  |
//! | `runs`         | integer ≥ 1       | 25                 |
//! | `base_seed`    | integer           | 0                  |
//! | `out_dir`      | string            | `"results"`        |
//! | `workers`      | integer (0 = all) | 0                  |
//!
//! Each `[[arm]]` table takes `name`, `mode` (`"mses"` or `"single"`) and any
//! engine setting below. Engine settings given at the top level apply to every
//! arm unless the arm overrides them. Without any `[[arm]]` the spec runs the
//! two arms `mses-de` and `single-de`.
//!
//! | key                    | meaning                                         |
//! |------------------------|-------------------------------------------------|
//! | `optimizer`            | `"de"` or `"llso"`                              |
//! | `NP`                   | population size of each space                   |
//! | `d_s`                  | simplified dimension                            |
//! | `G_t`, `G_r`           | transfer and reconstruction intervals           |
//! | `Q`, `P`               | elites transferred to original / simplified     |
//! | `A_size`               | archive capacity                                |
//! | `max_FEs`              | evaluation budget                               |
//! | `F`, `CR`              | DE scale factor and crossover rate              |
//! | `NL`, `phi`            | LLSO level count and social factor              |
//! | `dedup_tol`            | archive duplicate tolerance                     |
//! | `simplified_optimizer` | solver of the simplified space                  |
//!
//! `d_s`, `Q`, `P` and `A_size` accept an integer or a string scaled by the
//! population or the dimension, such as `"0.2np"` or `"0.6dim"`.
//!
//! A problem entry is either a full registry id such as
//! `partial-elliptic-d100-s1`, or a `<structure>-<base>` template expanded for
//! every entry of `dims` with seed `problem_seed`.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::bench::{BaseFunction, ProblemSpec, Structure};
use crate::engine::MsesConfig;
use crate::error::{Error, Result};
use crate::optimizers::{OptimizerKind, OptimizerParams};

const TOP_KEYS: [&str; 8] = [
    "problems",
    "dims",
    "problem_seed",
    "runs",
    "base_seed",
    "out_dir",
    "workers",
    "arm",
];

const ARM_KEYS: [&str; 2] = ["name", "mode"];

const CONFIG_KEYS: [&str; 15] = [
    "optimizer",
    "NP",
    "d_s",
    "G_t",
    "G_r",
    "Q",
    "P",
    "A_size",
    "max_FEs",
    "F",
    "CR",
    "NL",
    "phi",
    "dedup_tol",
    "simplified_optimizer",
];

/// Settings that only matter when the simplified space exists.
const TRANSFER_KEYS: [&str; 8] = [
    "d_s",
    "G_t",
    "G_r",
    "Q",
    "P",
    "A_size",
    "dedup_tol",
    "simplified_optimizer",
];

pub const DEFAULT_RUNS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Mses,
    Single,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Mses => "mses",
            Mode::Single => "single",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mses" => Ok(Mode::Mses),
            "single" => Ok(Mode::Single),
            other => Err(Error::invalid(format!(
                "unknown mode `{other}` (expected `mses` or `single`)"
            ))),
        }
    }
}

/// A count given directly or as a multiple of NP or of the dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scaled {
    Absolute(usize),
    OfPopulation(f64),
    OfDim(f64),
}

impl Scaled {
    pub fn resolve(self, population: usize, dim: usize) -> usize {
        let scale = |f: f64, base: usize| (f * base as f64 - 1e-9).ceil().max(0.0) as usize;
        match self {
            Scaled::Absolute(n) => n,
            Scaled::OfPopulation(f) => scale(f, population),
            Scaled::OfDim(f) => scale(f, dim),
        }
    }
}

impl FromStr for Scaled {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invalid(format!("`{s}` is not a count, `<f>np` or `<f>dim`"));
        let factor = |t: &str| -> Result<f64> {
            let f: f64 = t.trim().trim_end_matches('*').trim().parse().map_err(|_| bad())?;
            if f.is_finite() && f > 0.0 {
                Ok(f)
            } else {
                Err(bad())
            }
        };
        let lower = s.to_ascii_lowercase();
        if let Some(t) = lower.strip_suffix("dim") {
            Ok(Scaled::OfDim(factor(t)?))
        } else if let Some(t) = lower.strip_suffix("np") {
            Ok(Scaled::OfPopulation(factor(t)?))
        } else {
            s.parse().map(Scaled::Absolute).map_err(|_| bad())
        }
    }
}

impl fmt::Display for Scaled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scaled::Absolute(n) => write!(f, "{n}"),
            Scaled::OfPopulation(x) => write!(f, "{x}np"),
            Scaled::OfDim(x) => write!(f, "{x}dim"),
        }
    }
}

/// Engine settings left unset fall back to the engine defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub optimizer: Option<OptimizerKind>,
    pub population: Option<usize>,
    pub simplified_dim: Option<Scaled>,
    pub transfer_interval: Option<u64>,
    pub reconstruction_interval: Option<u64>,
    pub to_original: Option<Scaled>,
    pub to_simplified: Option<Scaled>,
    pub archive_capacity: Option<Scaled>,
    pub max_fes: Option<u64>,
    pub de_f: Option<f64>,
    pub de_cr: Option<f64>,
    pub llso_levels: Option<usize>,
    pub llso_phi: Option<f64>,
    pub dedup_tol: Option<f64>,
    pub simplified_optimizer: Option<OptimizerKind>,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f; } )*
    };
}

impl Overrides {
    /// Fields set in `other` win.
    pub fn merged(mut self, other: &Overrides) -> Overrides {
        merge_fields!(
            self,
            other,
            optimizer,
            population,
            simplified_dim,
            transfer_interval,
            reconstruction_interval,
            to_original,
            to_simplified,
            archive_capacity,
            max_fes,
            de_f,
            de_cr,
            llso_levels,
            llso_phi,
            dedup_tol,
            simplified_optimizer
        );
        self
    }

    /// Engine configuration for a problem of dimension `dim`.
    pub fn config_for(&self, dim: usize, mode: Mode) -> MsesConfig {
        let kind = self.optimizer.unwrap_or(OptimizerKind::De);
        let params = self.params(kind);
        let mut config = MsesConfig::for_dim(dim, params);
        if let Some(np) = self.population {
            config.set_population(np);
        }
        let np = config.population;
        if let Some(v) = self.simplified_dim {
            config.simplified_dim = v.resolve(np, dim);
        }
        if let Some(v) = self.transfer_interval {
            config.transfer_interval = v;
        }
        if let Some(v) = self.reconstruction_interval {
            config.reconstruction_interval = v;
        }
        if let Some(v) = self.to_original {
            config.to_original = v.resolve(np, dim);
        }
        if let Some(v) = self.to_simplified {
            config.to_simplified = v.resolve(np, dim);
        }
        if let Some(v) = self.archive_capacity {
            config.archive_capacity = v.resolve(np, dim);
        }
        if let Some(v) = self.max_fes {
            config.max_fes = v;
        }
        if let Some(v) = self.dedup_tol {
            config.dedup_tol = v;
        }
        if let Some(kind) = self.simplified_optimizer {
            config.simplified_optimizer = Some(self.params(kind));
        }
        config.multi_space = mode == Mode::Mses;
        config
    }

    fn params(&self, kind: OptimizerKind) -> OptimizerParams {
        let mut params = match kind {
            OptimizerKind::De => OptimizerParams::de(),
            OptimizerKind::Llso => OptimizerParams::llso(),
        };
        if let Some(f) = self.de_f {
            params.de.f = f;
        }
        if let Some(cr) = self.de_cr {
            params.de.cr = cr;
        }
        if let Some(nl) = self.llso_levels {
            params.llso.levels = nl;
        }
        if let Some(phi) = self.llso_phi {
            params.llso.phi = phi;
        }
        params
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub name: String,
    pub mode: Mode,
    /// Shared top-level settings merged with the arm's own.
    pub overrides: Overrides,
}

impl ArmSpec {
    pub fn new(name: impl Into<String>, mode: Mode, overrides: Overrides) -> Self {
        Self {
            name: name.into(),
            mode,
            overrides,
        }
    }

    pub fn config_for(&self, dim: usize) -> MsesConfig {
        self.overrides.config_for(dim, self.mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Resolved registry ids.
    pub problems: Vec<String>,
    pub runs: usize,
    pub base_seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub arms: Vec<ArmSpec>,
    /// Non-fatal notes produced while loading.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ExperimentSpec {
    /// One problem and the default pair of arms.
    pub fn new(problems: Vec<String>) -> Self {
        Self {
            problems,
            runs: DEFAULT_RUNS,
            base_seed: 0,
            out_dir: PathBuf::from("results"),
            workers: 0,
            arms: default_arms(&Overrides::default()),
            warnings: Vec::new(),
        }
    }

    /// Checks the invariants and that every arm is valid on every problem.
    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        if self.arms.is_empty() {
            return Err(Error::invalid("at least one arm is required"));
        }
        if self.problems.is_empty() {
            return Err(Error::invalid("at least one problem is required"));
        }
        let mut names = BTreeSet::new();
        for arm in &self.arms {
            if arm.name.is_empty()
                || !arm
                    .name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
                || arm.name.starts_with('.')
            {
                return Err(Error::invalid(format!(
                    "arm name `{}` must be non-empty and use only letters, digits, `-`, `_` or `.`",
                    arm.name
                )));
            }
            if !names.insert(arm.name.as_str()) {
                return Err(Error::invalid(format!("duplicate arm name `{}`", arm.name)));
            }
        }
        let mut seen = BTreeSet::new();
        for id in &self.problems {
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid(format!("problem `{id}` listed twice")));
            }
            let problem = ProblemSpec::parse(id)?;
            for arm in &self.arms {
                arm.config_for(problem.dim).validate(problem.dim).map_err(|e| {
                    Error::invalid(format!("arm `{}` on `{id}`: {e}", arm.name))
                })?;
            }
        }
        Ok(())
    }
}

fn default_arms(shared: &Overrides) -> Vec<ArmSpec> {
    let kind = shared.optimizer.unwrap_or(OptimizerKind::De);
    [Mode::Mses, Mode::Single]
        .into_iter()
        .map(|mode| ArmSpec::new(format!("{}-{}", mode.name(), kind.name()), mode, *shared))
        .collect()
}

/// Reads and validates a spec file.
pub fn load_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::error::Error::io(path, e))?;
    parse_spec(&text, path)
}

/// Parses spec text; `path` is only used in error messages.
pub fn parse_spec(text: &str, path: &Path) -> Result<ExperimentSpec> {
    let table: Table = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|span| line_of_offset(text, span.start))
            .unwrap_or(0);
        Error::Parse {
            path: path.to_path_buf(),
            message: format!("line {line}: {}", e.message()),
        }
    })?;
    let ctx = Ctx { text, path };

    let all_top: Vec<&str> = TOP_KEYS.iter().chain(CONFIG_KEYS.iter()).copied().collect();
    for key in table.keys() {
        if !all_top.contains(&key.as_str()) {
            return Err(ctx.unknown(key, &all_top));
        }
    }

    let problems = match table.get("problems") {
        Some(v) => ctx.string_list("problems", v)?,
        None => return Err(ctx.error("problems", "missing required key")),
    };
    let dims = match table.get("dims") {
        Some(v) => Some(ctx.int_list("dims", v)?),
        None => None,
    };
    let problem_seed = ctx.opt_u64(&table, "problem_seed")?.unwrap_or(1);
    let problems = expand_problems(&ctx, &problems, dims.as_deref(), problem_seed)?;

    let runs = ctx.opt_u64(&table, "runs")?.unwrap_or(DEFAULT_RUNS as u64) as usize;
    if runs < 1 {
        return Err(ctx.error("runs", "must be at least 1"));
    }
    let base_seed = ctx.opt_u64(&table, "base_seed")?.unwrap_or(0);
    let workers = ctx.opt_u64(&table, "workers")?.unwrap_or(0) as usize;
    let out_dir = match table.get("out_dir") {
        Some(v) => PathBuf::from(ctx.string("out_dir", v)?),
        None => PathBuf::from("results"),
    };

    let shared = ctx.overrides(&table)?;
    let mut warnings = Vec::new();
    let arms = match table.get("arm") {
        None => default_arms(&shared),
        Some(Value::Array(items)) => {
            let arm_keys: Vec<&str> = ARM_KEYS.iter().chain(CONFIG_KEYS.iter()).copied().collect();
            let mut arms = Vec::with_capacity(items.len());
            for item in items {
                let Value::Table(arm_table) = item else {
                    return Err(ctx.error("arm", "each arm must be a table (`[[arm]]`)"));
                };
                for key in arm_table.keys() {
                    if !arm_keys.contains(&key.as_str()) {
                        return Err(ctx.unknown(key, &arm_keys));
                    }
                }
                let mode = match arm_table.get("mode") {
                    Some(v) => ctx
                        .string("mode", v)?
                        .parse()
                        .map_err(|e: Error| ctx.error("mode", &e.to_string()))?,
                    None => Mode::Mses,
                };
                let own = ctx.overrides(arm_table)?;
                let overrides = shared.merged(&own);
                let name = match arm_table.get("name") {
                    Some(v) => ctx.string("name", v)?,
                    None => format!(
                        "{}-{}",
                        mode.name(),
                        overrides.optimizer.unwrap_or(OptimizerKind::De).name()
                    ),
                };
                if mode == Mode::Single {
                    let ignored: Vec<&str> = TRANSFER_KEYS
                        .iter()
                        .copied()
                        .filter(|k| arm_table.contains_key(*k))
                        .collect();
                    if !ignored.is_empty() {
                        let note = format!(
                            "arm `{name}` runs in single mode; ignoring {}",
                            ignored.join(", ")
                        );
                        log::warn!("{note}");
                        warnings.push(note);
                    }
                }
                arms.push(ArmSpec::new(name, mode, overrides));
            }
            arms
        }
        Some(_) => return Err(ctx.error("arm", "expected one or more `[[arm]]` tables")),
    };

    let spec = ExperimentSpec {
        problems,
        runs,
        base_seed,
        out_dir,
        workers,
        arms,
        warnings,
    };
    for (i, arm) in spec.arms.iter().enumerate() {
        for id in &spec.problems {
            let dim = ProblemSpec::parse(id)?.dim;
            if let Err(e) = arm.config_for(dim).validate(dim) {
                let mut err = ctx.error("arm", &format!("arm `{}` on `{id}`: {e}", arm.name));
                if let Error::Spec { line, .. } = &mut err {
                    *line = nth_line_starting(text, "[[arm]]", i).unwrap_or(0);
                }
                return Err(err);
            }
        }
    }
    spec.validate().map_err(|e| match e {
        Error::InvalidArgument(message) => ctx.error("arm", &message),
        other => other,
    })?;
    Ok(spec)
}

fn expand_problems(
    ctx: &Ctx<'_>,
    entries: &[String],
    dims: Option<&[u64]>,
    problem_seed: u64,
) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for entry in entries {
        if ProblemSpec::parse(entry).is_ok() {
            ids.push(entry.clone());
            continue;
        }
        let template: Vec<&str> = entry.split('-').collect();
        let is_template = template.len() == 2
            && template[0].parse::<Structure>().is_ok()
            && template[1].parse::<BaseFunction>().is_ok();
        if !is_template {
            let why = ProblemSpec::parse(entry)
                .err()
                .map(|e| e.to_string())
                .unwrap_or_default();
            return Err(ctx.error("problems", &why));
        }
        let Some(dims) = dims else {
            return Err(ctx.error(
                "problems",
                &format!("template `{entry}` needs `dims` to expand"),
            ));
        };
        for &dim in dims {
            let id = format!("{entry}-d{dim}-s{problem_seed}");
            ProblemSpec::parse(&id).map_err(|e| ctx.error("dims", &e.to_string()))?;
            ids.push(id);
        }
    }
    Ok(ids)
}

struct Ctx<'a> {
    text: &'a str,
    path: &'a Path,
}

impl Ctx<'_> {
    fn error(&self, key: &str, message: &str) -> Error {
        Error::Spec {
            path: self.path.to_path_buf(),
            line: line_of_key(self.text, key),
            key: key.to_string(),
            message: message.to_string(),
        }
    }

    fn unknown(&self, key: &str, valid: &[&str]) -> Error {
        let message = match suggest(key, valid) {
            Some(s) => format!("unknown key; did you mean `{s}`?"),
            None => format!("unknown key; valid keys are {}", valid.join(", ")),
        };
        self.error(key, &message)
    }

    fn string(&self, key: &str, v: &Value) -> Result<String> {
        v.as_str()
            .map(str::to_string)
            .ok_or_else(|| self.error(key, "expected a string"))
    }

    fn string_list(&self, key: &str, v: &Value) -> Result<Vec<String>> {
        let items = v.as_array().ok_or_else(|| self.error(key, "expected a list"))?;
        items.iter().map(|item| self.string(key, item)).collect()
    }

    fn u64(&self, key: &str, v: &Value) -> Result<u64> {
        v.as_integer()
            .and_then(|i| u64::try_from(i).ok())
            .ok_or_else(|| self.error(key, "expected a non-negative integer"))
    }

    fn int_list(&self, key: &str, v: &Value) -> Result<Vec<u64>> {
        let items = v.as_array().ok_or_else(|| self.error(key, "expected a list"))?;
        items.iter().map(|item| self.u64(key, item)).collect()
    }

    fn opt_u64(&self, table: &Table, key: &str) -> Result<Option<u64>> {
        table.get(key).map(|v| self.u64(key, v)).transpose()
    }

    fn opt_f64(&self, table: &Table, key: &str) -> Result<Option<f64>> {
        table
            .get(key)
            .map(|v| match v {
                Value::Float(f) => Ok(*f),
                Value::Integer(i) => Ok(*i as f64),
                _ => Err(self.error(key, "expected a number")),
            })
            .transpose()
    }

    fn opt_scaled(&self, table: &Table, key: &str) -> Result<Option<Scaled>> {
        table
            .get(key)
            .map(|v| match v {
                Value::String(s) => s.parse().map_err(|e: Error| self.error(key, &e.to_string())),
                other => self.u64(key, other).map(|n| Scaled::Absolute(n as usize)),
            })
            .transpose()
    }

    fn opt_kind(&self, table: &Table, key: &str) -> Result<Option<OptimizerKind>> {
        table
            .get(key)
            .map(|v| {
                self.string(key, v)?
                    .parse()
                    .map_err(|e: Error| self.error(key, &e.to_string()))
            })
            .transpose()
    }

    fn overrides(&self, table: &Table) -> Result<Overrides> {
        Ok(Overrides {
            optimizer: self.opt_kind(table, "optimizer")?,
            population: self.opt_u64(table, "NP")?.map(|n| n as usize),
            simplified_dim: self.opt_scaled(table, "d_s")?,
            transfer_interval: self.opt_u64(table, "G_t")?,
            reconstruction_interval: self.opt_u64(table, "G_r")?,
            to_original: self.opt_scaled(table, "Q")?,
            to_simplified: self.opt_scaled(table, "P")?,
            archive_capacity: self.opt_scaled(table, "A_size")?,
            max_fes: self.opt_u64(table, "max_FEs")?,
            de_f: self.opt_f64(table, "F")?,
            de_cr: self.opt_f64(table, "CR")?,
            llso_levels: self.opt_u64(table, "NL")?.map(|n| n as usize),
            llso_phi: self.opt_f64(table, "phi")?,
            dedup_tol: self.opt_f64(table, "dedup_tol")?,
            simplified_optimizer: self.opt_kind(table, "simplified_optimizer")?,
        })
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// First line assigning `key`, or 0 when the key does not appear literally.
fn line_of_key(text: &str, key: &str) -> usize {
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim_start();
        let rest = trimmed
            .strip_prefix(key)
            .or_else(|| trimmed.strip_prefix(&format!("\"{key}\"")));
        if let Some(rest) = rest {
            if rest.trim_start().starts_with('=') {
                return i + 1;
            }
        }
        if trimmed.starts_with(&format!("[[{key}]]")) {
            return i + 1;
        }
    }
    0
}

fn nth_line_starting(text: &str, prefix: &str, n: usize) -> Option<usize> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| l.trim_start().starts_with(prefix))
        .nth(n)
        .map(|(i, _)| i + 1)
}

fn normalize(key: &str) -> String {
    key.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Closest valid key: same letters ignoring case and punctuation, then the
/// longest valid key the input starts with, then edit distance at most 2.
pub fn suggest<'a>(key: &str, valid: &[&'a str]) -> Option<&'a str> {
    let norm = normalize(key);
    if let Some(v) = valid.iter().find(|v| normalize(v) == norm) {
        return Some(v);
    }
    let prefixed = valid
        .iter()
        .filter(|v| {
            let nv = normalize(v);
            nv.len() >= 2 && norm.starts_with(&nv)
        })
        .max_by_key(|v| normalize(v).len());
    if let Some(v) = prefixed {
        return Some(v);
    }
    valid
        .iter()
        .map(|v| (edit_distance(&norm, &normalize(v)), *v))
        .filter(|(d, _)| *d <= 2)
        .min_by_key(|(d, _)| *d)
        .map(|(_, v)| v)
}

fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != *cb);
            cur[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

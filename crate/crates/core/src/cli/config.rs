//! Experiment configuration: JSON file merged over defaults, then flag
//! overrides, then typed deserialization and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::limits::{GridSpec, QuadOptions};
use crate::models::{CiModel, NoiseFamily, NoiseLaw};
use crate::norming::ErvParams;
use crate::stats::{default_levels, validate_levels, MIN_PERMUTATIONS};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelBlock,
    pub run: RunBlock,
    pub analysis: AnalysisBlock,
    pub io: IoBlock,
    pub data: DataBlock,
    pub chi: ChiBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub erv1: ErvParams,
    pub erv2: ErvParams,
    pub noise1: NoiseLaw,
    pub noise2: NoiseLaw,
    pub perturbation: f64,
    pub comonotone_control: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub t: f64,
    pub t_list: Option<Vec<f64>>,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisBlock {
    /// Empirical quantile levels of the factorization statistic.
    pub levels: Vec<f64>,
    /// Permutation replicates.
    pub b: usize,
    pub quad: QuadOptions,
    /// Levels whose limit-marginal quantiles form the comparison grid.
    pub grid_levels: Vec<f64>,
    /// Explicit surface grid for `limit-h`; defaults to the quantile grid.
    pub x1_grid: Option<Vec<f64>>,
    pub x2_grid: Option<Vec<f64>>,
    pub thresholds: Thresholds,
}

/// Verdict thresholds. A verdict is reported only when its threshold is set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Tests reject independence at `p <= significance`.
    pub significance: Option<f64>,
    pub delta_max: Option<f64>,
    pub ks_max: Option<f64>,
    pub ecdf_max: Option<f64>,
    /// Gaps above this count as non-zero.
    pub gap_tol: Option<f64>,
    pub chi_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoBlock {
    pub out: PathBuf,
    pub formats: Vec<OutputFormat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataBlock {
    pub path: Option<PathBuf>,
    pub conditioning_column: String,
    pub value_columns: [String; 2],
    pub delimiter: String,
    pub p_t: f64,
    pub family: NoiseFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Synthetic {
    /// Draw from the configured model at `t = 1`.
    Model,
    Independent,
    Comonotone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChiBlock {
    pub levels: Vec<f64>,
    pub synthetic: Synthetic,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let erv = ErvParams { a: 1.0, rho: 0.5, kappa: 1.0 };
        let noise = NoiseLaw::standard(NoiseFamily::Gaussian);
        Self {
            schema_version: SCHEMA_VERSION,
            model: ModelBlock {
                erv1: erv,
                erv2: erv,
                noise1: noise,
                noise2: noise,
                perturbation: 0.0,
                comonotone_control: false,
            },
            run: RunBlock { t: 50.0, t_list: None, n: 100_000, seed: 1 },
            analysis: AnalysisBlock {
                levels: default_levels(),
                b: 999,
                quad: QuadOptions::default(),
                grid_levels: default_levels(),
                x1_grid: None,
                x2_grid: None,
                thresholds: Thresholds::default(),
            },
            io: IoBlock { out: PathBuf::from("out"), formats: vec![OutputFormat::Csv] },
            data: DataBlock {
                path: None,
                conditioning_column: "x0".into(),
                value_columns: ["x1".into(), "x2".into()],
                delimiter: ",".into(),
                p_t: 0.95,
                family: NoiseFamily::Gaussian,
            },
            chi: ChiBlock { levels: vec![0.9, 0.99, 0.999], synthetic: Synthetic::Model },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafKind {
    Number,
    Integer,
    Bool,
    Text,
    NumberList,
    TextList,
}

/// One configuration leaf and the flag that sets it.
#[derive(Debug, Clone, Copy)]
pub struct Leaf {
    pub flag: &'static str,
    pub path: &'static str,
    pub kind: LeafKind,
    pub help: &'static str,
}

const fn leaf(flag: &'static str, path: &'static str, kind: LeafKind, help: &'static str) -> Leaf {
    Leaf { flag, path, kind, help }
}

use LeafKind::*;

pub const LEAVES: &[Leaf] = &[
    leaf("schema-version", "schema_version", Integer, "configuration schema version"),
    leaf("erv1-a", "model.erv1.a", Number, "scale coefficient a of coordinate 1"),
    leaf("erv1-rho", "model.erv1.rho", Number, "index rho of coordinate 1"),
    leaf("erv1-kappa", "model.erv1.kappa", Number, "location coefficient kappa of coordinate 1"),
    leaf("erv2-a", "model.erv2.a", Number, "scale coefficient a of coordinate 2"),
    leaf("erv2-rho", "model.erv2.rho", Number, "index rho of coordinate 2"),
    leaf("erv2-kappa", "model.erv2.kappa", Number, "location coefficient kappa of coordinate 2"),
    leaf("noise1-family", "model.noise1.family", Text, "noise family of coordinate 1 (gaussian, gumbel, logistic, uniform)"),
    leaf("noise1-location", "model.noise1.location", Number, "noise location of coordinate 1"),
    leaf("noise1-scale", "model.noise1.scale", Number, "noise scale of coordinate 1"),
    leaf("noise2-family", "model.noise2.family", Text, "noise family of coordinate 2 (gaussian, gumbel, logistic, uniform)"),
    leaf("noise2-location", "model.noise2.location", Number, "noise location of coordinate 2"),
    leaf("noise2-scale", "model.noise2.scale", Number, "noise scale of coordinate 2"),
    leaf("perturbation", "model.perturbation", Number, "location perturbation epsilon (>= 0)"),
    leaf("comonotone-control", "model.comonotone_control", Bool, "negative control: Z2 is the comonotone image of Z1"),
    leaf("t", "run.t", Number, "threshold level t (>= 1)"),
    leaf("t-list", "run.t_list", NumberList, "comma-separated threshold levels for simulate"),
    leaf("n", "run.n", Integer, "number of exceedances"),
    leaf("seed", "run.seed", Integer, "random seed"),
    leaf("levels", "analysis.levels", NumberList, "quantile levels of the factorization statistic"),
    leaf("b", "analysis.b", Integer, "permutation replicates"),
    leaf("abs-tol", "analysis.quad.abs_tol", Number, "quadrature absolute tolerance"),
    leaf("max-depth", "analysis.quad.max_depth", Integer, "quadrature bisection depth limit"),
    leaf("base-nodes", "analysis.quad.base_nodes", Integer, "initial quadrature panels"),
    leaf("grid-levels", "analysis.grid_levels", NumberList, "levels of the limit-quantile comparison grid"),
    leaf("x1-grid", "analysis.x1_grid", NumberList, "explicit x1 grid for limit-h"),
    leaf("x2-grid", "analysis.x2_grid", NumberList, "explicit x2 grid for limit-h"),
    leaf("significance", "analysis.thresholds.significance", Number, "rejection level of independence tests"),
    leaf("delta-max", "analysis.thresholds.delta_max", Number, "verdict bound on the factorization statistic"),
    leaf("ks-max", "analysis.thresholds.ks_max", Number, "verdict bound on marginal KS distances"),
    leaf("ecdf-max", "analysis.thresholds.ecdf_max", Number, "verdict bound on sup |ECDF - H|"),
    leaf("gap-tol", "analysis.thresholds.gap_tol", Number, "gaps above this count as non-zero"),
    leaf("chi-tol", "analysis.thresholds.chi_tol", Number, "verdict tolerance for synthetic chi references"),
    leaf("out", "io.out", Text, "output directory"),
    leaf("formats", "io.formats", TextList, "sample formats: csv, binary"),
    leaf("data-path", "data.path", Text, "input CSV for diagnose"),
    leaf("conditioning-column", "data.conditioning_column", Text, "name of the conditioning column"),
    leaf("value-columns", "data.value_columns", TextList, "names of the two response columns"),
    leaf("delimiter", "data.delimiter", Text, "CSV delimiter (one character)"),
    leaf("p-t", "data.p_t", Number, "threshold level on the uniform scale"),
    leaf("family", "data.family", Text, "working noise family of the fit"),
    leaf("chi-levels", "chi.levels", NumberList, "levels p of the chi ladder"),
    leaf("synthetic", "chi.synthetic", Text, "chi source: model, independent, comonotone"),
];

/// Raised while assembling or validating a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn cfg_err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl ExperimentConfig {
    /// Defaults, overlaid by the file (if any), overlaid by `overrides`
    /// (`(leaf, raw value)` pairs).
    pub fn assemble(file: Option<&Path>, overrides: &[(Leaf, String)]) -> Result<Self, ConfigError> {
        let mut value = serde_json::to_value(Self::default()).expect("defaults serialize");
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| cfg_err(format!("cannot read config {}: {e}", path.display())))?;
            let user: Value = serde_json::from_str(&text)
                .map_err(|e| cfg_err(format!("config {} is not valid JSON: {e}", path.display())))?;
            if !user.is_object() {
                return Err(cfg_err("config must be a JSON object"));
            }
            merge(&mut value, user);
        }
        for (leaf, raw) in overrides {
            set_path(&mut value, leaf.path, leaf_value(leaf.kind, raw));
        }
        let cfg: Self = serde_path_to_error::deserialize(value)
            .map_err(|e| cfg_err(format!("invalid config at `{}`: {}", e.path(), e.inner())))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(cfg_err(format!(
                "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn model(&self) -> Result<CiModel, ConfigError> {
        let m = &self.model;
        let model = CiModel::new(m.erv1, m.erv2, m.noise1, m.noise2)
            .and_then(|c| c.with_perturbation(m.perturbation))
            .map_err(|e| cfg_err(format!("model: {e}")))?;
        Ok(model.with_comonotone_control(m.comonotone_control))
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec { levels: self.analysis.grid_levels.clone() }
    }

    pub fn delimiter(&self) -> Result<u8, ConfigError> {
        match self.data.delimiter.as_bytes() {
            [b] => Ok(*b),
            _ => Err(cfg_err(format!("data.delimiter must be a single byte, got {:?}", self.data.delimiter))),
        }
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Every precondition that can be checked without touching data.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let field = |path: &str, r: crate::Result<()>| r.map_err(|e| cfg_err(format!("{path}: {e}")));
        self.model()?;
        let run = &self.run;
        if !(run.t.is_finite() && run.t >= 1.0) {
            return Err(cfg_err(format!("run.t: threshold must be finite and >= 1, got {}", run.t)));
        }
        if let Some(list) = &run.t_list {
            if list.is_empty() {
                return Err(cfg_err("run.t_list: must not be empty"));
            }
            if let Some(bad) = list.iter().find(|t| !(t.is_finite() && **t >= 1.0)) {
                return Err(cfg_err(format!("run.t_list: threshold must be finite and >= 1, got {bad}")));
            }
        }
        if run.n < 1 {
            return Err(cfg_err("run.n: must be >= 1"));
        }
        let a = &self.analysis;
        field("analysis.levels", validate_levels(&a.levels))?;
        if a.b < MIN_PERMUTATIONS {
            return Err(cfg_err(format!("analysis.b: must be >= {MIN_PERMUTATIONS}, got {}", a.b)));
        }
        field("analysis.quad", a.quad.validate())?;
        field("analysis.grid_levels", validate_levels(&a.grid_levels))?;
        for (name, grid) in [("analysis.x1_grid", &a.x1_grid), ("analysis.x2_grid", &a.x2_grid)] {
            if let Some(g) = grid {
                if g.is_empty() || g.iter().any(|x| x.is_nan()) || g.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(cfg_err(format!("{name}: must be non-empty and strictly increasing")));
                }
            }
        }
        let th = &a.thresholds;
        for (name, v) in [
            ("significance", th.significance),
            ("delta_max", th.delta_max),
            ("ks_max", th.ks_max),
            ("ecdf_max", th.ecdf_max),
            ("gap_tol", th.gap_tol),
            ("chi_tol", th.chi_tol),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(cfg_err(format!("analysis.thresholds.{name}: must be finite and > 0, got {v}")));
                }
            }
        }
        if th.significance.is_some_and(|s| s >= 1.0) {
            return Err(cfg_err("analysis.thresholds.significance: must be < 1"));
        }
        if self.io.formats.is_empty() {
            return Err(cfg_err("io.formats: must not be empty"));
        }
        self.delimiter()?;
        if !(self.data.p_t > 0.0 && self.data.p_t < 1.0) {
            return Err(cfg_err(format!("data.p_t: must lie in (0, 1), got {}", self.data.p_t)));
        }
        field("chi.levels", validate_levels(&self.chi.levels))?;
        Ok(())
    }
}

/// Recursive object merge; non-object values in `over` replace `base`.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn set_path(root: &mut Value, path: &str, v: Value) {
    let mut cur = root;
    for key in path.split('.') {
        if !cur.is_object() {
            *cur = Value::Object(Default::default());
        }
        cur = cur.as_object_mut().expect("object").entry(key).or_insert(Value::Null);
    }
    *cur = v;
}

/// Parses a flag value. Anything that does not parse as the expected kind is
/// passed through as a string so deserialization reports it with its path.
fn leaf_value(kind: LeafKind, raw: &str) -> Value {
    let scalar = |s: &str, numeric: bool| -> Value {
        let s = s.trim();
        if numeric || kind == Bool {
            serde_json::from_str::<Value>(s)
                .ok()
                .filter(|v| v.is_number() || v.is_boolean() || v.is_null())
                .unwrap_or_else(|| Value::String(s.to_owned()))
        } else {
            Value::String(s.to_owned())
        }
    };
    match kind {
        Number | Integer | Bool => scalar(raw, kind != Bool),
        Text => Value::String(raw.to_owned()),
        NumberList | TextList if raw.trim().is_empty() => Value::Array(Vec::new()),
        NumberList => Value::Array(raw.split(',').map(|s| scalar(s, true)).collect()),
        TextList => Value::Array(raw.split(',').map(|s| Value::String(s.trim().to_owned())).collect()),
    }
}

//! Experiment configuration: one JSON document, every field defaulted,
//! unknown keys rejected.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::grid::SpectralGrid;
use crate::nets::{Activation, DeepOnetSpec, MlpSpec};
use crate::train::{Optimizer, TrainConfig};
use crate::tssp::{GaussianPacket, SolveConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    #[default]
    Test1SgdClean,
    Test1SgldClean,
    Test1SgldNoisy,
    Test2,
    Convergence,
    Regularity,
    /// Deterministic potential recovery with the optimizer and noise level
    /// taken verbatim from the config.
    Custom,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::Test1SgdClean => "test1_sgd_clean",
            Problem::Test1SgldClean => "test1_sgld_clean",
            Problem::Test1SgldNoisy => "test1_sgld_noisy",
            Problem::Test2 => "test2",
            Problem::Convergence => "convergence",
            Problem::Regularity => "regularity",
            Problem::Custom => "custom",
        }
    }

    pub fn is_test1(self) -> bool {
        matches!(self, Problem::Test1SgdClean | Problem::Test1SgldClean | Problem::Test1SgldNoisy | Problem::Custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "M")]
    pub m: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { a: -std::f64::consts::FRAC_PI_2, b: std::f64::consts::FRAC_PI_2, m: 1000 }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<SpectralGrid> {
        SpectralGrid::new(self.a, self.b, self.m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { hidden: vec![50; 5], activation: Activation::Tanh }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeepOnetConfig {
    /// Number of branch/trunk features.
    pub features: usize,
    pub branch_hidden: Vec<usize>,
    pub trunk_hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for DeepOnetConfig {
    fn default() -> Self {
        Self { features: 50, branch_hidden: vec![100, 100], trunk_hidden: vec![100, 100], activation: Activation::Tanh }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub mlp: MlpConfig,
    pub deeponet: DeepOnetConfig,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self { mlp: MlpConfig::default(), deeponet: DeepOnetConfig::default() }
    }
}

impl NetConfig {
    pub fn mlp_spec(&self) -> MlpSpec {
        MlpSpec::new(&self.mlp.hidden, self.mlp.activation)
    }

    pub fn deeponet_spec(&self, sensors: usize) -> DeepOnetSpec {
        let d = &self.deeponet;
        let mut s = DeepOnetSpec::new(sensors, d.features, &d.branch_hidden, &d.trunk_hidden);
        s.activation = d.activation;
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Test2Config {
    /// Evaluation points per node; `None` means the full grid.
    pub m_eval: Option<usize>,
    /// Held-out values of `z` for the generalization check.
    pub test_z: Vec<f64>,
    /// Nodes whose potential curves are reported.
    pub display_nodes: Vec<usize>,
}

impl Default for Test2Config {
    fn default() -> Self {
        Self { m_eval: None, test_z: vec![0.0976, -0.57315], display_nodes: vec![4, 5, 6, 7] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergencePotential {
    #[default]
    Harmonic,
    /// Constant potential with a single Fourier mode as initial data.
    ConstantPlaneWave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub steps: Vec<usize>,
    /// Reference solve uses `refine * max(steps)` steps.
    pub refine: usize,
    pub potential: ConvergencePotential,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self { steps: vec![100, 200, 400, 800], refine: 8, potential: ConvergencePotential::Harmonic }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularityPotential {
    #[default]
    Stochastic,
    /// `x^2` with no dependence on `z`.
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularityConfig {
    pub eps_list: Vec<f64>,
    pub dz: f64,
    /// Initial packet for the sensitivity study. A centred packet at rest
    /// hides the leading `1/eps` growth, so the default moves it.
    pub initial: GaussianPacket,
    pub potential: RegularityPotential,
}

impl Default for RegularityConfig {
    fn default() -> Self {
        Self {
            eps_list: vec![0.5, 0.25, 0.125],
            dz: 1e-3,
            initial: GaussianPacket { delta: 0.4, x0: 0.7, p0: 0.5 },
            potential: RegularityPotential::Stochastic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardPotential {
    #[default]
    Quadratic,
    Stochastic,
    Constant,
}

/// Potential used by the plain `solve` verb.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForwardConfig {
    pub potential: ForwardPotential,
    /// `z` for the stochastic potential.
    pub z: f64,
    /// Value of the constant potential.
    pub value: f64,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        Self { potential: ForwardPotential::Quadratic, z: 0.0, value: 0.0 }
    }
}

impl ForwardConfig {
    pub fn potential_fn(&self) -> impl Fn(f64) -> f64 + '_ {
        move |x| match self.potential {
            ForwardPotential::Quadratic => crate::data::potential_quadratic(x),
            ForwardPotential::Stochastic => crate::data::potential_stochastic(x, self.z),
            ForwardPotential::Constant => self.value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub grid: GridConfig,
    pub solve: SolveConfig,
    pub initial: GaussianPacket,
    pub sensors: usize,
    pub sigma: f64,
    /// Gauss-Legendre nodes in `z`.
    pub quadrature: usize,
    pub net: NetConfig,
    pub train: TrainConfig,
    /// Floor for the likelihood noise level when the data are clean.
    pub clean_likelihood_sigma: f64,
    pub test2: Test2Config,
    pub convergence: ConvergenceConfig,
    pub regularity: RegularityConfig,
    pub forward: ForwardConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: Problem::default(),
            grid: GridConfig::default(),
            solve: SolveConfig::default(),
            initial: GaussianPacket::default(),
            sensors: 50,
            sigma: 0.05,
            quadrature: 8,
            net: NetConfig::default(),
            train: TrainConfig::default(),
            clean_likelihood_sigma: 0.005,
            test2: Test2Config::default(),
            convergence: ConvergenceConfig::default(),
            regularity: RegularityConfig::default(),
            forward: ForwardConfig::default(),
            output_dir: PathBuf::from("runs"),
            seed: 0,
        }
    }
}

fn config_error(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

/// Parses a JSON document into a config with defaults applied.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| config_error(".", e.to_string()))?;
    config_from_value(value)
}

pub fn config_from_value(value: Value) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        config_error(path, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `key=value` with a dotted key. The value is read as JSON when it
/// parses, otherwise as a string.
pub fn parse_override(spec: &str) -> Result<(String, Value)> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| config_error(spec, "override must look like key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(config_error(key, "empty path segment"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

/// Sets `root[a][b]... = value`, creating objects along the way.
pub fn apply_override(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let segs: Vec<&str> = key.split('.').collect();
    for (i, seg) in segs.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| config_error(segs[..i].join("."), "cannot descend into a non-object"))?;
        if i + 1 == segs.len() {
            obj.insert((*seg).to_string(), value);
            return Ok(());
        }
        cur = obj.entry((*seg).to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one segment")
}

/// Loads an optional base document, applies overrides and the seed flag.
pub fn resolve_config(base: Option<&str>, overrides: &[String], seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut root = match base {
        Some(text) => serde_json::from_str(text).map_err(|e| config_error(".", e.to_string()))?,
        None => Value::Object(Default::default()),
    };
    if !root.is_object() {
        return Err(config_error(".", "config must be a JSON object"));
    }
    for o in overrides {
        let (k, v) = parse_override(o)?;
        apply_override(&mut root, &k, v)?;
    }
    if let Some(s) = seed {
        apply_override(&mut root, "seed", Value::from(s))?;
    }
    config_from_value(root)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let wrap = |path: &str, e: Error| match e {
            Error::InvalidArgument(m) => config_error(path, m),
            other => other,
        };
        let grid = self.grid.build().map_err(|e| wrap("grid", e))?;
        self.solve.validate().map_err(|e| wrap("solve", e))?;
        if self.sensors == 0 || self.sensors > grid.len() {
            return Err(config_error("sensors", format!("must lie in 1..={}", grid.len())));
        }
        if !(self.sigma >= 0.0) {
            return Err(config_error("sigma", "must be nonnegative"));
        }
        if !(1..=64).contains(&self.quadrature) {
            return Err(config_error("quadrature", "must lie in 1..=64"));
        }
        if !(self.clean_likelihood_sigma > 0.0) {
            return Err(config_error("clean_likelihood_sigma", "must be positive"));
        }
        if !(self.initial.delta > 0.0) {
            return Err(config_error("initial.delta", "must be positive"));
        }
        if let Some(m) = self.test2.m_eval {
            if m == 0 || m > grid.len() {
                return Err(config_error("test2.m_eval", format!("must lie in 1..={}", grid.len())));
            }
        }
        if self.problem == Problem::Test2 && self.test2.display_nodes.iter().any(|&k| k >= self.quadrature) {
            return Err(config_error("test2.display_nodes", "node index beyond the quadrature rule"));
        }
        if self.test2.test_z.iter().any(|z| !(-1.0..=1.0).contains(z)) {
            return Err(config_error("test2.test_z", "values must lie in [-1, 1]"));
        }
        if self.convergence.steps.len() < 2 || self.convergence.steps.contains(&0) || self.convergence.refine < 2 {
            return Err(config_error("convergence", "need at least two positive step counts and refine >= 2"));
        }
        if self.regularity.eps_list.len() < 3 {
            return Err(config_error("regularity.eps_list", "need at least three values"));
        }
        if self.regularity.eps_list.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(config_error("regularity.eps_list", "values must lie in (0, 1]"));
        }
        if !(self.regularity.dz > 0.0 && self.regularity.dz < 0.5) {
            return Err(config_error("regularity.dz", "must lie in (0, 0.5)"));
        }
        Ok(())
    }

    /// Training settings after applying the problem preset and the shared seed.
    pub fn resolved_train(&self) -> TrainConfig {
        let mut t = self.train.clone();
        t.seed = self.seed;
        match self.problem {
            Problem::Test1SgdClean => t.optimizer = Optimizer::Sgd,
            Problem::Test1SgldClean | Problem::Test1SgldNoisy if !t.optimizer.samples() => t.optimizer = Optimizer::Sgld,
            _ => {}
        }
        if t.likelihood_sigma.is_none() {
            let s = self.data_sigma();
            t.likelihood_sigma = Some(if s > 0.0 { s } else { self.clean_likelihood_sigma });
        }
        t
    }

    /// Observation noise after applying the problem preset.
    pub fn data_sigma(&self) -> f64 {
        match self.problem {
            Problem::Test1SgdClean | Problem::Test1SgldClean => 0.0,
            _ => self.sigma,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = parse_config("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.grid.m, 1000);
        assert_eq!((c.grid.a, c.grid.b), (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2));
        assert_eq!((c.solve.steps, c.solve.t_final, c.solve.eps), (640, 0.6, 0.1));
        assert_eq!((c.sensors, c.sigma, c.quadrature, c.seed), (50, 0.05, 8, 0));
    }

    #[test]
    fn small_sensor_variant() {
        let c = parse_config(r#"{"sensors": 20, "sigma": 0.02, "solve": {"T": 1.0}}"#).unwrap();
        assert_eq!((c.sensors, c.sigma, c.solve.t_final), (20, 0.02, 1.0));
        assert_eq!(c.solve.steps, 640);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_config(r#"{"sensorz": 20}"#).unwrap_err();
        assert!(matches!(e, Error::Config { .. }));
        assert!(e.to_string().contains("sensorz"), "{e}");
        let e = parse_config(r#"{"train": {"etta0": 1}}"#).unwrap_err();
        assert!(e.to_string().contains("etta0"), "{e}");
    }

    #[test]
    fn type_mismatch_reports_path() {
        let e = parse_config(r#"{"solve": {"N_t": "many"}}"#).unwrap_err();
        let Error::Config { path, .. } = &e else { panic!("{e}") };
        assert_eq!(path, "solve.N_t");
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(parse_config(r#"{"grid": {"M": 7}}"#).is_err());
        assert!(parse_config(r#"{"sensors": 2000}"#).is_err());
        assert!(parse_config(r#"{"regularity": {"eps_list": [0.5, 0.25]}}"#).is_err());
        assert!(parse_config("[1, 2]").is_err());
    }

    #[test]
    fn dotted_overrides() {
        let c = resolve_config(
            Some(r#"{"grid": {"M": 256}}"#),
            &["solve.N_t=200".into(), "train.optimizer=psgld".into(), "problem=test2".into()],
            Some(7),
        )
        .unwrap();
        assert_eq!((c.grid.m, c.solve.steps, c.seed), (256, 200, 7));
        assert_eq!(c.train.optimizer, Optimizer::Psgld);
        assert_eq!(c.problem, Problem::Test2);
        assert!(resolve_config(None, &["nope".into()], None).is_err());
        assert!(resolve_config(None, &["sigma.x=1".into()], None).is_err());
        assert!(resolve_config(None, &["sensorz=3".into()], None).is_err());
    }

    #[test]
    fn resolved_config_roundtrips() {
        let c = resolve_config(None, &["problem=regularity".into()], Some(3)).unwrap();
        assert_eq!(parse_config(&c.to_json().unwrap()).unwrap(), c);
    }

    #[test]
    fn presets() {
        let mut c = ExperimentConfig { problem: Problem::Test1SgldClean, ..Default::default() };
        assert_eq!(c.data_sigma(), 0.0);
        let t = c.resolved_train();
        assert_eq!(t.optimizer, Optimizer::Sgld);
        assert_eq!(t.likelihood_sigma, Some(c.clean_likelihood_sigma));
        c.problem = Problem::Test1SgldNoisy;
        assert_eq!(c.resolved_train().likelihood_sigma, Some(0.05));
        c.train.optimizer = Optimizer::Psgld;
        assert_eq!(c.resolved_train().optimizer, Optimizer::Psgld);
        c.problem = Problem::Test1SgdClean;
        assert_eq!(c.resolved_train().optimizer, Optimizer::Sgd);
    }
}

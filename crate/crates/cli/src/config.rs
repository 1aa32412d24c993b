//! Run configuration: an INI file with fixed sections, overridable per key.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use han_ddi::espf::{DEFAULT_MAX_SIZE, DEFAULT_THRESHOLD};
use han_ddi::hin::RegistryMode;
use han_ddi::metapath::{builtin_specs, select_specs, MetaPathSpec};
use han_ddi::model::{parse_activation, ModelConfig, Pooling};
use han_ddi::pipeline::FeatureMode;
use han_ddi::tensor::{AdamConfig, Unary};
use han_ddi::train::{Protocol, TrainConfig};
use ini::Ini;

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "32" => Ok(Precision::F32),
            "64" => Ok(Precision::F64),
            other => Err(CliError::config(format!(
                "precision must be 32 or 64, got {other:?}"
            ))),
        }
    }

    pub fn bits(self) -> u8 {
        match self {
            Precision::F32 => 32,
            Precision::F64 => 64,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Paths {
    pub targets: Option<PathBuf>,
    pub side_effects: Option<PathBuf>,
    pub ppi: Option<PathBuf>,
    pub fingerprints: Option<PathBuf>,
    pub smiles: Option<PathBuf>,
    pub ddis: Option<PathBuf>,
    /// Preloaded entity registry; required by strict registry mode.
    pub registry: Option<PathBuf>,
    pub output: PathBuf,
}

/// Effective settings of one command. Relative paths are resolved against
/// the directory of the config file they came from (or the working
/// directory for flags).
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub paths: Paths,
    pub hidden: usize,
    pub heads: usize,
    pub metapath_dim: usize,
    pub slope: f64,
    pub dropout: f64,
    pub activation: Unary,
    pub pooling: Pooling,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub protocol: Protocol,
    pub ratios: [f64; 3],
    pub drug_fraction: f64,
    pub metapaths: Vec<String>,
    pub graph_threshold: u64,
    pub registry_mode: RegistryMode,
    pub features: FeatureMode,
    pub espf_threshold: usize,
    pub espf_max_size: usize,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::new(1);
        let adam = AdamConfig::default();
        let train = TrainConfig::default();
        RunConfig {
            paths: Paths {
                output: PathBuf::from("han-ddi-out"),
                ..Paths::default()
            },
            hidden: model.hidden,
            heads: model.heads,
            metapath_dim: model.metapath_dim,
            slope: model.slope,
            dropout: model.dropout,
            activation: model.activation,
            pooling: model.pooling,
            lr: adam.learning_rate,
            weight_decay: adam.weight_decay,
            epochs: train.epochs,
            patience: train.patience,
            batch_size: train.batch_size,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.epsilon,
            protocol: Protocol::Edges,
            ratios: [0.8, 0.1, 0.1],
            drug_fraction: 0.2,
            metapaths: builtin_specs()
                .iter()
                .map(|s| s.name().to_string())
                .collect(),
            graph_threshold: 1,
            registry_mode: RegistryMode::Discover,
            features: FeatureMode::Espf,
            espf_threshold: DEFAULT_THRESHOLD,
            espf_max_size: DEFAULT_MAX_SIZE,
            seed: 0,
            precision: Precision::F32,
        }
    }
}

fn number<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::config(format!("{section}.{key}: cannot parse {value:?}")))
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn mode_name(mode: RegistryMode) -> &'static str {
    match mode {
        RegistryMode::Discover => "discover",
        RegistryMode::Strict => "strict",
    }
}

impl RunConfig {
    /// Applies one `section.key = value` setting.
    pub fn set(
        &mut self,
        section: &str,
        key: &str,
        value: &str,
        base: &Path,
    ) -> Result<(), CliError> {
        self.set_inner(section, key, value.trim(), base)
            .map_err(|e| match e {
                CliError::Core(e) => CliError::config(format!("{section}.{key}: {e}")),
                other => other,
            })
    }

    fn set_inner(
        &mut self,
        section: &str,
        key: &str,
        value: &str,
        base: &Path,
    ) -> Result<(), CliError> {
        let path = || Some(base.join(value));
        let n = |v: &str| number::<f64>(section, key, v);
        match (section, key) {
            ("paths", "targets") => self.paths.targets = path(),
            ("paths", "side_effects") => self.paths.side_effects = path(),
            ("paths", "ppi") => self.paths.ppi = path(),
            ("paths", "fingerprints") => self.paths.fingerprints = path(),
            ("paths", "smiles") => self.paths.smiles = path(),
            ("paths", "ddis") => self.paths.ddis = path(),
            ("paths", "registry") => self.paths.registry = path(),
            ("paths", "output") => self.paths.output = base.join(value),
            ("model", "hidden") => self.hidden = number(section, key, value)?,
            ("model", "heads") => self.heads = number(section, key, value)?,
            ("model", "metapath_dim") => self.metapath_dim = number(section, key, value)?,
            ("model", "slope") => self.slope = n(value)?,
            ("model", "dropout") => self.dropout = n(value)?,
            ("model", "activation") => self.activation = parse_activation(value)?,
            ("model", "metapath_pooling") => self.pooling = value.parse()?,
            ("train", "lr") => self.lr = n(value)?,
            ("train", "weight_decay") => self.weight_decay = n(value)?,
            ("train", "epochs") => self.epochs = number(section, key, value)?,
            ("train", "patience") => self.patience = number(section, key, value)?,
            ("train", "batch_size") => self.batch_size = number(section, key, value)?,
            ("train", "beta1") => self.beta1 = n(value)?,
            ("train", "beta2") => self.beta2 = n(value)?,
            ("train", "eps") => self.eps = n(value)?,
            ("split", "protocol") => self.protocol = value.parse()?,
            ("split", "ratios") => {
                let parts = list(value);
                let parsed: Vec<f64> = parts.iter().map(|p| n(p)).collect::<Result<_, _>>()?;
                self.ratios = parsed.try_into().map_err(|_| {
                    CliError::config(format!("split.ratios needs three values, got {value:?}"))
                })?;
            }
            ("split", "drug_fraction") => self.drug_fraction = n(value)?,
            ("graph", "metapaths") => {
                let names = list(value);
                select_specs(&names)?;
                self.metapaths = names;
            }
            ("graph", "threshold") => self.graph_threshold = number(section, key, value)?,
            ("graph", "registry_mode") => {
                self.registry_mode = match value {
                    "discover" => RegistryMode::Discover,
                    "strict" => RegistryMode::Strict,
                    other => {
                        return Err(CliError::config(format!(
                            "graph.registry_mode must be discover or strict, got {other:?}"
                        )))
                    }
                }
            }
            ("features", "mode") => self.features = value.parse()?,
            ("features", "threshold") => self.espf_threshold = number(section, key, value)?,
            ("features", "max_size") => self.espf_max_size = number(section, key, value)?,
            ("run", "seed") => self.seed = number(section, key, value)?,
            ("run", "precision") => self.precision = Precision::parse(value)?,
            _ => return Err(CliError::config(format!("unknown setting {section}.{key}"))),
        }
        Ok(())
    }

    /// Applies every setting of an INI document. Keys outside a section are
    /// rejected.
    pub fn apply_ini(&mut self, text: &str, base: &Path) -> Result<(), CliError> {
        let ini = Ini::load_from_str(text)
            .map_err(|e| CliError::config(format!("config syntax: {e}")))?;
        for (section, props) in ini.iter() {
            for (key, value) in props.iter() {
                let Some(section) = section else {
                    return Err(CliError::config(format!(
                        "setting {key:?} outside any section"
                    )));
                };
                self.set(section, key, value, base)?;
            }
        }
        Ok(())
    }

    /// Applies a `section.key=value` override.
    pub fn apply_assignment(&mut self, assignment: &str, base: &Path) -> Result<(), CliError> {
        let bad = || CliError::config(format!("expected section.key=value, got {assignment:?}"));
        let (lhs, value) = assignment.split_once('=').ok_or_else(bad)?;
        let (section, key) = lhs.trim().split_once('.').ok_or_else(bad)?;
        self.set(section, key, value, base)
    }

    pub fn specs(&self) -> Result<Vec<MetaPathSpec>, CliError> {
        Ok(select_specs(&self.metapaths)?)
    }

    pub fn model_config(&self, input_dim: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            hidden: self.hidden,
            heads: self.heads,
            metapath_dim: self.metapath_dim,
            slope: self.slope,
            dropout: self.dropout,
            activation: self.activation,
            pooling: self.pooling,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            adam: AdamConfig {
                learning_rate: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.eps,
                weight_decay: self.weight_decay,
            },
            seed: self.seed,
        }
    }

    /// The effective configuration as an INI document that
    /// [`RunConfig::apply_ini`] reads back to an equal value.
    pub fn echo(&self) -> String {
        let p = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let mut out = String::new();
        let mut section = |name: &str, rows: Vec<(&str, String)>| {
            let _ = writeln!(out, "[{name}]");
            for (k, v) in rows {
                if !v.is_empty() {
                    let _ = writeln!(out, "{k} = {v}");
                }
            }
            out.push('\n');
        };
        section(
            "paths",
            vec![
                ("targets", p(&self.paths.targets)),
                ("side_effects", p(&self.paths.side_effects)),
                ("ppi", p(&self.paths.ppi)),
                ("fingerprints", p(&self.paths.fingerprints)),
                ("smiles", p(&self.paths.smiles)),
                ("ddis", p(&self.paths.ddis)),
                ("registry", p(&self.paths.registry)),
                ("output", self.paths.output.display().to_string()),
            ],
        );
        section(
            "model",
            vec![
                ("hidden", self.hidden.to_string()),
                ("heads", self.heads.to_string()),
                ("metapath_dim", self.metapath_dim.to_string()),
                ("slope", self.slope.to_string()),
                ("dropout", self.dropout.to_string()),
                ("activation", self.activation.name().to_string()),
                ("metapath_pooling", self.pooling.to_string()),
            ],
        );
        section(
            "train",
            vec![
                ("lr", self.lr.to_string()),
                ("weight_decay", self.weight_decay.to_string()),
                ("epochs", self.epochs.to_string()),
                ("patience", self.patience.to_string()),
                ("batch_size", self.batch_size.to_string()),
                ("beta1", self.beta1.to_string()),
                ("beta2", self.beta2.to_string()),
                ("eps", self.eps.to_string()),
            ],
        );
        section(
            "split",
            vec![
                ("protocol", self.protocol.to_string()),
                (
                    "ratios",
                    self.ratios
                        .iter()
                        .map(f64::to_string)
                        .collect::<Vec<_>>()
                        .join(","),
                ),
                ("drug_fraction", self.drug_fraction.to_string()),
            ],
        );
        section(
            "graph",
            vec![
                ("metapaths", self.metapaths.join(",")),
                ("threshold", self.graph_threshold.to_string()),
                ("registry_mode", mode_name(self.registry_mode).to_string()),
            ],
        );
        section(
            "features",
            vec![
                ("mode", self.features.to_string()),
                ("threshold", self.espf_threshold.to_string()),
                ("max_size", self.espf_max_size.to_string()),
            ],
        );
        section(
            "run",
            vec![
                ("seed", self.seed.to_string()),
                ("precision", self.precision.bits().to_string()),
            ],
        );
        out.pop();
        out
    }
}

//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated. Every key has a default; [`ExperimentConfig::to_text`]
//! writes the fully resolved set, which parses back to an equal value.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `architecture` | `vgg-mini` | `vgg-mini` or `toyN` |
//! | `dataset` | `cifar10` | `cifar10`, `mnist` or `shapes` (synthetic, CIFAR layout) |
//! | `data_dir` | `data/cifar-10-batches-bin` | directory holding the dataset files |
//! | `train_size` / `test_size` | `5000` / `1000` | leading subset sizes, `0` = everything |
//! | `data_seed` | `0` | generator seed for `shapes` |
//! | `seed` | `0` | model init and batch order |
//! | `lr`, `momentum`, `batch_size`, `steps` | `0.005`, `0.9`, `32`, `470` | training |
//! | `checkpoint_every_epoch` | `false` | |
//! | `method` / `methods` | `functional` / `l1,functional` | prune / compare methods |
//! | `layers` | `last` | `last`, `all` or a list of conv layer ids |
//! | `ratios` | `0.2,0.3,0.5` | pruning ratios in (0, 1) |
//! | `model_wise` | `false` | also sweep every conv layer at a shared ratio |
//! | `k` | `auto` | K-means cluster count, `auto` = ceil(filters / 4) |
//! | `tau_percentile` | `90` | singleton distance percentile |
//! | `contribution_samples` | `256` | training images used for the contribution index |
//! | `am_eta`, `am_iterations`, `am_seed`, `am_init_scale`, `am_normalize` | `0.1`, `256`, `0`, `0.1`, `true` | activation maximization |
//! | `retrain_steps`, `retrain_lr`, `retrain_momentum`, `snapshot_interval` | `700`, `0.005`, `0.9`, `100` | retraining |
//! | `grid_filters`, `grid_columns` | `16`, `8` | pattern grids written per snapshot (`0` disables) |
//! | `out_dir` | `out` | output directory |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::am::AmConfig;
use crate::data::{load_cifar10_bin, load_mnist_idx, parse_cifar10_bin, synthetic, Dataset};
use crate::error::{Error, Result};
use crate::model::{Architecture, Model};
use crate::prune::{FunctionalOptions, PruneMethod};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Cifar10,
    Mnist,
    Shapes,
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Cifar10 => "cifar10",
            DatasetKind::Mnist => "mnist",
            DatasetKind::Shapes => "shapes",
        })
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cifar10" => Ok(DatasetKind::Cifar10),
            "mnist" => Ok(DatasetKind::Mnist),
            "shapes" => Ok(DatasetKind::Shapes),
            other => Err(Error::Config(format!("unknown dataset {other:?} (cifar10, mnist, shapes)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSelection {
    /// The last conv layer.
    Last,
    All,
    Ids(Vec<usize>),
}

impl LayerSelection {
    pub fn resolve<T: Scalar>(&self, model: &Model<T>) -> Result<Vec<usize>> {
        let convs = model.conv_layer_ids();
        match self {
            LayerSelection::Last => Ok(convs.last().copied().into_iter().collect()),
            LayerSelection::All => Ok(convs),
            LayerSelection::Ids(ids) => {
                for &id in ids {
                    if !convs.contains(&id) {
                        return Err(Error::Config(format!(
                            "layer {id} is not a conv layer; conv layers are {convs:?}"
                        )));
                    }
                }
                Ok(ids.clone())
            }
        }
    }
}

impl fmt::Display for LayerSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSelection::Last => f.write_str("last"),
            LayerSelection::All => f.write_str("all"),
            LayerSelection::Ids(ids) => f.write_str(&join(ids)),
        }
    }
}

impl FromStr for LayerSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last" => Ok(LayerSelection::Last),
            "all" => Ok(LayerSelection::All),
            _ => Ok(LayerSelection::Ids(parse_list(s, "layers")?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub architecture: Architecture,
    pub dataset: DatasetKind,
    pub data_dir: PathBuf,
    pub train_size: usize,
    pub test_size: usize,
    pub data_seed: u64,
    pub seed: u64,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub steps: u64,
    pub checkpoint_every_epoch: bool,
    pub method: PruneMethod,
    pub methods: Vec<PruneMethod>,
    pub layers: LayerSelection,
    pub ratios: Vec<f64>,
    pub model_wise: bool,
    pub k: Option<usize>,
    pub tau_percentile: f64,
    pub contribution_samples: usize,
    pub am: AmConfig,
    pub retrain_steps: u64,
    pub retrain_lr: f64,
    pub retrain_momentum: f64,
    pub snapshot_interval: u64,
    pub grid_filters: usize,
    pub grid_columns: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            architecture: Architecture::VggMini,
            dataset: DatasetKind::Cifar10,
            data_dir: PathBuf::from("data/cifar-10-batches-bin"),
            train_size: 5000,
            test_size: 1000,
            data_seed: 0,
            seed: 0,
            lr: 0.005,
            momentum: 0.9,
            batch_size: 32,
            steps: 470,
            checkpoint_every_epoch: false,
            method: PruneMethod::Functional,
            methods: vec![PruneMethod::L1, PruneMethod::Functional],
            layers: LayerSelection::Last,
            ratios: vec![0.2, 0.3, 0.5],
            model_wise: false,
            k: None,
            tau_percentile: 90.0,
            contribution_samples: 256,
            am: AmConfig::default(),
            retrain_steps: 700,
            retrain_lr: 0.005,
            retrain_momentum: 0.9,
            snapshot_interval: 100,
            grid_filters: 16,
            grid_columns: 8,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn join<D: fmt::Display>(items: &[D]) -> String {
    items.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_list<T: FromStr>(s: &str, key: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {p:?}"))))
        .collect()
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 32] = [
        "architecture",
        "dataset",
        "data_dir",
        "train_size",
        "test_size",
        "data_seed",
        "seed",
        "lr",
        "momentum",
        "batch_size",
        "steps",
        "checkpoint_every_epoch",
        "method",
        "methods",
        "layers",
        "ratios",
        "model_wise",
        "k",
        "tau_percentile",
        "contribution_samples",
        "am_eta",
        "am_iterations",
        "am_seed",
        "am_init_scale",
        "am_normalize",
        "retrain_steps",
        "retrain_lr",
        "retrain_momentum",
        "snapshot_interval",
        "grid_filters",
        "grid_columns",
        "out_dir",
    ];

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "architecture" => self.architecture = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "dataset" => self.dataset = v.parse()?,
            "data_dir" => self.data_dir = PathBuf::from(v),
            "train_size" => self.train_size = parse(key, v)?,
            "test_size" => self.test_size = parse(key, v)?,
            "data_seed" => self.data_seed = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "momentum" => self.momentum = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "steps" => self.steps = parse(key, v)?,
            "checkpoint_every_epoch" => self.checkpoint_every_epoch = parse(key, v)?,
            "method" => self.method = v.parse()?,
            "methods" => self.methods = parse_list(v, key)?,
            "layers" => self.layers = v.parse()?,
            "ratios" => self.ratios = parse_list(v, key)?,
            "model_wise" => self.model_wise = parse(key, v)?,
            "k" => self.k = if v == "auto" { None } else { Some(parse(key, v)?) },
            "tau_percentile" => self.tau_percentile = parse(key, v)?,
            "contribution_samples" => self.contribution_samples = parse(key, v)?,
            "am_eta" => self.am.eta = parse(key, v)?,
            "am_iterations" => self.am.iterations = parse(key, v)?,
            "am_seed" => self.am.seed = parse(key, v)?,
            "am_init_scale" => self.am.init_scale = parse(key, v)?,
            "am_normalize" => self.am.normalize_grad = parse(key, v)?,
            "retrain_steps" => self.retrain_steps = parse(key, v)?,
            "retrain_lr" => self.retrain_lr = parse(key, v)?,
            "retrain_momentum" => self.retrain_momentum = parse(key, v)?,
            "snapshot_interval" => self.snapshot_interval = parse(key, v)?,
            "grid_filters" => self.grid_filters = parse(key, v)?,
            "grid_columns" => self.grid_columns = parse(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Defaults overridden by the settings in `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {line:?}", n + 1)))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let k = self.k.map_or("auto".to_string(), |k| k.to_string());
        let pairs: Vec<(&str, String)> = vec![
            ("architecture", self.architecture.to_string()),
            ("dataset", self.dataset.to_string()),
            ("data_dir", self.data_dir.display().to_string()),
            ("train_size", self.train_size.to_string()),
            ("test_size", self.test_size.to_string()),
            ("data_seed", self.data_seed.to_string()),
            ("seed", self.seed.to_string()),
            ("lr", self.lr.to_string()),
            ("momentum", self.momentum.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("steps", self.steps.to_string()),
            ("checkpoint_every_epoch", self.checkpoint_every_epoch.to_string()),
            ("method", self.method.to_string()),
            ("methods", join(&self.methods)),
            ("layers", self.layers.to_string()),
            ("ratios", join(&self.ratios)),
            ("model_wise", self.model_wise.to_string()),
            ("k", k),
            ("tau_percentile", self.tau_percentile.to_string()),
            ("contribution_samples", self.contribution_samples.to_string()),
            ("am_eta", self.am.eta.to_string()),
            ("am_iterations", self.am.iterations.to_string()),
            ("am_seed", self.am.seed.to_string()),
            ("am_init_scale", self.am.init_scale.to_string()),
            ("am_normalize", self.am.normalize_grad.to_string()),
            ("retrain_steps", self.retrain_steps.to_string()),
            ("retrain_lr", self.retrain_lr.to_string()),
            ("retrain_momentum", self.retrain_momentum.to_string()),
            ("snapshot_interval", self.snapshot_interval.to_string()),
            ("grid_filters", self.grid_filters.to_string()),
            ("grid_columns", self.grid_columns.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
        ];
        pairs.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.ratios.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return bad(format!("ratios must lie in (0, 1), got {:?}", self.ratios));
        }
        if self.snapshot_interval == 0 {
            return bad("snapshot_interval must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        for (name, lr) in [("lr", self.lr), ("retrain_lr", self.retrain_lr)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("{name} must be > 0, got {lr}"));
            }
        }
        for (name, m) in [("momentum", self.momentum), ("retrain_momentum", self.retrain_momentum)] {
            if !(0.0..1.0).contains(&m) {
                return bad(format!("{name} must lie in [0, 1), got {m}"));
            }
        }
        if !(0.0..=100.0).contains(&self.tau_percentile) {
            return bad(format!("tau_percentile must lie in [0, 100], got {}", self.tau_percentile));
        }
        if self.k == Some(0) {
            return bad("k must be >= 1".into());
        }
        if self.contribution_samples == 0 {
            return bad("contribution_samples must be >= 1".into());
        }
        if self.grid_columns == 0 {
            return bad("grid_columns must be >= 1".into());
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        self.am.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn functional_options(&self) -> FunctionalOptions {
        FunctionalOptions {
            k: self.k,
            seed: self.seed,
            tau_percentile: self.tau_percentile,
        }
    }

    /// Train and test splits, each cut to its configured size.
    pub fn load_datasets<T: Scalar>(&self) -> Result<(Dataset<T>, Dataset<T>)> {
        let dir = &self.data_dir;
        let (train, test) = match self.dataset {
            DatasetKind::Shapes => {
                let n = |size: usize| if size == 0 { 5000 } else { size };
                let tr = synthetic::shapes_cifar_bytes(n(self.train_size), self.data_seed);
                let te = synthetic::shapes_cifar_bytes(n(self.test_size), self.data_seed.wrapping_add(1));
                (
                    parse_cifar10_bin(&tr, Path::new("shapes:train"))?,
                    parse_cifar10_bin(&te, Path::new("shapes:test"))?,
                )
            }
            DatasetKind::Cifar10 | DatasetKind::Mnist if !dir.is_dir() => {
                return Err(Error::Data {
                    path: dir.clone(),
                    reason: "data directory does not exist".into(),
                })
            }
            DatasetKind::Cifar10 => {
                let batches: Vec<PathBuf> = (1..=5)
                    .map(|i| dir.join(format!("data_batch_{i}.bin")))
                    .filter(|p| p.is_file())
                    .collect();
                if batches.is_empty() {
                    return Err(Error::Data {
                        path: dir.join("data_batch_1.bin"),
                        reason: "no CIFAR-10 training batch found".into(),
                    });
                }
                (load_cifar10_bin(&batches)?, load_cifar10_bin(&[dir.join("test_batch.bin")])?)
            }
            DatasetKind::Mnist => (
                load_mnist_idx(dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte"))?,
                load_mnist_idx(dir.join("t10k-images-idx3-ubyte"), dir.join("t10k-labels-idx1-ubyte"))?,
            ),
        };
        let cut = |d: Dataset<T>, n: usize| if n == 0 || n >= d.len() { d } else { d.take(n) };
        Ok((cut(train, self.train_size), cut(test, self.test_size)))
    }
}

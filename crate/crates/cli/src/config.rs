//! Experiment configuration.
//!
//! Values are layered: built-in defaults, then a TOML file, then explicit
//! command-line flags. Relative paths in a file are resolved against the
//! file's directory.
//!
//! ```toml
//! seed = 7
//! output = "runs/a"
//!
//! [dataset]
//! path = "train.csv"
//! format = "csv01"
//!
//! [train]
//! scheme = "rdm"
//! k = 10
//! n_updates = 5000
//! ```

use std::path::{Path, PathBuf};

use rbmlab::data::{self, Format, SynthModes};
use rbmlab::rng::labels;
use rbmlab::{BinaryDataset, RbmError, Result, Scheme, SeedSpec, Split, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output: PathBuf,
    pub dataset: DatasetConfig,
    pub train: TrainSection,
    pub generate: GenerateSection,
    pub metrics: MetricsSection,
    pub ais: AisSection,
    pub analyze: AnalyzeSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output: PathBuf::from("rbmlab-out"),
            dataset: DatasetConfig::default(),
            train: TrainSection::default(),
            generate: GenerateSection::default(),
            metrics: MetricsSection::default(),
            ais: AisSection::default(),
            analyze: AnalyzeSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Csv01,
    Packed,
    Idx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: Option<PathBuf>,
    pub format: FileFormat,
    /// Binarization threshold for IDX input.
    pub threshold: f64,
    pub image_shape: Option<[usize; 2]>,
    pub test_path: Option<PathBuf>,
    /// When set and no test file is given, the rows are split at random.
    pub n_train: Option<usize>,
    /// Used when `path` is absent.
    pub synth: SynthSection,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            path: None,
            format: FileFormat::Csv01,
            threshold: 0.5,
            image_shape: None,
            test_path: None,
            n_train: None,
            synth: SynthSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_visible: usize,
    pub n_modes: usize,
    pub flip_prob: f64,
    pub samples_per_mode: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            n_visible: 32,
            n_modes: 4,
            flip_prob: 0.05,
            samples_per_mode: 250,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub scheme: Scheme,
    pub k: u64,
    pub learning_rate: f64,
    pub minibatch_size: usize,
    pub n_updates: u64,
    pub centered: bool,
    pub n_hidden: usize,
    pub init_weight_scale: f64,
    pub offset_rate: f64,
    pub n_checkpoints: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            scheme: d.scheme,
            k: d.k,
            learning_rate: d.learning_rate,
            minibatch_size: d.minibatch_size,
            n_updates: d.n_updates,
            centered: d.centered,
            n_hidden: d.n_hidden,
            init_weight_scale: d.init_weight_scale,
            offset_rate: d.offset_rate,
            n_checkpoints: d.n_checkpoints,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    Random,
    Dataset,
}

impl InitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InitMode::Random => "random",
            InitMode::Dataset => "dataset",
        }
    }

    pub fn stream(self) -> u64 {
        match self {
            InitMode::Random => 0,
            InitMode::Dataset => 1,
        }
    }
}

impl std::str::FromStr for InitMode {
    type Err = RbmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(InitMode::Random),
            "dataset" => Ok(InitMode::Dataset),
            other => Err(RbmError::Input(format!("unknown init mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSection {
    /// Last generation time of the grid.
    pub horizon: u64,
    /// Number of log-spaced grid points.
    pub n_points: usize,
    pub n_chains: usize,
    /// Chains used for the autocorrelation trajectory.
    pub rho_chains: usize,
}

impl Default for GenerateSection {
    fn default() -> Self {
        Self {
            horizon: 1000,
            n_points: 25,
            n_chains: 1000,
            rho_chains: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub e2: bool,
    pub e3: bool,
    pub psd: bool,
    pub aai: bool,
    pub entropy: bool,
    pub energy: bool,
    pub ll: bool,
    pub n_sites: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            e2: true,
            e3: true,
            psd: true,
            aai: true,
            entropy: true,
            energy: true,
            ll: true,
            n_sites: rbmlab::metrics::DEFAULT_THIRD_ORDER_SITES,
        }
    }
}

impl MetricsSection {
    /// Enables exactly the comma-separated names.
    pub fn only(list: &str) -> Result<Self> {
        let mut m = Self {
            e2: false,
            e3: false,
            psd: false,
            aai: false,
            entropy: false,
            energy: false,
            ll: false,
            ..Self::default()
        };
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let slot = match name {
                "e2" => &mut m.e2,
                "e3" => &mut m.e3,
                "psd" => &mut m.psd,
                "aai" => &mut m.aai,
                "entropy" => &mut m.entropy,
                "energy" => &mut m.energy,
                "ll" => &mut m.ll,
                other => return Err(RbmError::Input(format!("unknown metric '{other}'"))),
            };
            *slot = true;
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AisSection {
    pub n_temperatures: usize,
    pub n_runners: usize,
}

impl Default for AisSection {
    fn default() -> Self {
        Self {
            n_temperatures: 10_000,
            n_runners: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    pub tolerance: f64,
    /// Metric whose curves decide the thermalization time.
    pub metric: String,
    /// Steps discarded before the autocorrelation origin; defaults to
    /// `min(10_000, horizon / 10)`.
    pub discard: Option<u64>,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self {
            tolerance: rbmlab::dynamics::DEFAULT_TOLERANCE,
            metric: "e2".into(),
            discard: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| RbmError::Input(format!("config: {e}")))?;
        if let Some(base) = base {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RbmError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output);
        if let Some(p) = self.dataset.path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.dataset.test_path.as_mut() {
            fix(p);
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            scheme: t.scheme,
            k: t.k,
            learning_rate: t.learning_rate,
            minibatch_size: t.minibatch_size,
            n_updates: t.n_updates,
            centered: t.centered,
            seed: SeedSpec::new(self.seed, 0),
            n_hidden: t.n_hidden,
            init_weight_scale: t.init_weight_scale,
            offset_rate: t.offset_rate,
            n_checkpoints: t.n_checkpoints,
        }
    }

    /// Checks everything that can be checked without loading data.
    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        for p in [&self.dataset.path, &self.dataset.test_path].into_iter().flatten() {
            if !p.is_file() {
                return Err(RbmError::Input(format!("dataset file {} not found", p.display())));
            }
        }
        if self.generate.n_chains == 0 || self.generate.n_points == 0 || self.generate.rho_chains == 0 {
            return Err(RbmError::Input("generation needs chains and grid points".into()));
        }
        if self.ais.n_temperatures < 2 || self.ais.n_runners < 2 {
            return Err(RbmError::Input("AIS needs at least 2 temperatures and 2 runners".into()));
        }
        if !(self.analyze.tolerance > 0.0) {
            return Err(RbmError::Input("tolerance must be positive".into()));
        }
        if let Some([r, c]) = self.dataset.image_shape {
            if r == 0 || c == 0 {
                return Err(RbmError::Input("image shape must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn discard(&self) -> u64 {
        self.analyze
            .discard
            .unwrap_or_else(|| (self.generate.horizon / 10).min(10_000))
    }

    /// Loads (or synthesizes) the training and optional test sets.
    pub fn datasets(&self) -> Result<(BinaryDataset, Option<BinaryDataset>)> {
        let d = &self.dataset;
        let shape = d.image_shape.map(|[r, c]| (r, c));
        let load = |p: &Path| -> Result<BinaryDataset> {
            let format = match d.format {
                FileFormat::Csv01 => Format::Csv01,
                FileFormat::Packed => Format::PackedBits,
                FileFormat::Idx => Format::Idx { threshold: d.threshold },
            };
            let ds = data::load_binary_matrix(p, format)?;
            match shape {
                Some(s) => ds.with_image_shape(Some(s)),
                None => Ok(ds),
            }
        };
        let full = match &d.path {
            Some(p) => load(p)?,
            None => {
                let s = &d.synth;
                let SynthModes { dataset, .. } = data::synth_modes(
                    s.n_visible,
                    s.n_modes,
                    s.flip_prob,
                    s.samples_per_mode,
                    SeedSpec::new(self.seed, 0).derive(labels::SYNTH),
                )?;
                dataset.with_image_shape(shape)?
            }
        };
        if let Some(p) = &d.test_path {
            let test = load(p)?.with_split(Split::Test);
            if test.n_visible() != full.n_visible() {
                return Err(RbmError::Dimension(format!(
                    "test set has {} columns, training set {}",
                    test.n_visible(),
                    full.n_visible()
                )));
            }
            return Ok((full, Some(test)));
        }
        match d.n_train {
            Some(n) => {
                let (train, test) = data::split(&full, n, SeedSpec::new(self.seed, 0).derive(labels::SPLIT))?;
                Ok((train, Some(test)))
            }
            None => Ok((full, None)),
        }
    }

    /// Canonical JSON of the fields that determine training.
    pub fn training_fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct Fp<'a> {
            seed: u64,
            dataset: &'a DatasetConfig,
            train: &'a TrainSection,
        }
        serde_json::to_string(&Fp {
            seed: self.seed,
            dataset: &self.dataset,
            train: &self.train,
        })
        .expect("config serializes")
    }
}

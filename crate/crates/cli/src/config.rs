//! Run configuration, with defaults matching the reference parameter table.

use std::path::{Path, PathBuf};

use hfit::data::{
    box_jenkins_patterns, load_csv, mackey_glass_dataset, plant_dataset, split, ColumnRef, Dataset,
    SplitScheme,
};
use hfit::de::DeConfig;
use hfit::mogp::{MogpConfig, ObjectiveMode};
use hfit::{FisKind, TreeLimits};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, FieldError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpSettings {
    pub pop_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub mating_pool: usize,
    pub tournament_size: usize,
    pub generations: usize,
    pub max_depth: usize,
    pub max_inputs: usize,
    pub p_terminal: f64,
}

impl Default for GpSettings {
    fn default() -> Self {
        Self {
            pop_size: 50,
            crossover_prob: 0.8,
            mutation_prob: 0.2,
            mating_pool: 25,
            tournament_size: 2,
            generations: 500,
            max_depth: 4,
            max_inputs: 4,
            p_terminal: 0.5,
        }
    }
}

fn default_tau() -> f64 {
    30.0
}
fn default_x0() -> f64 {
    1.2
}
fn default_k_start() -> usize {
    124
}
fn default_k_end() -> usize {
    1123
}
fn default_mg_train() -> usize {
    500
}
fn default_plant_n() -> usize {
    200
}
fn default_u() -> ColumnRef {
    ColumnRef::Index(0)
}
fn default_y() -> ColumnRef {
    ColumnRef::Index(1)
}

/// Where the patterns come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// Nonlinear plant driven by a sinusoid; training steps first, then test.
    Plant {
        #[serde(default = "default_plant_n")]
        n_train: usize,
        #[serde(default = "default_plant_n")]
        n_test: usize,
    },
    /// Mackey–Glass lag patterns; the first `n_train` patterns train.
    MackeyGlass {
        #[serde(default = "default_tau")]
        tau: f64,
        #[serde(default = "default_x0")]
        x0: f64,
        #[serde(default = "default_k_start")]
        k_start: usize,
        #[serde(default = "default_k_end")]
        k_end: usize,
        #[serde(default = "default_mg_train")]
        n_train: usize,
        /// Standard deviation of Gaussian noise added to the series.
        #[serde(default)]
        noise_std: f64,
    },
    /// Gas furnace file with input `u` and output `y` columns.
    BoxJenkins {
        path: PathBuf,
        #[serde(default = "default_u")]
        u_column: ColumnRef,
        #[serde(default = "default_y")]
        y_column: ColumnRef,
        #[serde(default)]
        header: bool,
    },
    /// Generic numeric table.
    Csv {
        path: PathBuf,
        /// Empty selects every column except the target.
        #[serde(default)]
        inputs: Vec<ColumnRef>,
        target: ColumnRef,
        #[serde(default)]
        header: bool,
    },
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec::Plant { n_train: 200, n_test: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub fis_kind: FisKind,
    pub mode: ObjectiveMode,
    pub seed: u64,
    pub repetitions: usize,
    /// Structure/parameter alternations per repetition.
    pub rounds: usize,
    pub output: PathBuf,
    pub gp: GpSettings,
    pub de: DeConfig,
    pub data: DataSpec,
    /// Row split for file-based data (generators define their own split).
    pub split: Option<SplitScheme>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            fis_kind: FisKind::Type1,
            mode: ObjectiveMode::Multi,
            seed: 1,
            repetitions: 1,
            rounds: 1,
            output: PathBuf::from("hfit-run"),
            gp: GpSettings::default(),
            de: DeConfig::default(),
            data: DataSpec::default(),
            split: None,
        }
    }
}

/// Training and test rows of one repetition, in original units.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Option<Dataset>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::ConfigSyntax { path: origin.into(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Every failed check, each naming its field.
    pub fn check(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut bad = |field: &str, message: String| {
            errs.push(FieldError { field: field.into(), message });
        };
        if self.repetitions == 0 {
            bad("repetitions", "must be at least 1".into());
        }
        if self.rounds == 0 {
            bad("rounds", "must be at least 1".into());
        }
        let gp = &self.gp;
        if gp.pop_size < 2 {
            bad("gp.pop_size", format!("must be at least 2, got {}", gp.pop_size));
        }
        for (name, p) in [("gp.crossover_prob", gp.crossover_prob), ("gp.mutation_prob", gp.mutation_prob), ("gp.p_terminal", gp.p_terminal)] {
            if !(0.0..=1.0).contains(&p) {
                bad(name, format!("must lie in [0, 1], got {p}"));
            }
        }
        if gp.mating_pool == 0 {
            bad("gp.mating_pool", "must be at least 1".into());
        }
        if gp.tournament_size == 0 {
            bad("gp.tournament_size", "must be at least 1".into());
        }
        if gp.max_depth == 0 {
            bad("gp.max_depth", "must be at least 1".into());
        }
        if gp.max_inputs < 2 {
            bad("gp.max_inputs", format!("must be at least 2, got {}", gp.max_inputs));
        }
        let de = &self.de;
        if de.pop_size < 4 {
            bad("de.pop_size", format!("must be at least 4, got {}", de.pop_size));
        }
        if !(0.0..=2.0).contains(&de.f) {
            bad("de.f", format!("must lie in [0, 2], got {}", de.f));
        }
        if !(0.0..=1.0).contains(&de.cr) {
            bad("de.cr", format!("must lie in [0, 1], got {}", de.cr));
        }
        if !(de.init_spread >= 0.0 && de.init_spread.is_finite()) {
            bad("de.init_spread", format!("must be finite and >= 0, got {}", de.init_spread));
        }
        match &self.data {
            DataSpec::Plant { n_train, n_test } => {
                if *n_train == 0 {
                    bad("data.n_train", "must be at least 1".into());
                }
                if *n_test == 0 {
                    bad("data.n_test", "must be at least 1".into());
                }
            }
            DataSpec::MackeyGlass { tau, k_start, k_end, n_train, noise_std, .. } => {
                if !(*tau > 17.0) {
                    bad("data.tau", format!("must exceed 17, got {tau}"));
                }
                if *k_start < 24 {
                    bad("data.k_start", format!("must be at least 24, got {k_start}"));
                }
                if k_end <= k_start {
                    bad("data.k_end", format!("must exceed k_start ({k_start}), got {k_end}"));
                } else if *n_train == 0 || *n_train > k_end - k_start {
                    bad("data.n_train", format!("must lie in 1..={}, got {n_train}", k_end - k_start));
                }
                if !(*noise_std >= 0.0 && noise_std.is_finite()) {
                    bad("data.noise_std", format!("must be finite and >= 0, got {noise_std}"));
                }
            }
            DataSpec::BoxJenkins { .. } | DataSpec::Csv { .. } => {}
        }
        if self.split.is_some() && matches!(self.data, DataSpec::Plant { .. } | DataSpec::MackeyGlass { .. }) {
            bad("split", "generated datasets define their own split".into());
        }
        if let Some(SplitScheme::KFold(k)) = self.split {
            if k < 2 {
                bad("split", format!("k-fold needs k >= 2, got {k}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(errs))
        }
    }

    /// SHA-256 of the configuration with the output directory left out.
    pub fn hash(&self) -> String {
        let canonical = RunConfig { output: PathBuf::new(), ..self.clone() };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Independent random stream for repetition `rep`.
    pub fn repetition_rng(&self, rep: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(rep as u64);
        rng
    }

    pub fn mogp_config(&self, n_features: usize) -> MogpConfig {
        let limits = TreeLimits { max_depth: self.gp.max_depth, max_inputs: self.gp.max_inputs, n_features };
        let mut cfg = MogpConfig::new(limits, self.fis_kind);
        cfg.pop_size = self.gp.pop_size;
        cfg.crossover_prob = self.gp.crossover_prob;
        cfg.mutation_prob = self.gp.mutation_prob;
        cfg.mating_pool = self.gp.mating_pool;
        cfg.tournament_size = self.gp.tournament_size;
        cfg.generations = self.gp.generations;
        cfg.mode = self.mode;
        cfg.p_terminal = self.gp.p_terminal;
        cfg
    }

    /// Builds the raw dataset and splits it for repetition `rep`. Random
    /// splits and noise draw from `rng`.
    pub fn load_split(&self, rep: usize, rng: &mut dyn RngCore) -> Result<Split> {
        match &self.data {
            DataSpec::Plant { n_train, n_test } => {
                let (train, test) = plant_dataset(*n_train, *n_test)?;
                Ok(Split { train, test: Some(test) })
            }
            DataSpec::MackeyGlass { tau, x0, k_start, k_end, n_train, noise_std } => {
                let all = if *noise_std > 0.0 {
                    mackey_glass_dataset(*tau, *x0, *k_start, *k_end, Some((*noise_std, &mut *rng)))?
                } else {
                    mackey_glass_dataset(*tau, *x0, *k_start, *k_end, None)?
                };
                self.apply_split(all, SplitScheme::Fixed(*n_train), rep, rng)
            }
            DataSpec::BoxJenkins { path, u_column, y_column, header } => {
                let raw = load_csv(path, std::slice::from_ref(u_column), y_column, *header)?;
                let u: Vec<f64> = raw.rows().map(|r| r[0]).collect();
                let all = box_jenkins_patterns(&u, raw.targets())?;
                self.apply_split(all, self.split.unwrap_or(SplitScheme::All), rep, rng)
            }
            DataSpec::Csv { path, inputs, target, header } => {
                let all = load_csv(path, inputs, target, *header)?;
                self.apply_split(all, self.split.unwrap_or(SplitScheme::All), rep, rng)
            }
        }
    }

    fn apply_split(&self, all: Dataset, scheme: SplitScheme, rep: usize, rng: &mut dyn RngCore) -> Result<Split> {
        let parts = split(all.len(), scheme, rng)?;
        let part = &parts[rep % parts.len()];
        let train = all.subset(&part.train);
        let test = (!part.test.is_empty()).then(|| all.subset(&part.test));
        Ok(Split { train, test })
    }
}

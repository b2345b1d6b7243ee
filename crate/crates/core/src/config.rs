//! Flat TOML run configuration. Every key is optional; the defaults are
//! the full-size protocol.
//!
//! ```toml
//! input = "data/fire_archive.csv"
//! out_dir = "out"
//! task = "multiclass"
//! models = ["LR", "LSTM", "GRU"]
//! lw_min = 2
//! lw_max = 8
//! repeats = 10
//! seed = 7
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{CvSpec, ExperimentConfig, Hyperparams};
use crate::firegraph::{GraphParams, DEFAULT_K, DEFAULT_SPATIAL_RADIUS_M, DEFAULT_TEMPORAL_RADIUS_S};
use crate::ingest::{BoundingBox, ParseMode};
use crate::nn::{Activation, ModelKind, RmsPropConfig};
use crate::sequence::{Task, MAX_LW, MIN_LW};
use crate::synth::SynthSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Detection CSV read by `ingest`.
    pub input: Option<PathBuf>,
    /// `lat,lon,elevation` CSV joined onto detections lacking elevation.
    pub elevation: Option<PathBuf>,
    pub elevation_decimals: i32,
    /// Intermediate files; defaults to `out_dir`.
    pub work_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub parse_mode: ParseMode,

    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,

    pub k: usize,
    pub spatial_radius_m: f64,
    pub temporal_radius_s: i64,

    pub task: Task,
    pub models: Vec<ModelKind>,
    pub lw_min: usize,
    pub lw_max: usize,
    pub test_fraction: f64,
    pub folds: usize,
    pub repeats: usize,
    pub identical_repeats: bool,
    pub balance_binary: bool,

    pub hidden: [usize; 2],
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs_lr: usize,
    pub epochs_rnn: usize,
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub activation: Activation,

    pub seed: u64,

    pub synth_fires: usize,
    pub synth_length_min: usize,
    pub synth_length_max: usize,
    pub synth_step_min_m: f64,
    pub synth_step_max_m: f64,
    pub synth_p_stay: f64,
    pub synth_cadence_min_s: i64,
    pub synth_cadence_max_s: i64,
    pub synth_jitter_deg: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let bbox = BoundingBox::SOUTH_AFRICA;
        let hyper = Hyperparams::default();
        let synth = SynthSpec::default();
        Self {
            input: None,
            elevation: None,
            elevation_decimals: 2,
            work_dir: None,
            out_dir: PathBuf::from("out"),
            parse_mode: ParseMode::Strict,
            lat_min: bbox.lat_min,
            lat_max: bbox.lat_max,
            lon_min: bbox.lon_min,
            lon_max: bbox.lon_max,
            k: DEFAULT_K,
            spatial_radius_m: DEFAULT_SPATIAL_RADIUS_M,
            temporal_radius_s: DEFAULT_TEMPORAL_RADIUS_S,
            task: Task::Multiclass,
            models: ModelKind::ALL.to_vec(),
            lw_min: MIN_LW,
            lw_max: MAX_LW,
            test_fraction: 0.3,
            folds: CvSpec::default().folds,
            repeats: 10,
            identical_repeats: false,
            balance_binary: false,
            hidden: hyper.hidden,
            dropout: hyper.dropout,
            batch_size: hyper.batch_size,
            epochs_lr: hyper.epochs_lr,
            epochs_rnn: hyper.epochs_rnn,
            learning_rate: hyper.optimizer.learning_rate,
            rho: hyper.optimizer.rho,
            epsilon: hyper.optimizer.epsilon,
            activation: hyper.activation,
            seed: 0,
            synth_fires: synth.n_fires,
            synth_length_min: synth.length_min,
            synth_length_max: synth.length_max,
            synth_step_min_m: synth.step_min_m,
            synth_step_max_m: synth.step_max_m,
            synth_p_stay: synth.p_stay,
            synth_cadence_min_s: synth.cadence_min_s,
            synth_cadence_max_s: synth.cadence_max_s,
            synth_jitter_deg: synth.bearing_jitter_deg,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn work_dir(&self) -> &Path {
        self.work_dir.as_deref().unwrap_or(&self.out_dir)
    }

    pub fn bbox(&self) -> Result<BoundingBox> {
        BoundingBox::new(self.lat_min, self.lat_max, self.lon_min, self.lon_max)
    }

    pub fn graph_params(&self) -> GraphParams {
        GraphParams {
            k: self.k,
            spatial_radius_m: self.spatial_radius_m,
            temporal_radius_s: self.temporal_radius_s,
        }
    }

    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            hidden: self.hidden,
            dropout: self.dropout,
            batch_size: self.batch_size,
            epochs_lr: self.epochs_lr,
            epochs_rnn: self.epochs_rnn,
            activation: self.activation,
            optimizer: RmsPropConfig {
                learning_rate: self.learning_rate,
                rho: self.rho,
                epsilon: self.epsilon,
            },
        }
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            task: self.task,
            models: self.models.clone(),
            lw_min: self.lw_min,
            lw_max: self.lw_max,
            repeats: self.repeats,
            master_seed: self.seed,
            test_fraction: self.test_fraction,
            cv: CvSpec { folds: self.folds },
            identical_repeats: self.identical_repeats,
            balance_binary: self.balance_binary,
            hyper: self.hyperparams(),
        }
    }

    pub fn synth(&self) -> SynthSpec {
        SynthSpec {
            n_fires: self.synth_fires,
            length_min: self.synth_length_min,
            length_max: self.synth_length_max,
            step_min_m: self.synth_step_min_m,
            step_max_m: self.synth_step_max_m,
            p_stay: self.synth_p_stay,
            cadence_min_s: self.synth_cadence_min_s,
            cadence_max_s: self.synth_cadence_max_s,
            bearing_jitter_deg: self.synth_jitter_deg,
            region: BoundingBox {
                lat_min: self.lat_min,
                lat_max: self.lat_max,
                lon_min: self.lon_min,
                lon_max: self.lon_max,
            },
            seed: self.seed,
            ..SynthSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bbox()?;
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if !(self.spatial_radius_m > 0.0) || self.temporal_radius_s <= 0 {
            return Err(Error::Config("radii must be positive".into()));
        }
        self.experiment().validate()
    }
}

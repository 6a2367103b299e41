//! Experiment configuration: one TOML tree per run.
//!
//! The grammar (all sections optional unless a subcommand needs them):
//!
//! ```toml
//! seed = 7                   # default 0; `--seed` on the CLI overrides
//! output_dir = "out"
//!
//! [plant]                    # required by every subcommand
//! kind = "hydraulic"         # saturation | stop | hydraulic | linear
//! dt = 0.01                  # sample period, seconds
//! candidate_mode = "zoh"     # zoh | euler
//!
//! [plant.saturation]         # when kind = "saturation"
//! gain = 1.0
//! time_constant = 1.0
//! bound = 1.0
//!
//! [plant.stop]               # when kind = "stop"
//! gain = 1.0
//! time_constant = 1.0
//! damping = 0.5
//! bound = 1.0
//! contact_mode = "companion" # companion | strict
//!
//! [plant.hydraulic]          # when kind = "hydraulic"; fields default
//! valve_gain = 1.0           # to HydraulicParams::default()
//! # ... remaining constants; dt/candidate_mode come from [plant]
//!
//! [plant.linear]             # when kind = "linear"
//! b = [0.0, 0.5]
//! a = [-0.9]
//!
//! [signals]                  # excitation grid; omit for the automatic
//! # characteristic_time = 1.0  # grid sized by bisection
//! # [[signals.explicit]]
//! # kind = "sine"
//! # amplitude = 1.0
//! # frequency = 0.2
//! # duration = 15.0
//!
//! [dataset]
//! balance_tolerance = 0.1
//! split_ratio = 0.9
//! format = "imitator_state"  # imitator_state | imitator_delayed | controller_cloning
//! file = "dataset.csv"
//!
//! [imitator]
//! mode = "exact"             # exact | train (CLI flags override)
//! feedback = "state_vector"
//! epochs = 400
//! batch_size = 32
//! learning_rate = 3e-3
//! target_mse = 1e-5
//! file = "imitator.json"
//!
//! [controller]
//! hidden = [24, 8]
//! activation = "leaky_relu"
//! alpha = 0.01
//! horizon = 150
//! batches = 2000
//! batch_size = 16
//! learning_rate = 3e-3
//! init_lo = [-1.0, -25.0, -55.0, -8.0]
//! init_hi = [1.0, 25.0, 55.0, 8.0]
//! init_scale = [0.02, 1.0]
//! file = "controller.json"
//!
//! [lqr]
//! q_diagonal = [1.0, 1.0, 1.0, 1.0]
//! r = 1.0
//! tolerance = 1e-10
//! max_iterations = 500000
//! file = "lqr.json"
//!
//! [evaluate]
//! duration = 8.0
//! reference = 0.0
//! initial_state = [0.0, 0.0, 50.0, 1.0]
//! band = 0.02
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controller::{ControllerSpec, FeatureMode, LossMode, ReferenceGen};
use crate::dataset::{PairFormat, SignalKind, SignalSpec};
use crate::error::{Error, Result};
use crate::imitator::FeedbackMode;
use crate::net::{Activation, AdamConfig, TrainConfig};
use crate::plant::{
    AnyPlant, CandidateMode, ContactMode, HydraulicParams, LinearDifferenceModel, LinearPlant,
    SaturationLink, StopLink,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    Saturation,
    Stop,
    Hydraulic,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationConfig {
    pub gain: f64,
    pub time_constant: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopConfig {
    pub gain: f64,
    pub time_constant: f64,
    pub damping: f64,
    pub bound: f64,
    #[serde(default = "default_contact_mode")]
    pub contact_mode: ContactMode,
}

fn default_contact_mode() -> ContactMode {
    ContactMode::Companion
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    pub kind: PlantKind,
    pub dt: f64,
    #[serde(default = "default_candidate_mode")]
    pub candidate_mode: CandidateMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation: Option<SaturationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hydraulic: Option<HydraulicParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearConfig>,
}

fn default_candidate_mode() -> CandidateMode {
    CandidateMode::Zoh
}

impl PlantConfig {
    pub fn build(&self) -> Result<AnyPlant> {
        match self.kind {
            PlantKind::Saturation => {
                let c = self.saturation.as_ref().ok_or_else(|| {
                    Error::Config("[plant.saturation] section missing".into())
                })?;
                Ok(AnyPlant::Saturation(SaturationLink::new(
                    c.gain,
                    c.time_constant,
                    c.bound,
                    self.dt,
                    self.candidate_mode,
                )?))
            }
            PlantKind::Stop => {
                let c = self
                    .stop
                    .as_ref()
                    .ok_or_else(|| Error::Config("[plant.stop] section missing".into()))?;
                Ok(AnyPlant::Stop(StopLink::new(
                    c.gain,
                    c.time_constant,
                    c.damping,
                    c.bound,
                    self.dt,
                    self.candidate_mode,
                    c.contact_mode,
                )?))
            }
            PlantKind::Hydraulic => {
                let mut params = self.hydraulic.clone().unwrap_or_default();
                params.dt = self.dt;
                params.candidate_mode = self.candidate_mode;
                Ok(AnyPlant::Hydraulic(crate::plant::HydraulicDrive::new(params)?))
            }
            PlantKind::Linear => {
                let c = self
                    .linear
                    .as_ref()
                    .ok_or_else(|| Error::Config("[plant.linear] section missing".into()))?;
                let model = LinearDifferenceModel::new(c.b.clone(), c.a.clone())?;
                Ok(AnyPlant::Linear(LinearPlant::new(model, self.dt)?))
            }
        }
    }

    /// Stable fingerprint of the plant configuration, recorded in
    /// dataset provenance and comparison scenarios.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("plant config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canon.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Dominant lag used to center the automatic excitation grid.
    pub fn characteristic_time(&self) -> f64 {
        match self.kind {
            PlantKind::Saturation => self.saturation.as_ref().map_or(1.0, |c| c.time_constant),
            PlantKind::Stop => self.stop.as_ref().map_or(1.0, |c| c.time_constant),
            PlantKind::Hydraulic => self
                .hydraulic
                .clone()
                .unwrap_or_default()
                .cradle_lag,
            PlantKind::Linear => self.dt.max(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitSignal {
    pub kind: SignalKind,
    pub amplitude: f64,
    pub frequency: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalsConfig {
    /// Overrides the plant's characteristic time for the auto grid.
    pub characteristic_time: Option<f64>,
    /// Explicit grid; when non-empty the automatic sizing is skipped.
    pub explicit: Vec<ExplicitSignal>,
}

impl SignalsConfig {
    pub fn build_grid(&self, plant: &AnyPlant, plant_cfg: &PlantConfig) -> Result<Vec<SignalSpec>> {
        if !self.explicit.is_empty() {
            return Ok(self
                .explicit
                .iter()
                .map(|e| SignalSpec {
                    kind: e.kind,
                    amplitude: e.amplitude,
                    frequency: e.frequency,
                    duration: e.duration,
                    dt: plant_cfg.dt,
                })
                .collect());
        }
        let tau = self
            .characteristic_time
            .unwrap_or_else(|| plant_cfg.characteristic_time());
        crate::dataset::default_grid(plant.as_plant(), tau)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub balance_tolerance: f64,
    pub split_ratio: f64,
    pub format: PairFormat,
    pub file: String,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            balance_tolerance: 0.1,
            split_ratio: 0.9,
            format: PairFormat::ImitatorState,
            file: "dataset.csv".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImitatorMode {
    Exact,
    Train,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImitatorConfig {
    pub mode: ImitatorMode,
    pub feedback: FeedbackMode,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub target_mse: f64,
    pub file: String,
}

impl Default for ImitatorConfig {
    fn default() -> Self {
        ImitatorConfig {
            mode: ImitatorMode::Exact,
            feedback: FeedbackMode::StateVector,
            epochs: 400,
            batch_size: 32,
            learning_rate: 3e-3,
            target_mse: 1e-5,
            file: "imitator.json".into(),
        }
    }
}

impl ImitatorConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            target_mse: self.target_mse,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                ..AdamConfig::default()
            },
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    pub hidden: Vec<usize>,
    pub activation: String,
    pub alpha: f64,
    pub feature_mode: FeatureMode,
    /// Regulated coordinate; defaults to the plant's output index.
    pub regulated: Option<usize>,
    pub feature_scale: Vec<f64>,
    pub horizon: usize,
    pub loss: LossMode,
    pub reference: ReferenceGen,
    pub init_lo: Vec<f64>,
    pub init_hi: Vec<f64>,
    pub init_scale: Option<(f64, f64)>,
    pub batches: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub target_loss: f64,
    pub file: String,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            hidden: vec![24, 8],
            activation: "leaky_relu".into(),
            alpha: 0.01,
            feature_mode: FeatureMode::Regulation,
            regulated: None,
            feature_scale: vec![],
            horizon: 50,
            loss: LossMode::RegulatedOutput,
            reference: ReferenceGen::Constant { value: 0.0 },
            init_lo: vec![],
            init_hi: vec![],
            init_scale: None,
            batches: 1500,
            batch_size: 16,
            learning_rate: 3e-3,
            target_loss: 0.0,
            file: "controller.json".into(),
        }
    }
}

impl ControllerConfig {
    pub fn activation(&self) -> Result<Activation> {
        match self.activation.as_str() {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "leaky_relu" => Ok(Activation::LeakyRelu { alpha: self.alpha }),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }

    pub fn spec(&self, plant: &AnyPlant) -> Result<ControllerSpec> {
        Ok(ControllerSpec {
            state_dim: plant.as_plant().state_dim(),
            regulated: self.regulated.unwrap_or_else(|| plant.output_index()),
            feature_mode: self.feature_mode,
            hidden: self.hidden.clone(),
            hidden_activation: self.activation()?,
            feature_scale: self.feature_scale.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LqrConfig {
    pub q_diagonal: Vec<f64>,
    pub r: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub file: String,
    pub gain_file: String,
}

impl Default for LqrConfig {
    fn default() -> Self {
        LqrConfig {
            q_diagonal: vec![],
            r: 1.0,
            tolerance: 1e-10,
            max_iterations: 500_000,
            file: "lqr.json".into(),
            gain_file: "lqr_gain.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub signal: Option<ExplicitSignal>,
    pub initial_state: Vec<f64>,
    pub file: String,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            signal: None,
            initial_state: vec![],
            file: "trajectory.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateConfig {
    pub duration: f64,
    pub reference: f64,
    pub initial_state: Vec<f64>,
    pub band: f64,
    pub trajectory_file: String,
    pub metrics_file: String,
    /// A trained imitator above this held-out MSE is rejected as a
    /// training stand-in for the controller.
    pub max_imitator_mse: f64,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            duration: 8.0,
            reference: 0.0,
            initial_state: vec![],
            band: 0.02,
            trajectory_file: "evaluation.csv".into(),
            metrics_file: "metrics.json".into(),
            max_imitator_mse: 0.01,
        }
    }
}

/// Root of the configuration tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub plant: PlantConfig,
    #[serde(default)]
    pub signals: SignalsConfig,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub imitator: ImitatorConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub lqr: LqrConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text =
            toml::to_string_pretty(self).map_err(|e| Error::Config(format!("serialize: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// The built-in hydraulic regulation demo: default drive constants,
    /// exact imitator, the non-zero initial state (1 rad, 50 rad/s), and
    /// an LQR with identity weights for comparison.
    pub fn demo_hydraulic() -> Self {
        Config {
            seed: 7,
            output_dir: PathBuf::from("demo_out"),
            plant: PlantConfig {
                kind: PlantKind::Hydraulic,
                dt: 0.01,
                candidate_mode: CandidateMode::Zoh,
                saturation: None,
                stop: None,
                hydraulic: Some(HydraulicParams::default()),
                linear: None,
            },
            signals: SignalsConfig::default(),
            dataset: DatasetConfig::default(),
            imitator: ImitatorConfig::default(),
            controller: ControllerConfig {
                horizon: 150,
                batches: 2000,
                batch_size: 16,
                init_lo: vec![-1.0, -25.0, -55.0, -8.0],
                init_hi: vec![1.0, 25.0, 55.0, 8.0],
                init_scale: Some((0.02, 1.0)),
                feature_scale: vec![1.0, 1.0 / 25.0, 1.0 / 50.0, 1.0 / 8.0],
                ..ControllerConfig::default()
            },
            lqr: LqrConfig::default(),
            simulate: SimulateConfig::default(),
            evaluate: EvaluateConfig {
                duration: 8.0,
                reference: 0.0,
                initial_state: vec![0.0, 0.0, 50.0, 1.0],
                ..EvaluateConfig::default()
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_config_round_trips_through_toml() {
        let cfg = Config::demo_hydraulic();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: Config = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn plant_hash_is_stable_and_sensitive() {
        let cfg = Config::demo_hydraulic();
        let h1 = cfg.plant.hash();
        let h2 = cfg.plant.hash();
        assert_eq!(h1, h2);
        let mut other = cfg.plant.clone();
        other.dt = 0.02;
        assert_ne!(h1, other.hash());
    }

    #[test]
    fn build_each_plant_kind() {
        let sat = PlantConfig {
            kind: PlantKind::Saturation,
            dt: 0.1,
            candidate_mode: CandidateMode::Zoh,
            saturation: Some(SaturationConfig {
                gain: 1.0,
                time_constant: 1.0,
                bound: 1.0,
            }),
            stop: None,
            hydraulic: None,
            linear: None,
        };
        assert!(matches!(sat.build().unwrap(), AnyPlant::Saturation(_)));
        // Missing section is a config error.
        let broken = PlantConfig {
            saturation: None,
            ..sat
        };
        assert!(matches!(broken.build(), Err(Error::Config(_))));
    }

    #[test]
    fn minimal_toml_parses_with_defaults() {
        let text = r#"
[plant]
kind = "stop"
dt = 0.1

[plant.stop]
gain = 1.0
time_constant = 1.0
damping = 0.5
bound = 1.0
"#;
        let cfg: Config = toml::from_str(text).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.plant.candidate_mode, CandidateMode::Zoh);
        assert_eq!(cfg.dataset.split_ratio, 0.9);
        cfg.plant.build().unwrap();
    }
}

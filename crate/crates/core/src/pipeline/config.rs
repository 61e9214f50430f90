use crate::error::{Error, Result};
use crate::motion::MotionProfile;
use crate::nn::{ModelConfig, SliceOptions, TrainOptions};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Everything a run needs besides file paths. Missing keys take defaults;
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Top-level seed for class assignment, motion, splits, init and shuffles.
    pub seed: u64,
    pub input_size: usize,
    pub slices_per_volume: usize,
    pub slice_axis: usize,
    pub crop: bool,
    pub pe_axis: usize,
    /// Ramp width on a 256-line axis; scaled to the actual line count.
    pub ramp_width: usize,
    pub motion: MotionProfile,
    pub conv_channels: [usize; 3],
    pub dense_units: [usize; 5],
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let train = TrainOptions::default();
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            seed: 0,
            input_size: model.input_size,
            slices_per_volume: 14,
            slice_axis: 2,
            crop: false,
            pe_axis: 1,
            ramp_width: 8,
            motion: MotionProfile::default(),
            conv_channels: model.conv_channels,
            dense_units: model.dense_units,
            epochs: train.epochs,
            batch_size: train.batch_size,
            learning_rate: train.lr,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "config schema version {} is not supported",
                self.schema_version
            )));
        }
        if self.slice_axis > 2 || self.pe_axis > 2 {
            return Err(Error::Argument("slice_axis and pe_axis must be 0, 1 or 2".into()));
        }
        if self.slices_per_volume == 0 || self.ramp_width == 0 {
            return Err(Error::Argument("slices_per_volume and ramp_width must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Argument("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Argument("learning_rate must be positive".into()));
        }
        self.motion.validate()?;
        self.model_config().validate()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            input_size: self.input_size,
            conv_channels: self.conv_channels,
            dense_units: self.dense_units,
            seed: self.seed,
        }
    }

    pub fn slice_options(&self) -> SliceOptions {
        SliceOptions {
            axis: self.slice_axis,
            count: Some(self.slices_per_volume),
            crop: self.crop,
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.learning_rate,
            seed: self.seed,
            slices: self.slice_options(),
        }
    }

    /// Ramp width for an axis of `n_lines`, scaled from the 256-line value.
    pub fn ramp_for(&self, n_lines: usize) -> usize {
        let scaled = self.ramp_width as f64 * n_lines as f64 / self.motion.reference_lines;
        (scaled.round() as usize).max(1)
    }
}

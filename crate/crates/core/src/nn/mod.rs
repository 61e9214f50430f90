//! The slice classifier: three valid 3x3 convolutions each followed by ReLU
//! and 2x2 max pooling, then five dense layers (ReLU on all but the logits).
//!
//! All layer math is generic over [`Scalar`] so that the same code runs in
//! `f32` for training and in `f64` for gradient checking.

mod adam;
mod checkpoint;
mod data;
mod layers;
mod model;
mod tensor;
mod train;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint};
pub use data::{
    prepare_slice, resolve, split_dataset, volume_slices, DatasetManifest, ManifestEntry,
    SliceOptions, SliceSet, Split, MANIFEST_SCHEMA_VERSION,
};
pub use layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool2_backward,
    maxpool2_forward, relu, relu_in_place, softmax, softmax_xent, ConvGrads,
};
pub use model::{
    batch_loss, model_backward, model_forward, spatial_sizes, ForwardCache, ModelConfig,
    ModelParams, NUM_CONV, NUM_DENSE,
};
pub(crate) use model::grad_last_conv;
pub use tensor::{Scalar, Tensor4};
pub use train::{
    evaluate_slices, predict_batch, predict_slice, predict_volume, tally, train,
    train_on_slices, EpochMetrics, SlicePrediction, TrainOptions, TrainOutcome, VolumePrediction,
};

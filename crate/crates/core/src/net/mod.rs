//! Temporal convolutional 2D-to-3D lifter written from scratch: dilated
//! convolutions, confidence-aware blocks, backpropagation, Adam, and
//! checkpoints.

pub mod adam;
pub mod caconv;
pub mod checkpoint;
pub mod conv;
pub mod gradcheck;
pub mod model;
pub mod real;
pub mod tensor;
pub mod train;

pub use adam::AdamState;
pub use caconv::{ca_conv_backward, ca_conv_forward, CaConv};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint};
pub use conv::{conv1d_backward, conv1d_forward, Conv, ConvGeom};
pub use gradcheck::{run_gradcheck, GradCheckOptions, GradCheckReport};
pub use model::{build_model, predict_sequence, Geometry, InputMode, Layer, LifterConfig, LifterModel, Padding};
pub use real::Real;
pub use tensor::Tensor;
pub use train::{mpjpe_loss, train, Augmentation, TrainConfig, TrainSequence, TrainingLog};

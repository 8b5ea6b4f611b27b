//! Feed-forward network engine: dense layers with Swish or linear activations,
//! MSE loss with L2 weight penalty, backpropagation, Adam, and a binary model format.

mod adam;
mod gradcheck;
mod io;
mod mlp;
mod scalar;
mod train;

pub use adam::{adam_step, AdamState, TrainConfig};
pub use gradcheck::{gradient_check, GradientCheck};
pub use io::{decode_model, encode_model, load_model, save_model, MAGIC, VERSION};
pub use mlp::{
    chain_specs, count_weights, mse_loss, swish, swish_derivative, Activation, Dense, Gradients,
    LayerSpec, Mlp, Tape,
};
pub use scalar::Scalar;
pub use train::{
    dataset_loss, train, train_with_observer, Dataset, EpochRecord, MemoryDataset, TrainOutcome,
};

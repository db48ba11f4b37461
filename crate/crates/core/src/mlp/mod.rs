//! Softmax multilayer perceptron trained with Adam on mini-batches, written
//! directly against `ndarray`.

pub mod adam;
pub mod model;
pub mod network;
pub mod train;

pub use adam::{adam_step, AdamState};
pub use model::{decode_model, encode_model, fit, load_model, save_model, MlpModel, Prediction};
pub use network::{argmax, batch_loss, init_model, loss_sparse_ce, softmax_rows, Arch, BackwardPass, Dense, Network};
pub use train::{train, TrainConfig, TrainHistory};

//! Small numerical engine: dense layers, batch normalization, ReLU, MSE,
//! exact backpropagation and Adam.

mod layers;
mod loss;
mod matrix;
mod network;
mod optim;

pub use layers::{relu, relu_backward, BatchNorm, BnCache, BnMode, Dense, BN_EPS, BN_MOMENTUM};
pub use loss::{mse_grad, mse_loss};
pub use matrix::Matrix;
pub use network::{Backward, Gradients, Layer, LayerGrad, Network, Tape};
pub use optim::Adam;

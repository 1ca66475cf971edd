//! Dense linear algebra, activations, initializers, loss and optimizer.

pub mod activation;
pub mod adam;
pub mod init;
pub mod loss;
pub mod matrix;
pub mod rng;

pub use activation::{sigmoid, sigmoid_prime, tanh, tanh_prime, Activation};
pub use adam::{adam_update, AdamConfig, AdamState};
pub use init::{glorot_uniform, orthogonal};
pub use loss::{softmax, softmax_cross_entropy};
pub use matrix::{dot, Matrix};
pub use rng::Rng;

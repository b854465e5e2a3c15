//! Dense numerics for the fixed encoder/decoder topology.
//!
//! Everything is generic over [`Real`] so the same forward and backward code
//! runs in 32-bit for training and in 64-bit for finite-difference oracles.

mod adam;
mod gradcheck;
mod linalg;
mod params;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::grad_check;
pub use linalg::{
    affine_backward, affine_backward_into, affine_forward, matmul, relu, relu_backward,
};
pub use params::{Param, ParamStore};
pub use tensor::{Real, Tensor};

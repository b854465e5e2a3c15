//! Loss terms and the assembled WeLa/TCVAE objective.
//!
//! All scalar losses are returned in nats as `f64`. Reconstruction terms
//! sum over dimensions and average over the batch.

mod loss;
mod tc;
mod terms;

pub use loss::{wela_loss, wela_loss_and_grad, Batch, LossBreakdown};
pub use tc::{tc_mws_estimate, tc_mws_grad, TcGrad};
pub use terms::{
    bernoulli_recon, bernoulli_recon_grad, categorical_recon, categorical_recon_grad,
    gaussian_kl, gaussian_kl_grad, log_gaussian, LOG_2PI,
};

//! Encoder and decoder networks shared by the TCVAE baseline (no labels)
//! and WeLa-VAE (labels concatenated to the encoder input, one categorical
//! head per label on the decoder).

mod checkpoint;
mod config;
mod network;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, verify_checkpoint, Checkpoint, CheckpointMeta,
    LossHistorySummary,
};
pub use config::{LayerSpec, ModelConfig};
pub use network::{
    decode, decode_cached, decoder_backward, encode, encode_cached, encoder_backward,
    init_params, reparameterize, DecoderCache, DecoderOutput, EncoderCache, LatentCode,
};

//! The point-cloud-conditioned auto-regressive transformer.
//!
//! `B` multi-modal blocks advance token features (causal self-attention)
//! and point features (local feature aggregation) side by side; from block
//! `ca_skip_blocks + 1` onward the token stream cross-attends to the point
//! features, with sketch-token rows restricted to their step's sketch
//! instance. Two linear heads emit per-position class logits for both token
//! components.

mod infer;
mod knn;
mod model;
mod sga;

pub use infer::DecodeState;
pub use knn::knn_indices;
pub use model::{BoundModel, ForwardInput, ForwardOutput, Model};
pub use sga::{build_sga_mask, SgaMask, SgaRow};

use serde::{Deserialize, Serialize};

use crate::lang::{MAX_TOKENS, VOCAB};

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Multi-modal transformer blocks.
    pub blocks: usize,
    /// Attention heads.
    pub heads: usize,
    /// Latent width.
    pub d_e: usize,
    /// Feed-forward hidden width.
    pub d_ff: usize,
    /// Point-embedding width before the first aggregation.
    pub d_e_p0: usize,
    /// Expected input points.
    pub n_points: usize,
    /// Extra per-point features (3 = normals).
    pub feat_dim: usize,
    /// Neighbors for local feature aggregation (self included).
    pub k_nn: usize,
    pub dropout: f64,
    /// Leading blocks without cross-attention.
    pub ca_skip_blocks: usize,
    /// Apply a normalization after the final feed-forward residual.
    pub post_norm_ffn: bool,
    /// Literal additive negative-infinity input padding mask (ablation).
    pub additive_input_mask: bool,
    pub seed: u64,
}

impl ModelConfig {
    /// Full-scale configuration (the 6M-parameter flagship).
    pub fn full() -> Self {
        Self {
            blocks: 8,
            heads: 8,
            d_e: 128,
            d_ff: 2048,
            d_e_p0: 16,
            n_points: 8192,
            feat_dim: 3,
            k_nn: 4,
            dropout: 0.1,
            ca_skip_blocks: 2,
            post_norm_ffn: false,
            additive_input_mask: false,
            seed: 0,
        }
    }

    /// Desktop-CPU training scale.
    pub fn desk() -> Self {
        Self {
            blocks: 4,
            heads: 4,
            d_e: 48,
            d_ff: 192,
            d_e_p0: 16,
            n_points: 1024,
            feat_dim: 3,
            k_nn: 4,
            dropout: 0.1,
            ca_skip_blocks: 2,
            post_norm_ffn: false,
            additive_input_mask: false,
            seed: 0,
        }
    }

    /// Overfit-16-samples scale for tests and demos.
    pub fn tiny() -> Self {
        Self {
            blocks: 2,
            heads: 2,
            d_e: 32,
            d_ff: 64,
            d_e_p0: 16,
            n_points: 256,
            feat_dim: 3,
            k_nn: 4,
            dropout: 0.0,
            ca_skip_blocks: 1,
            post_norm_ffn: false,
            additive_input_mask: false,
            seed: 0,
        }
    }

    pub fn vocab(&self) -> usize {
        VOCAB
    }

    pub fn n_ts(&self) -> usize {
        MAX_TOKENS
    }

    pub fn head_dim(&self) -> usize {
        self.d_e / self.heads
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.d_e % self.heads != 0 {
            return Err(format!(
                "d_e = {} must be divisible by heads = {}",
                self.d_e, self.heads
            ));
        }
        if self.ca_skip_blocks >= self.blocks {
            return Err(format!(
                "ca_skip_blocks = {} must be below blocks = {}",
                self.ca_skip_blocks, self.blocks
            ));
        }
        if self.k_nn == 0 || self.k_nn > 16 {
            return Err(format!(
                "k_nn = {} out of supported range 1..=16",
                self.k_nn
            ));
        }
        Ok(())
    }

    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", crate::synth::fnv1a(json.as_bytes()))
    }
}

//! Graph encoders and the inner-product decoder.
//!
//! Six encoder architectures over a shared message-passing context:
//! spectral-style convolution (GCN), sampled-neighborhood aggregation
//! (SAGE), sum aggregation with per-layer MLPs (GIN), learned edge
//! attention (GAT), cosine-similarity propagation (AGNN), and a pooling
//! U-net (GraphUNet). All of them produce a node embedding matrix that the
//! decoder turns into edge probabilities via the sigmoid of inner products.

mod checkpoint;
mod context;
mod decoder;
mod encoders;

pub use checkpoint::{load_checkpoint, restore_encoder, save_checkpoint, Checkpoint};
pub use context::{normalize_adjacency, normalize_neighbor_lists, GraphContext};
pub use decoder::{inner_product_decode, pair_logits, reconstruction_loss};
pub use encoders::{top_k_by_score, Encoder, Forwarded};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The encoder family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Gcn,
    Sage,
    Gin,
    Gat,
    Agnn,
    #[serde(rename = "graphunet")]
    GraphUnet,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 6] = [
        EncoderKind::Gcn,
        EncoderKind::Sage,
        EncoderKind::Gin,
        EncoderKind::Gat,
        EncoderKind::Agnn,
        EncoderKind::GraphUnet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Gcn => "gcn",
            EncoderKind::Sage => "sage",
            EncoderKind::Gin => "gin",
            EncoderKind::Gat => "gat",
            EncoderKind::Agnn => "agnn",
            EncoderKind::GraphUnet => "graphunet",
        }
    }
}

impl std::fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(Self::Gcn),
            "sage" | "graphsage" => Ok(Self::Sage),
            "gin" => Ok(Self::Gin),
            "gat" => Ok(Self::Gat),
            "agnn" => Ok(Self::Agnn),
            "graphunet" | "unet" => Ok(Self::GraphUnet),
            other => Err(Error::InvalidArgument(format!(
                "unknown encoder `{other}` (expected gcn, sage, gin, gat, agnn or graphunet)"
            ))),
        }
    }
}

/// Architecture hyperparameters. `for_kind` fills in each architecture's
/// published configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub hidden_dim: usize,
    pub out_dim: usize,
    /// Attention heads (GAT only).
    pub heads: usize,
    pub dropout: f64,
    /// Layer count: convolutions for GCN/SAGE/GIN, propagation steps for
    /// AGNN, pooling levels for GraphUNet.
    pub depth: usize,
    /// Node fraction kept per pooling level (GraphUNet only).
    pub pool_ratio: f64,
    /// Self-loop weight offset (GIN only).
    pub gin_eps: f64,
}

impl EncoderConfig {
    pub fn for_kind(kind: EncoderKind) -> Self {
        let base = Self {
            kind,
            hidden_dim: 32,
            out_dim: 32,
            heads: 1,
            dropout: 0.0,
            depth: 2,
            pool_ratio: 0.5,
            gin_eps: 0.0,
        };
        match kind {
            EncoderKind::Gcn | EncoderKind::Sage => base,
            EncoderKind::Gin => Self { depth: 5, ..base },
            EncoderKind::Gat => Self {
                out_dim: 16,
                heads: 4,
                dropout: 0.6,
                ..base
            },
            EncoderKind::Agnn => Self {
                out_dim: 16,
                ..base
            },
            EncoderKind::GraphUnet => Self {
                out_dim: 16,
                depth: 4,
                dropout: 0.3,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.out_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidArgument("encoder dims must be positive".into()));
        }
        if self.kind == EncoderKind::Gat && self.hidden_dim % self.heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "hidden_dim {} must be divisible by heads {}",
                self.hidden_dim, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument("dropout must be in [0, 1)".into()));
        }
        if self.kind == EncoderKind::GraphUnet && !(0.0 < self.pool_ratio && self.pool_ratio <= 1.0)
        {
            return Err(Error::InvalidArgument("pool_ratio must be in (0, 1]".into()));
        }
        if self.depth == 0 {
            return Err(Error::InvalidArgument("depth must be at least 1".into()));
        }
        Ok(())
    }
}

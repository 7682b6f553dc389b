//! Siamese grid CNN that learns to predict Smatch scores.
//!
//! Each graph is rendered to a [`TokenGrid`](crate::penman::TokenGrid),
//! embedded, and passed through two parallel convolution banks (rectifier,
//! non-overlapping max pool) whose flattened outputs are concatenated. A
//! shared rectifier layer follows. Two heads sit on top:
//!
//! - [`ModelKind::Score`]: both graph encodings are concatenated and fed
//!   through a rectifier layer and a linear regressor squashed by a sigmoid.
//! - [`ModelKind::Vector`]: each encoding is projected to a sigmoid-bounded
//!   vector; similarity is one minus the mean absolute difference.
//!
//! Everything is generic over [`Real`] so the same code trains in `f32` and
//! is gradient-checked in `f64`.

use std::fmt::Debug;

use ndarray::LinalgScalar;
use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod checkpoint;
mod encoder;
pub mod gradcheck;
mod infer;
mod model;
mod params;
pub mod train;

pub use infer::{predict_matrix, Inference, InferenceStats};
pub use model::{batch_gradient, forward_score, forward_vector, loss, loss_distance, loss_score, similarity, PairItem};
pub use params::{init_params, ModelParams, Tensor};
pub use train::{evaluate, train, train_corpus, Adam, EpochLog, GridEncoder, TrainConfig, TrainLog, Trained};

pub trait Real: Float + LinalgScalar + FromPrimitive + ToPrimitive + Send + Sync + Debug + Default + std::iter::Sum + 'static {}

impl Real for f32 {}
impl Real for f64 {}

pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite literal")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Direct pair score regression.
    Score,
    /// Per-graph vectors compared by distance.
    Vector,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "score" => Ok(ModelKind::Score),
            "vector" => Ok(ModelKind::Vector),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

/// One convolution bank: `filters` kernels of `kernel × kernel`, followed
/// by a `pool × pool` max pool with stride `pool`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvBank {
    pub filters: usize,
    pub kernel: usize,
    pub pool: usize,
}

impl ConvBank {
    pub fn pooled_rows(&self, rows: usize) -> usize {
        rows.div_ceil(self.pool)
    }

    pub fn pooled_cols(&self, cols: usize) -> usize {
        cols.div_ceil(self.pool)
    }

    pub fn out_len(&self, rows: usize, cols: usize) -> usize {
        self.filters * self.pooled_rows(rows) * self.pooled_cols(cols)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub vocab_size: usize,
    pub rows: usize,
    pub cols: usize,
    pub embed_dim: usize,
    pub bank_a: ConvBank,
    pub bank_b: ConvBank,
    /// Width of the shared rectifier layer after the encoder.
    pub hidden: usize,
    /// Width of the pair rectifier layer (score head).
    pub pair_hidden: usize,
    /// Length of the graph vector (vector head).
    pub vector_dim: usize,
}

impl ModelConfig {
    /// Full-size model: 60×15 grid, 100-d embeddings, 256 3×3 and 128 5×5
    /// filters with matching pools.
    pub fn standard(kind: ModelKind, vocab_size: usize) -> Self {
        ModelConfig {
            kind,
            vocab_size,
            rows: 60,
            cols: 15,
            embed_dim: 100,
            bank_a: ConvBank { filters: 256, kernel: 3, pool: 3 },
            bank_b: ConvBank { filters: 128, kernel: 5, pool: 5 },
            hidden: 256,
            pair_hidden: 128,
            vector_dim: 128,
        }
    }

    /// Small model for desk-scale training on synthetic pairs.
    pub fn compact(kind: ModelKind, vocab_size: usize) -> Self {
        ModelConfig {
            kind,
            vocab_size,
            rows: 16,
            cols: 12,
            embed_dim: 16,
            bank_a: ConvBank { filters: 16, kernel: 3, pool: 3 },
            bank_b: ConvBank { filters: 8, kernel: 5, pool: 5 },
            hidden: 64,
            pair_hidden: 32,
            vector_dim: 32,
        }
    }

    /// Minimal model for gradient checks: 6×5 grid, 4+4 filters, 8-d
    /// embeddings.
    pub fn tiny(kind: ModelKind, vocab_size: usize) -> Self {
        ModelConfig {
            kind,
            vocab_size,
            rows: 6,
            cols: 5,
            embed_dim: 8,
            bank_a: ConvBank { filters: 4, kernel: 3, pool: 3 },
            bank_b: ConvBank { filters: 4, kernel: 5, pool: 5 },
            hidden: 6,
            pair_hidden: 5,
            vector_dim: 4,
        }
    }

    pub fn feature_len(&self) -> usize {
        self.bank_a.out_len(self.rows, self.cols) + self.bank_b.out_len(self.rows, self.cols)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vocab_size", self.vocab_size),
            ("rows", self.rows),
            ("cols", self.cols),
            ("embed_dim", self.embed_dim),
            ("bank_a.filters", self.bank_a.filters),
            ("bank_b.filters", self.bank_b.filters),
            ("bank_a.pool", self.bank_a.pool),
            ("bank_b.pool", self.bank_b.pool),
            ("hidden", self.hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for (name, b) in [("bank_a", self.bank_a), ("bank_b", self.bank_b)] {
            if b.kernel % 2 == 0 {
                return Err(Error::Config(format!("{name}.kernel must be odd for same padding, got {}", b.kernel)));
            }
        }
        match self.kind {
            ModelKind::Score if self.pair_hidden == 0 => Err(Error::Config("pair_hidden must be positive".into())),
            ModelKind::Vector if self.vector_dim == 0 => Err(Error::Config("vector_dim must be positive".into())),
            _ => Ok(()),
        }
    }
}

/// Graph vector with entries in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(pub Vec<f32>);

impl EmbeddingVector {
    pub fn similarity(&self, other: &EmbeddingVector) -> f32 {
        similarity(&self.0, &other.0)
    }
}

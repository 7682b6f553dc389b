//! Batched inference and pairwise matrices.

use std::sync::atomic::{AtomicUsize, Ordering};

use super::model::{graph_hidden, score_from_hidden, similarity, vector_from_hidden};
use super::{ModelKind, ModelParams};
use crate::error::Result;
use crate::eval::DistanceMatrix;
use crate::par;
use crate::penman::TokenGrid;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InferenceStats {
    /// Graph encoder evaluations.
    pub encoder_calls: usize,
    /// Pair head evaluations (score mode only).
    pub head_calls: usize,
}

/// Read-only inference handle that counts encoder and head evaluations.
pub struct Inference<'a> {
    params: &'a ModelParams<f32>,
    encoder_calls: AtomicUsize,
    head_calls: AtomicUsize,
}

impl<'a> Inference<'a> {
    pub fn new(params: &'a ModelParams<f32>) -> Self {
        Inference { params, encoder_calls: AtomicUsize::new(0), head_calls: AtomicUsize::new(0) }
    }

    pub fn stats(&self) -> InferenceStats {
        InferenceStats {
            encoder_calls: self.encoder_calls.load(Ordering::Relaxed),
            head_calls: self.head_calls.load(Ordering::Relaxed),
        }
    }

    fn hidden(&self, grid: &TokenGrid) -> Result<Vec<f32>> {
        self.encoder_calls.fetch_add(1, Ordering::Relaxed);
        graph_hidden(self.params, grid)
    }

    pub fn vector(&self, grid: &TokenGrid) -> Result<Vec<f32>> {
        self.params.expect_kind(ModelKind::Vector)?;
        Ok(vector_from_hidden(self.params, &self.hidden(grid)?))
    }

    pub fn score(&self, a: &TokenGrid, b: &TokenGrid) -> Result<f32> {
        self.params.expect_kind(ModelKind::Score)?;
        let (ha, hb) = (self.hidden(a)?, self.hidden(b)?);
        self.head_calls.fetch_add(1, Ordering::Relaxed);
        Ok(score_from_hidden(self.params, &ha, &hb))
    }

    /// Pairwise similarity matrix over `grids`.
    ///
    /// Both modes encode each graph once. Vector mode then compares vectors;
    /// score mode runs the pair head on each unordered pair.
    pub fn matrix(&self, grids: &[TokenGrid], mode: ModelKind) -> Result<DistanceMatrix> {
        self.params.expect_kind(mode)?;
        let hidden = par::map(grids, |g| self.hidden(g)).into_iter().collect::<Result<Vec<_>>>()?;
        let n = grids.len();
        let pairs = par::upper_pairs(n);
        let values: Vec<f64> = match mode {
            ModelKind::Vector => {
                let vectors = par::map(&hidden, |h| vector_from_hidden(self.params, h));
                par::map(&pairs, |&(i, j)| similarity(&vectors[i], &vectors[j]) as f64)
            }
            ModelKind::Score => par::map(&pairs, |&(i, j)| {
                self.head_calls.fetch_add(1, Ordering::Relaxed);
                score_from_hidden(self.params, &hidden[i], &hidden[j]) as f64
            }),
        };
        DistanceMatrix::from_upper(n, &values)
    }
}

/// [`Inference::matrix`] with a fresh counter.
pub fn predict_matrix(
    params: &ModelParams<f32>,
    grids: &[TokenGrid],
    mode: ModelKind,
) -> Result<(DistanceMatrix, InferenceStats)> {
    let inf = Inference::new(params);
    let m = inf.matrix(grids, mode)?;
    Ok((m, inf.stats()))
}

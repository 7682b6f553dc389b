//! Featurization, Adam and the training loop.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::infer::Inference;
use super::model::{batch_gradient, PairItem};
use super::{init_params, ModelConfig, ModelKind, ModelParams};
use crate::corpus::{Corpus, PairRecord, Split};
use crate::error::{Error, Result};
use crate::eval::pearson;
use crate::par;
use crate::penman::{render_grid, AmrGraph, TokenGrid, Vocab};
use crate::seed;

/// Renders graphs onto grids with a fixed vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEncoder {
    pub vocab: Vocab,
    pub rows: usize,
    pub cols: usize,
}

impl GridEncoder {
    /// Vocabulary over both graphs of every record.
    pub fn fit(records: &[PairRecord], rows: usize, cols: usize) -> Result<Self> {
        let mut graphs = Vec::with_capacity(records.len() * 2);
        for r in records {
            let (a, b) = r.graphs()?;
            graphs.push(a);
            graphs.push(b);
        }
        Ok(GridEncoder { vocab: Vocab::from_graphs(&graphs), rows, cols })
    }

    pub fn grid(&self, g: &AmrGraph) -> Result<TokenGrid> {
        render_grid(g, &self.vocab, self.rows, self.cols)
    }

    pub fn items(&self, records: &[PairRecord]) -> Result<Vec<PairItem>> {
        par::map(records, |r| {
            let (a, b) = r.graphs()?;
            Ok(PairItem { a: self.grid(&a)?, b: self.grid(&b)?, target: r.f1 })
        })
        .into_iter()
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// `vocab_size` is replaced by the fitted vocabulary size.
    pub model: ModelConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl TrainConfig {
    pub fn new(model: ModelConfig) -> Self {
        TrainConfig { model, epochs: 10, batch_size: 64, learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        let lr_ok = self.learning_rate.is_finite() && self.learning_rate > 0.0;
        if !lr_ok || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("learning rate must be positive and betas in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f32,
    beta1: f32,
    beta2: f32,
    eps: f32,
    step: i32,
    m: ModelParams<f32>,
    v: ModelParams<f32>,
}

impl Adam {
    pub fn new(params: &ModelParams<f32>, cfg: &TrainConfig) -> Self {
        Adam {
            lr: cfg.learning_rate as f32,
            beta1: cfg.beta1 as f32,
            beta2: cfg.beta2 as f32,
            eps: cfg.epsilon as f32,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn step(&mut self, params: &mut ModelParams<f32>, grads: &ModelParams<f32>) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let tensors = params.tensors.iter_mut().zip(&grads.tensors).zip(self.m.tensors.iter_mut().zip(&mut self.v.tensors));
        for ((p, g), (m, v)) in tensors {
            for (((x, &g), m), v) in p.data.iter_mut().zip(&g.data).zip(&mut m.data).zip(&mut v.data) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                *x -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` when the correlation is undefined (constant predictions).
    pub dev_rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
}

impl TrainLog {
    pub fn best_rho(&self) -> Option<f64> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch).and_then(|e| e.dev_rho)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,dev_rho\n");
        for e in &self.epochs {
            let rho = e.dev_rho.map(|r| r.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, rho));
        }
        out
    }
}

/// Trained parameters with the encoder that produced their inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub params: ModelParams<f32>,
    pub encoder: GridEncoder,
}

impl Trained {
    /// Untrained model over `records`' vocabulary.
    pub fn untrained(records: &[PairRecord], model: &ModelConfig, seed: u64) -> Result<Self> {
        let encoder = GridEncoder::fit(records, model.rows, model.cols)?;
        let cfg = ModelConfig { vocab_size: encoder.vocab.len(), ..model.clone() };
        Ok(Trained { params: init_params(&cfg, seed::derive(seed, &[0]))?, encoder })
    }

    pub fn predict(&self, records: &[PairRecord]) -> Result<Vec<f64>> {
        evaluate(&self.params, &self.encoder.items(records)?)
    }
}

/// Model output per item: score head, or vector similarity.
pub fn evaluate(params: &ModelParams<f32>, items: &[PairItem]) -> Result<Vec<f64>> {
    let inf = Inference::new(params);
    par::map(items, |it| match params.cfg.kind {
        ModelKind::Score => inf.score(&it.a, &it.b).map(f64::from),
        ModelKind::Vector => Ok(super::similarity(&inf.vector(&it.a)?, &inf.vector(&it.b)?) as f64),
    })
    .into_iter()
    .collect()
}

fn dev_rho(params: &ModelParams<f32>, dev: &[PairItem]) -> Result<Option<f64>> {
    let preds = evaluate(params, dev)?;
    let gold: Vec<f64> = dev.iter().map(|it| it.target).collect();
    Ok(pearson(&preds, &gold).ok())
}

/// Trains on `train`, selecting the epoch with the best dev correlation.
pub fn train(train: &[PairRecord], dev: &[PairRecord], cfg: &TrainConfig, seed: u64) -> Result<(Trained, TrainLog)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("train split"));
    }
    if dev.is_empty() {
        return Err(Error::Empty("dev split"));
    }
    let Trained { mut params, encoder } = Trained::untrained(train, &cfg.model, seed)?;
    let train_items = encoder.items(train)?;
    let dev_items = encoder.items(dev)?;
    let mut adam = Adam::new(&params, cfg);
    let mut order: Vec<usize> = (0..train_items.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ModelParams<f32>)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut seed::rng(seed::derive(seed, &[1, epoch as u64])));
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<PairItem> = idx.iter().map(|&i| train_items[i].clone()).collect();
            let (loss, grads) = batch_gradient(&params, &batch)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::NonFinite { epoch, batch: b });
            }
            adam.step(&mut params, &grads);
            loss_sum += loss as f64;
            batches += 1;
        }
        let rho = dev_rho(&params, &dev_items)?;
        log.push(EpochLog { epoch, train_loss: loss_sum / batches as f64, dev_rho: rho });
        let score = rho.unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, epoch, params.clone()));
        }
    }
    let (_, best_epoch, best_params) = best.expect("at least one epoch");
    Ok((Trained { params: best_params, encoder }, TrainLog { epochs: log, best_epoch }))
}

/// [`train`] over the train and dev parts of a split corpus.
pub fn train_corpus(corpus: &Corpus, cfg: &TrainConfig, seed: u64) -> Result<(Trained, TrainLog)> {
    if corpus.split.is_none() {
        return Err(Error::Contract("corpus has no train/dev/test split".into()));
    }
    train(&corpus.part(Split::Train), &corpus.part(Split::Dev), cfg, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{gen_synthetic_pairs, SyntheticConfig};

    fn corpus(n: usize, seed: u64) -> Vec<PairRecord> {
        let cfg = SyntheticConfig { max_nodes: 5, max_edits: 4, ..SyntheticConfig::default() };
        gen_synthetic_pairs(n, &cfg, seed).unwrap().records
    }

    fn small(kind: ModelKind) -> TrainConfig {
        let mut model = ModelConfig::tiny(kind, 0);
        model.rows = 10;
        model.cols = 8;
        TrainConfig { epochs: 3, batch_size: 16, ..TrainConfig::new(model) }
    }

    #[test]
    fn training_is_deterministic() {
        let (tr, dev) = (corpus(60, 1), corpus(20, 2));
        for kind in [ModelKind::Score, ModelKind::Vector] {
            let (a, la) = train(&tr, &dev, &small(kind), 5).unwrap();
            let (b, lb) = par::with_workers(1, || train(&tr, &dev, &small(kind), 5).unwrap());
            assert_eq!(la, lb);
            assert_eq!(a.params, b.params);
            assert_eq!(la.epochs.len(), 3);
            assert!(la.epochs.iter().all(|e| e.train_loss.is_finite()));
        }
    }

    #[test]
    fn loss_decreases() {
        let (tr, dev) = (corpus(200, 3), corpus(40, 4));
        let cfg = TrainConfig { epochs: 6, ..small(ModelKind::Vector) };
        let (_, log) = train(&tr, &dev, &cfg, 1).unwrap();
        assert!(log.epochs.last().unwrap().train_loss < log.epochs[0].train_loss, "{log:?}");
    }

    #[test]
    fn rejects_empty_splits() {
        let tr = corpus(10, 1);
        assert!(matches!(train(&tr, &[], &small(ModelKind::Score), 0), Err(Error::Empty(_))));
        assert!(matches!(train(&[], &tr, &small(ModelKind::Score), 0), Err(Error::Empty(_))));
    }

    #[test]
    fn csv_log_layout() {
        let log = TrainLog {
            epochs: vec![EpochLog { epoch: 1, train_loss: 0.5, dev_rho: Some(0.25) }, EpochLog { epoch: 2, train_loss: 0.25, dev_rho: None }],
            best_epoch: 1,
        };
        assert_eq!(log.to_csv(), "epoch,train_loss,dev_rho\n1,0.5,0.25\n2,0.25,\n");
        assert_eq!(log.best_rho(), Some(0.25));
    }
}

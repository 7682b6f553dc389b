use rand::Rng;

use super::{lit, ModelConfig, ModelKind, Real};
use crate::error::{Error, Result};
use crate::seed;

pub(crate) const EMBED: usize = 0;
pub(crate) const CONV_A_W: usize = 1;
pub(crate) const CONV_A_B: usize = 2;
pub(crate) const CONV_B_W: usize = 3;
pub(crate) const CONV_B_B: usize = 4;
pub(crate) const SHARED_W: usize = 5;
pub(crate) const SHARED_B: usize = 6;
/// Pair layer (score) or projection (vector).
pub(crate) const HEAD_W: usize = 7;
pub(crate) const HEAD_B: usize = 8;
/// Score regressor; absent in vector models.
pub(crate) const OUT_W: usize = 9;
pub(crate) const OUT_B: usize = 10;

/// Named dense tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(name: &str, shape: &[usize]) -> Self {
        Tensor { name: name.to_string(), shape: shape.to_vec(), data: vec![T::zero(); shape.iter().product()] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Full parameter set. Tensor order is fixed by the config kind; gradients
/// share the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub cfg: ModelConfig,
    pub tensors: Vec<Tensor<T>>,
}

struct Slot {
    name: &'static str,
    shape: Vec<usize>,
    /// `(fan_in, fan_out)` for weights, `None` for biases.
    fans: Option<(usize, usize)>,
}

fn layout(cfg: &ModelConfig) -> Vec<Slot> {
    let e = cfg.embed_dim;
    let ka = cfg.bank_a.kernel * cfg.bank_a.kernel * e;
    let kb = cfg.bank_b.kernel * cfg.bank_b.kernel * e;
    let (fa, fb) = (cfg.bank_a.filters, cfg.bank_b.filters);
    let feat = cfg.feature_len();
    let h = cfg.hidden;
    let w = |name, rows: usize, cols: usize, fans| Slot { name, shape: vec![rows, cols], fans: Some(fans) };
    let b = |name, n: usize| Slot { name, shape: vec![n], fans: None };
    let mut slots = vec![
        w("embedding", cfg.vocab_size, e, (cfg.vocab_size, e)),
        // Conv fans follow the receptive-field convention.
        w("conv_a.weight", fa, ka, (ka, fa * cfg.bank_a.kernel * cfg.bank_a.kernel)),
        b("conv_a.bias", fa),
        w("conv_b.weight", fb, kb, (kb, fb * cfg.bank_b.kernel * cfg.bank_b.kernel)),
        b("conv_b.bias", fb),
        w("shared.weight", h, feat, (feat, h)),
        b("shared.bias", h),
    ];
    match cfg.kind {
        ModelKind::Score => {
            let p = cfg.pair_hidden;
            slots.push(w("pair.weight", p, 2 * h, (2 * h, p)));
            slots.push(b("pair.bias", p));
            slots.push(w("out.weight", 1, p, (p, 1)));
            slots.push(b("out.bias", 1));
        }
        ModelKind::Vector => {
            let d = cfg.vector_dim;
            slots.push(w("proj.weight", d, h, (h, d)));
            slots.push(b("proj.bias", d));
        }
    }
    slots
}

/// Xavier-uniform weights, zero biases.
pub fn init_params<T: Real>(cfg: &ModelConfig, seed: u64) -> Result<ModelParams<T>> {
    cfg.validate()?;
    let tensors = layout(cfg)
        .into_iter()
        .enumerate()
        .map(|(i, slot)| {
            let mut t = Tensor::zeros(slot.name, &slot.shape);
            if let Some((fan_in, fan_out)) = slot.fans {
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut rng = seed::rng(seed::derive(seed, &[i as u64]));
                for x in &mut t.data {
                    *x = lit(rng.gen_range(-bound..bound));
                }
            }
            t
        })
        .collect();
    Ok(ModelParams { cfg: cfg.clone(), tensors })
}

impl<T: Real> ModelParams<T> {
    pub fn zeros_like(&self) -> Self {
        ModelParams {
            cfg: self.cfg.clone(),
            tensors: self.tensors.iter().map(|t| Tensor::zeros(&t.name, &t.shape)).collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            cfg: self.cfg.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: t.data.iter().map(|x| U::from_f64(x.to_f64().unwrap_or(f64::NAN)).unwrap_or(U::nan())).collect(),
                })
                .collect(),
        }
    }

    /// `self += other`, tensor by tensor.
    pub(crate) fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x = *x + *y;
            }
        }
    }

    pub(crate) fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.cfg.kind != kind {
            return Err(Error::Contract(format!("model is configured for {:?}, not {:?}", self.cfg.kind, kind)));
        }
        Ok(())
    }

    /// Checks tensor names and shapes against the config.
    pub fn check_layout(&self) -> Result<()> {
        let slots = layout(&self.cfg);
        if slots.len() != self.tensors.len() {
            return Err(Error::Config(format!("expected {} tensors, found {}", slots.len(), self.tensors.len())));
        }
        for (slot, t) in slots.iter().zip(&self.tensors) {
            if slot.name != t.name || slot.shape != t.shape || t.data.len() != slot.shape.iter().product::<usize>() {
                return Err(Error::Config(format!("tensor `{}` {:?} does not match `{}` {:?}", t.name, t.shape, slot.name, slot.shape)));
            }
        }
        Ok(())
    }
}

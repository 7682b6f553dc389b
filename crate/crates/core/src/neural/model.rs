//! Heads, losses and the full backward pass.

use super::encoder::{dot, encode, encode_backward, EncodeCache};
use super::params::{HEAD_B, HEAD_W, OUT_B, OUT_W, SHARED_B, SHARED_W};
use super::{lit, ModelKind, ModelParams, Real};
use crate::error::{Error, Result};
use crate::par;
use crate::penman::TokenGrid;

/// One training or evaluation pair with its gold score.
#[derive(Debug, Clone, PartialEq)]
pub struct PairItem {
    pub a: TokenGrid,
    pub b: TokenGrid,
    pub target: f64,
}

/// Examples per gradient buffer. Fixed so the reduction order does not
/// depend on the worker count.
const GRAD_CHUNK: usize = 16;

fn dense<T: Real>(w: &[T], b: &[T], x: &[T]) -> Vec<T> {
    w.chunks_exact(x.len()).zip(b).map(|(row, &bias)| bias + dot(row, x)).collect()
}

fn relu<T: Real>(mut v: Vec<T>) -> Vec<T> {
    for x in &mut v {
        *x = x.max(T::zero());
    }
    v
}

fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// `dw += d ⊗ x`, `db += d`, returns `wᵀ d`.
fn dense_backward<T: Real>(w: &[T], x: &[T], d: &[T], dw: &mut [T], db: &mut [T]) -> Vec<T> {
    let mut dx = vec![T::zero(); x.len()];
    for (((&g, acc), grad_row), row) in d.iter().zip(db.iter_mut()).zip(dw.chunks_exact_mut(x.len())).zip(w.chunks_exact(x.len())) {
        if g == T::zero() {
            continue;
        }
        *acc = *acc + g;
        for ((gw, dxi), (&xi, &wi)) in grad_row.iter_mut().zip(dx.iter_mut()).zip(x.iter().zip(row)) {
            *gw = *gw + g * xi;
            *dxi = *dxi + g * wi;
        }
    }
    dx
}

fn mask<T: Real>(mut d: Vec<T>, act: &[T]) -> Vec<T> {
    for (g, &a) in d.iter_mut().zip(act) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
    d
}

/// One Siamese side: encoder features and the shared rectifier layer.
struct Side<T> {
    feat: Vec<T>,
    enc: EncodeCache<T>,
    hidden: Vec<T>,
}

fn side_forward<T: Real>(p: &ModelParams<T>, grid: &TokenGrid) -> Result<Side<T>> {
    let (feat, enc) = encode(p, grid)?;
    let hidden = relu(dense(&p.tensors[SHARED_W].data, &p.tensors[SHARED_B].data, &feat));
    Ok(Side { feat, enc, hidden })
}

fn side_backward<T: Real>(p: &ModelParams<T>, grid: &TokenGrid, side: &Side<T>, dhidden: Vec<T>, grads: &mut ModelParams<T>) {
    let dz = mask(dhidden, &side.hidden);
    let (gw, gb) = two_mut(&mut grads.tensors, SHARED_W, SHARED_B);
    let dfeat = dense_backward(&p.tensors[SHARED_W].data, &side.feat, &dz, &mut gw.data, &mut gb.data);
    encode_backward(p, grid, &side.enc, &dfeat, grads);
}

fn two_mut<T>(xs: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    debug_assert!(i < j);
    let (lo, hi) = xs.split_at_mut(j);
    (&mut lo[i], &mut hi[0])
}

/// Shared-layer output for one graph; the cacheable half of either head.
pub(crate) fn graph_hidden<T: Real>(p: &ModelParams<T>, grid: &TokenGrid) -> Result<Vec<T>> {
    Ok(side_forward(p, grid)?.hidden)
}

struct ScoreActs<T> {
    joint: Vec<T>,
    pair: Vec<T>,
    score: T,
}

fn score_head<T: Real>(p: &ModelParams<T>, ha: &[T], hb: &[T]) -> ScoreActs<T> {
    let joint: Vec<T> = ha.iter().chain(hb).copied().collect();
    let pair = relu(dense(&p.tensors[HEAD_W].data, &p.tensors[HEAD_B].data, &joint));
    let out = dense(&p.tensors[OUT_W].data, &p.tensors[OUT_B].data, &pair)[0];
    ScoreActs { joint, pair, score: sigmoid(out) }
}

pub(crate) fn score_from_hidden<T: Real>(p: &ModelParams<T>, ha: &[T], hb: &[T]) -> T {
    score_head(p, ha, hb).score
}

pub(crate) fn vector_from_hidden<T: Real>(p: &ModelParams<T>, h: &[T]) -> Vec<T> {
    dense(&p.tensors[HEAD_W].data, &p.tensors[HEAD_B].data, h).into_iter().map(sigmoid).collect()
}

/// Predicted Smatch F1 for a pair, in [0, 1].
pub fn forward_score<T: Real>(p: &ModelParams<T>, a: &TokenGrid, b: &TokenGrid) -> Result<T> {
    p.expect_kind(ModelKind::Score)?;
    let ha = graph_hidden(p, a)?;
    let hb = graph_hidden(p, b)?;
    Ok(score_from_hidden(p, &ha, &hb))
}

/// Graph vector with entries in (0, 1).
pub fn forward_vector<T: Real>(p: &ModelParams<T>, grid: &TokenGrid) -> Result<Vec<T>> {
    p.expect_kind(ModelKind::Vector)?;
    Ok(vector_from_hidden(p, &graph_hidden(p, grid)?))
}

/// One minus the mean absolute difference.
pub fn similarity<T: Real>(u: &[T], v: &[T]) -> T {
    let n = lit::<T>(u.len().max(1) as f64);
    let dist = u.iter().zip(v).map(|(&x, &y)| (x - y).abs()).fold(T::zero(), |a, b| a + b) / n;
    T::one() - dist
}

fn prediction<T: Real>(p: &ModelParams<T>, item: &PairItem) -> Result<T> {
    match p.cfg.kind {
        ModelKind::Score => forward_score(p, &item.a, &item.b),
        ModelKind::Vector => Ok(similarity(&forward_vector(p, &item.a)?, &forward_vector(p, &item.b)?)),
    }
}

fn squared_errors<T: Real>(p: &ModelParams<T>, batch: &[PairItem]) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let errs = par::map(batch, |item| prediction(p, item).map(|y| (y - lit::<T>(item.target)).powi(2)));
    let mut sum = T::zero();
    for e in errs {
        sum = sum + e?;
    }
    Ok(sum)
}

/// Mean squared error of the score head.
pub fn loss_score<T: Real>(p: &ModelParams<T>, batch: &[PairItem]) -> Result<T> {
    p.expect_kind(ModelKind::Score)?;
    Ok(squared_errors(p, batch)? / lit(batch.len() as f64))
}

/// Summed squared error between vector similarity and the gold score.
pub fn loss_distance<T: Real>(p: &ModelParams<T>, batch: &[PairItem]) -> Result<T> {
    p.expect_kind(ModelKind::Vector)?;
    squared_errors(p, batch)
}

/// Training loss for whichever head `p` carries.
pub fn loss<T: Real>(p: &ModelParams<T>, batch: &[PairItem]) -> Result<T> {
    match p.cfg.kind {
        ModelKind::Score => loss_score(p, batch),
        ModelKind::Vector => loss_distance(p, batch),
    }
}

/// Adds `scale · ∂(pred − target)²/∂θ` to `grads`; returns the squared error.
fn item_backward<T: Real>(p: &ModelParams<T>, item: &PairItem, scale: T, grads: &mut ModelParams<T>) -> Result<T> {
    let sa = side_forward(p, &item.a)?;
    let sb = side_forward(p, &item.b)?;
    let target = lit::<T>(item.target);
    let two = lit::<T>(2.0);
    let h = p.cfg.hidden;
    let (dha, dhb, err) = match p.cfg.kind {
        ModelKind::Score => {
            let acts = score_head(p, &sa.hidden, &sb.hidden);
            let s = acts.score;
            let dout = [two * (s - target) * s * (T::one() - s) * scale];
            let (ow, ob) = two_mut(&mut grads.tensors, OUT_W, OUT_B);
            let dpair = dense_backward(&p.tensors[OUT_W].data, &acts.pair, &dout, &mut ow.data, &mut ob.data);
            let dz = mask(dpair, &acts.pair);
            let (hw, hb) = two_mut(&mut grads.tensors, HEAD_W, HEAD_B);
            let djoint = dense_backward(&p.tensors[HEAD_W].data, &acts.joint, &dz, &mut hw.data, &mut hb.data);
            let (da, db) = djoint.split_at(h);
            (da.to_vec(), db.to_vec(), (s - target).powi(2))
        }
        ModelKind::Vector => {
            let va = vector_from_hidden(p, &sa.hidden);
            let vb = vector_from_hidden(p, &sb.hidden);
            let sim = similarity(&va, &vb);
            let dsim = two * (sim - target) * scale;
            let per = dsim / lit(va.len() as f64);
            let mut dza = Vec::with_capacity(va.len());
            let mut dzb = Vec::with_capacity(vb.len());
            for (&x, &y) in va.iter().zip(&vb) {
                // d sim / d x = -sign(x - y) / n; zero on ties.
                let sign = if x > y { T::one() } else if x < y { -T::one() } else { T::zero() };
                dza.push(-per * sign * x * (T::one() - x));
                dzb.push(per * sign * y * (T::one() - y));
            }
            let (hw, hb) = two_mut(&mut grads.tensors, HEAD_W, HEAD_B);
            let da = dense_backward(&p.tensors[HEAD_W].data, &sa.hidden, &dza, &mut hw.data, &mut hb.data);
            let db = dense_backward(&p.tensors[HEAD_W].data, &sb.hidden, &dzb, &mut hw.data, &mut hb.data);
            (da, db, (sim - target).powi(2))
        }
    };
    side_backward(p, &item.a, &sa, dha, grads);
    side_backward(p, &item.b, &sb, dhb, grads);
    Ok(err)
}

/// Loss and its gradient over `batch`. Examples are processed in fixed
/// chunks (parallel when enabled) and reduced in chunk order.
pub fn batch_gradient<T: Real>(p: &ModelParams<T>, batch: &[PairItem]) -> Result<(T, ModelParams<T>)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let scale = match p.cfg.kind {
        ModelKind::Score => T::one() / lit(batch.len() as f64),
        ModelKind::Vector => T::one(),
    };
    let chunks: Vec<&[PairItem]> = batch.chunks(GRAD_CHUNK).collect();
    let parts = par::map(&chunks, |chunk| -> Result<(T, ModelParams<T>)> {
        let mut grads = p.zeros_like();
        let mut err = T::zero();
        for item in *chunk {
            err = err + item_backward(p, item, scale, &mut grads)?;
        }
        Ok((err, grads))
    });
    let mut total = T::zero();
    let mut grads: Option<ModelParams<T>> = None;
    for part in parts {
        let (err, g) = part?;
        total = total + err;
        match grads.as_mut() {
            Some(acc) => acc.add_assign(&g),
            None => grads = Some(g),
        }
    }
    let grads = grads.expect("non-empty batch");
    Ok((total * scale, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{init_params, ModelConfig};

    fn grid(cfg: &crate::neural::ModelConfig, seed: u64) -> TokenGrid {
        let n = cfg.rows * cfg.cols;
        let cells = (0..n).map(|i| ((i as u64 * 5 + seed * 11 + i as u64 / 3) % cfg.vocab_size as u64) as u32).collect();
        TokenGrid { rows: cfg.rows, cols: cfg.cols, cells }
    }

    #[test]
    fn score_is_bounded_and_deterministic() {
        let cfg = ModelConfig::tiny(ModelKind::Score, 20);
        for seed in 0..5 {
            let p: ModelParams<f64> = init_params(&cfg, seed).unwrap();
            let (a, b) = (grid(&cfg, 1), grid(&cfg, 2));
            let s = forward_score(&p, &a, &b).unwrap();
            assert!((0.0..=1.0).contains(&s));
            assert_eq!(s, forward_score(&p, &a, &b).unwrap());
        }
    }

    #[test]
    fn kind_mismatch_is_an_error() {
        let p: ModelParams<f64> = init_params(&ModelConfig::tiny(ModelKind::Score, 20), 0).unwrap();
        let g = grid(&p.cfg, 0);
        assert!(forward_vector(&p, &g).is_err());
        let q: ModelParams<f64> = init_params(&ModelConfig::tiny(ModelKind::Vector, 20), 0).unwrap();
        assert!(forward_score(&q, &g, &g).is_err());
    }

    #[test]
    fn vector_similarity_properties() {
        let p: ModelParams<f64> = init_params(&ModelConfig::tiny(ModelKind::Vector, 20), 0).unwrap();
        let u = forward_vector(&p, &grid(&p.cfg, 1)).unwrap();
        let v = forward_vector(&p, &grid(&p.cfg, 2)).unwrap();
        assert_eq!(u.len(), p.cfg.vector_dim);
        assert!(u.iter().all(|&x| x > 0.0 && x < 1.0));
        assert_eq!(similarity(&u, &u), 1.0);
        assert_eq!(similarity(&u, &v), similarity(&v, &u));
        assert!((0.0..=1.0).contains(&similarity(&u, &v)));
        assert_eq!(similarity(&[0.0, 1.0], &[1.0, 0.0]), 0.0);
    }

    #[test]
    fn loss_arithmetic() {
        let p: ModelParams<f64> = init_params(&ModelConfig::tiny(ModelKind::Score, 20), 0).unwrap();
        let (a, b) = (grid(&p.cfg, 1), grid(&p.cfg, 2));
        let s = forward_score(&p, &a, &b).unwrap();
        let exact = PairItem { a: a.clone(), b: b.clone(), target: s };
        assert_eq!(loss_score(&p, &[exact]).unwrap(), 0.0);
        let off = PairItem { a, b, target: s + 0.3 };
        assert!((loss_score(&p, &[off]).unwrap() - 0.09).abs() < 1e-12);
        assert!(matches!(loss_score(&p, &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn distance_loss_is_summed() {
        let p: ModelParams<f64> = init_params(&ModelConfig::tiny(ModelKind::Vector, 20), 0).unwrap();
        let g = grid(&p.cfg, 3);
        let same = PairItem { a: g.clone(), b: g.clone(), target: 1.0 };
        assert_eq!(loss_distance(&p, std::slice::from_ref(&same)).unwrap(), 0.0);
        let off = PairItem { target: 0.5, ..same };
        let one = loss_distance(&p, std::slice::from_ref(&off)).unwrap();
        assert!((one - 0.25).abs() < 1e-12);
        assert!((loss_distance(&p, &[off.clone(), off]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn batch_gradient_reports_loss() {
        for kind in [ModelKind::Score, ModelKind::Vector] {
            let p: ModelParams<f64> = init_params(&ModelConfig::tiny(kind, 20), 4).unwrap();
            let batch: Vec<_> = (0..40)
                .map(|i| PairItem { a: grid(&p.cfg, i), b: grid(&p.cfg, i + 7), target: (i % 10) as f64 / 10.0 })
                .collect();
            let (l, g) = batch_gradient(&p, &batch).unwrap();
            assert!((l - loss(&p, &batch).unwrap()).abs() < 1e-12);
            assert!(g.is_finite());
            let chunked = par::with_workers(1, || batch_gradient(&p, &batch).unwrap());
            assert_eq!(chunked.1, g);
        }
    }
}

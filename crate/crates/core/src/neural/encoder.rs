//! Embedding, two convolution banks and pooling, with their backward pass.

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};

use super::params::{CONV_A_B, CONV_A_W, CONV_B_B, CONV_B_W, EMBED};

use super::{ConvBank, ModelParams, Real};
use crate::error::{Error, Result};
use crate::penman::TokenGrid;

/// `c = alpha · op(a) · op(b) + beta · c` over row-major slices.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Real>(
    alpha: T,
    a: &[T],
    a_shape: (usize, usize),
    trans_a: bool,
    b: &[T],
    b_shape: (usize, usize),
    trans_b: bool,
    beta: T,
    c: &mut [T],
) {
    let a = ArrayView2::from_shape(a_shape, a).expect("gemm lhs shape");
    let b = ArrayView2::from_shape(b_shape, b).expect("gemm rhs shape");
    let a = if trans_a { a.reversed_axes() } else { a };
    let b = if trans_b { b.reversed_axes() } else { b };
    let mut c = ArrayViewMut2::from_shape((a.nrows(), b.ncols()), c).expect("gemm out shape");
    general_mat_mul(alpha, &a, &b, beta, &mut c);
}

/// Dot product with eight independent accumulators so it vectorizes.
/// Faster than a packed GEMM at these small, narrow shapes.
#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] = acc[i] + x[i] * y[i];
        }
    }
    let mut s = acc.iter().fold(T::zero(), |s, &v| s + v);
    for (&x, &y) in ra.iter().zip(rb) {
        s = s + x * y;
    }
    s
}

/// Activations one bank needs for its backward pass.
pub(crate) struct BankCache<T> {
    /// Unfolded receptive fields, `positions × kernel²·embed`.
    cols: Vec<T>,
    /// Post-rectifier map, `positions × filters`.
    act: Vec<T>,
    /// Winning position per pooled output.
    argmax: Vec<u32>,
}

pub(crate) struct EncodeCache<T> {
    a: BankCache<T>,
    b: BankCache<T>,
}

/// Out-of-grid cells contribute zero vectors; padding cells use embedding row 0.
fn unfold<T: Real>(grid: &TokenGrid, emb: &[T], e: usize, k: usize) -> Vec<T> {
    let (rows, cols) = (grid.rows, grid.cols);
    let width = k * k * e;
    let half = (k / 2) as isize;
    let mut out = vec![T::zero(); rows * cols * width];
    for r in 0..rows {
        for c in 0..cols {
            let base = (r * cols + c) * width;
            for dr in 0..k {
                let rr = r as isize + dr as isize - half;
                if rr < 0 || rr >= rows as isize {
                    continue;
                }
                for dc in 0..k {
                    let cc = c as isize + dc as isize - half;
                    if cc < 0 || cc >= cols as isize {
                        continue;
                    }
                    let tok = grid.get(rr as usize, cc as usize) as usize;
                    let at = base + (dr * k + dc) * e;
                    out[at..at + e].copy_from_slice(&emb[tok * e..(tok + 1) * e]);
                }
            }
        }
    }
    out
}

fn bank_forward<T: Real>(
    grid: &TokenGrid,
    emb: &[T],
    e: usize,
    w: &[T],
    b: &[T],
    bank: ConvBank,
    out: &mut Vec<T>,
) -> BankCache<T> {
    let (rows, cols) = (grid.rows, grid.cols);
    let positions = rows * cols;
    let width = bank.kernel * bank.kernel * e;
    let f = bank.filters;
    let unfolded = unfold(grid, emb, e, bank.kernel);
    let mut act = vec![T::zero(); positions * f];
    for (field, out) in unfolded.chunks_exact(width).zip(act.chunks_exact_mut(f)) {
        for ((z, kernel), &bias) in out.iter_mut().zip(w.chunks_exact(width)).zip(b) {
            *z = (bias + dot(field, kernel)).max(T::zero());
        }
    }

    let (pr, pc) = (bank.pooled_rows(rows), bank.pooled_cols(cols));
    let mut argmax = Vec::with_capacity(pr * pc * f);
    for i in 0..pr {
        for j in 0..pc {
            let r_end = ((i + 1) * bank.pool).min(rows);
            let c_end = ((j + 1) * bank.pool).min(cols);
            for filter in 0..f {
                let mut best_pos = i * bank.pool * cols + j * bank.pool;
                let mut best = act[best_pos * f + filter];
                for r in i * bank.pool..r_end {
                    for c in j * bank.pool..c_end {
                        let pos = r * cols + c;
                        let v = act[pos * f + filter];
                        if v > best {
                            best = v;
                            best_pos = pos;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_pos as u32);
            }
        }
    }
    BankCache { cols: unfolded, act, argmax }
}

fn check_grid<T: Real>(p: &ModelParams<T>, grid: &TokenGrid) -> Result<()> {
    if grid.rows != p.cfg.rows || grid.cols != p.cfg.cols || grid.cells.len() != grid.rows * grid.cols {
        return Err(Error::Contract(format!(
            "grid is {}x{}, model expects {}x{}",
            grid.rows, grid.cols, p.cfg.rows, p.cfg.cols
        )));
    }
    if let Some(&bad) = grid.cells.iter().find(|&&t| t as usize >= p.cfg.vocab_size) {
        return Err(Error::Contract(format!("token id {bad} outside vocabulary of {}", p.cfg.vocab_size)));
    }
    Ok(())
}

/// Feature vector of length `cfg.feature_len()` plus the backward cache.
pub(crate) fn encode<T: Real>(p: &ModelParams<T>, grid: &TokenGrid) -> Result<(Vec<T>, EncodeCache<T>)> {
    check_grid(p, grid)?;
    let cfg = &p.cfg;
    let t = &p.tensors;
    let emb = &t[EMBED].data;
    let mut feat = Vec::with_capacity(cfg.feature_len());
    let a = bank_forward(grid, emb, cfg.embed_dim, &t[CONV_A_W].data, &t[CONV_A_B].data, cfg.bank_a, &mut feat);
    let b = bank_forward(grid, emb, cfg.embed_dim, &t[CONV_B_W].data, &t[CONV_B_B].data, cfg.bank_b, &mut feat);
    Ok((feat, EncodeCache { a, b }))
}

#[allow(clippy::too_many_arguments)]
fn bank_backward<T: Real>(
    grid: &TokenGrid,
    e: usize,
    w: &[T],
    bank: ConvBank,
    cache: &BankCache<T>,
    dpooled: &[T],
    dw: &mut [T],
    db: &mut [T],
    demb: &mut [T],
) {
    let (rows, cols) = (grid.rows, grid.cols);
    let positions = rows * cols;
    let width = bank.kernel * bank.kernel * e;
    let f = bank.filters;

    let mut dact = vec![T::zero(); positions * f];
    for (o, (&pos, &g)) in cache.argmax.iter().zip(dpooled).enumerate() {
        let idx = pos as usize * f + o % f;
        dact[idx] = dact[idx] + g;
    }
    for (d, &a) in dact.iter_mut().zip(&cache.act) {
        if a <= T::zero() {
            *d = T::zero();
        }
    }
    for row in dact.chunks(f) {
        for (acc, &g) in db.iter_mut().zip(row) {
            *acc = *acc + g;
        }
    }
    gemm(T::one(), &dact, (positions, f), true, &cache.cols, (positions, width), false, T::one(), dw);

    let mut dcols = vec![T::zero(); positions * width];
    gemm(T::one(), &dact, (positions, f), false, w, (f, width), false, T::zero(), &mut dcols);
    let k = bank.kernel;
    let half = (k / 2) as isize;
    for r in 0..rows {
        for c in 0..cols {
            let base = (r * cols + c) * width;
            for dr in 0..k {
                let rr = r as isize + dr as isize - half;
                if rr < 0 || rr >= rows as isize {
                    continue;
                }
                for dc in 0..k {
                    let cc = c as isize + dc as isize - half;
                    if cc < 0 || cc >= cols as isize {
                        continue;
                    }
                    let tok = grid.get(rr as usize, cc as usize) as usize;
                    let at = base + (dr * k + dc) * e;
                    for (acc, &g) in demb[tok * e..(tok + 1) * e].iter_mut().zip(&dcols[at..at + e]) {
                        *acc = *acc + g;
                    }
                }
            }
        }
    }
}

/// Accumulates encoder gradients for `dfeat` into `grads`.
pub(crate) fn encode_backward<T: Real>(
    p: &ModelParams<T>,
    grid: &TokenGrid,
    cache: &EncodeCache<T>,
    dfeat: &[T],
    grads: &mut ModelParams<T>,
) {
    let cfg = &p.cfg;
    let split = cfg.bank_a.out_len(cfg.rows, cfg.cols);
    let (da, dbank) = dfeat.split_at(split);
    let e = cfg.embed_dim;
    // Layout order: embedding, conv A weight/bias, conv B weight/bias.
    let [emb, aw, ab, bw, bb, ..] = &mut grads.tensors[..] else {
        unreachable!("parameter layout has at least five tensors")
    };
    bank_backward(grid, e, &p.tensors[CONV_A_W].data, cfg.bank_a, &cache.a, da, &mut aw.data, &mut ab.data, &mut emb.data);
    bank_backward(grid, e, &p.tensors[CONV_B_W].data, cfg.bank_b, &cache.b, dbank, &mut bw.data, &mut bb.data, &mut emb.data);
}

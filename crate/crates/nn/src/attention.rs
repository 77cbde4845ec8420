//! Single-head self-attention block with residual connection and layer norm.

use crate::error::{NnError, Result};
use crate::ops::{add, layernorm_rows, matmul, matmul_nt, scale, softmax_rows};
use crate::tape::{Buf, BufId, Tape};
use crate::tensor::{ParamId, ParamStore};

use rand::rngs::StdRng;

/// Parameters of one attention block over width-`c` token rows: projection
/// matrices (`c x c`, no biases) plus the layer-norm affine pair.
#[derive(Debug, Clone, Copy)]
pub struct AttentionParams {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub w_y: ParamId,
    pub ln_gain: ParamId,
    pub ln_bias: ParamId,
}

impl AttentionParams {
    pub fn alloc(
        store: &mut ParamStore,
        prefix: &str,
        width: usize,
        rng: &mut StdRng,
    ) -> Result<Self> {
        Ok(AttentionParams {
            w_q: store.alloc_weight(&format!("{prefix}.w_q"), width, width, rng)?,
            w_k: store.alloc_weight(&format!("{prefix}.w_k"), width, width, rng)?,
            w_v: store.alloc_weight(&format!("{prefix}.w_v"), width, width, rng)?,
            w_y: store.alloc_weight(&format!("{prefix}.w_y"), width, width, rng)?,
            ln_gain: store.alloc_const(&format!("{prefix}.ln_gain"), 1, width, 1.0)?,
            ln_bias: store.alloc_zeros(&format!("{prefix}.ln_bias"), 1, width)?,
        })
    }
}

/// `LayerNorm(E + softmax(Q K^T / sqrt(d_k)) V W_y)` with
/// `Q,K,V = E W_q, E W_k, E W_v`. Returns `(output, attention_weights)`.
pub fn attention_block_with_weights(
    tape: &mut Tape,
    store: &ParamStore,
    e: BufId,
    params: AttentionParams,
    d_k: f64,
) -> Result<(BufId, BufId)> {
    if tape.data(e).iter().any(|v| !v.is_finite()) {
        return Err(NnError::NonFinite("attention_block input"));
    }
    if d_k <= 0.0 {
        return Err(NnError::Argument(format!("d_k must be positive, got {d_k}")));
    }
    let width = tape.cols(e);
    let wq = tape.param(store, params.w_q);
    if tape.rows(wq) != width {
        return Err(NnError::Shape {
            op: "attention_block",
            detail: format!("input width {width} vs block width {}", tape.rows(wq)),
        });
    }
    let wk = tape.param(store, params.w_k);
    let wv = tape.param(store, params.w_v);
    let wy = tape.param(store, params.w_y);
    let gain = tape.param(store, params.ln_gain);
    let bias = tape.param(store, params.ln_bias);

    let q = matmul(tape, e, wq);
    let k = matmul(tape, e, wk);
    let v = matmul(tape, e, wv);
    let scores = matmul_nt(tape, q, k);
    let scaled = scale(tape, scores, 1.0 / d_k.sqrt());
    let weights = softmax_rows(tape, scaled);
    let ybar = matmul(tape, weights, v);
    let proj = matmul(tape, ybar, wy);
    let res = add(tape, e, proj);
    let out = layernorm_rows(tape, res, gain, bias);
    Ok((out, weights))
}

/// Same computation as [`attention_block_with_weights`] fused into a single
/// tape node (the composed version is kept as its reference; a test pins
/// them bit-for-bit). This path carries the per-sample policy passes, where
/// node count dominates the step cost.
pub fn attention_block(
    tape: &mut Tape,
    store: &ParamStore,
    e: BufId,
    params: AttentionParams,
    d_k: f64,
) -> Result<BufId> {
    use crate::ops::{mm_acc, mm_nt_acc, mm_tn_acc};

    if tape.data(e).iter().any(|v| !v.is_finite()) {
        return Err(NnError::NonFinite("attention_block input"));
    }
    if d_k <= 0.0 {
        return Err(NnError::Argument(format!("d_k must be positive, got {d_k}")));
    }
    let (r, c) = (tape.rows(e), tape.cols(e));
    let wq = tape.param(store, params.w_q);
    if tape.rows(wq) != c {
        return Err(NnError::Shape {
            op: "attention_block",
            detail: format!("input width {c} vs block width {}", tape.rows(wq)),
        });
    }
    let wk = tape.param(store, params.w_k);
    let wv = tape.param(store, params.w_v);
    let wy = tape.param(store, params.w_y);
    let gain = tape.param(store, params.ln_gain);
    let bias = tape.param(store, params.ln_bias);
    let scale = 1.0 / d_k.sqrt();

    let ev = tape.data(e);
    let mut q = vec![0.0; r * c];
    let mut k = vec![0.0; r * c];
    let mut v = vec![0.0; r * c];
    mm_acc(ev, tape.data(wq), &mut q, r, c, c);
    mm_acc(ev, tape.data(wk), &mut k, r, c, c);
    mm_acc(ev, tape.data(wv), &mut v, r, c, c);

    // probs = softmax(Q K^T * scale) row-wise
    let mut probs = vec![0.0; r * r];
    mm_nt_acc(&q, &k, &mut probs, r, c, r);
    for row in probs.chunks_exact_mut(r) {
        let mx = row.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s * scale));
        let mut z = 0.0;
        for s in row.iter_mut() {
            *s = (*s * scale - mx).exp();
            z += *s;
        }
        for s in row.iter_mut() {
            *s /= z;
        }
    }

    let mut ybar = vec![0.0; r * c];
    mm_acc(&probs, &v, &mut ybar, r, r, c);
    let mut res = vec![0.0; r * c];
    mm_acc(&ybar, tape.data(wy), &mut res, r, c, c);
    for (dst, &src) in res.iter_mut().zip(ev) {
        *dst += src;
    }

    // layer norm with affine
    const EPS: f64 = 1e-8;
    let cf = c as f64;
    let mut data = vec![0.0; r * c];
    let mut inv_stds = vec![0.0; r];
    let mut mus = vec![0.0; r];
    for i in 0..r {
        let row = &res[i * c..(i + 1) * c];
        let mu: f64 = row.iter().sum::<f64>() / cf;
        let var: f64 = row.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / cf;
        let inv = 1.0 / (var + EPS).sqrt();
        mus[i] = mu;
        inv_stds[i] = inv;
        for j in 0..c {
            data[i * c + j] = tape.data(gain)[j] * (row[j] - mu) * inv + tape.data(bias)[j];
        }
    }
    let out = tape.push(r, c, data);
    if !tape.recording() {
        return Ok(out);
    }

    tape.push_node(move |bufs: &[Buf], grads: &mut [Vec<f64>]| {
        let dout = std::mem::take(&mut grads[out]);
        let gain_v = &bufs[gain].data;
        // layer norm backward into d_res
        let mut d_res = vec![0.0; r * c];
        for i in 0..r {
            let row = &res[i * c..(i + 1) * c];
            let dy = &dout[i * c..(i + 1) * c];
            let (mu, inv) = (mus[i], inv_stds[i]);
            let mut sum_dxhat = 0.0;
            let mut sum_dxhat_xhat = 0.0;
            for j in 0..c {
                let xhat = (row[j] - mu) * inv;
                let dxhat = dy[j] * gain_v[j];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
                grads[gain][j] += dy[j] * xhat;
                grads[bias][j] += dy[j];
            }
            let m1 = sum_dxhat / cf;
            let m2 = sum_dxhat_xhat / cf;
            for j in 0..c {
                let xhat = (row[j] - mu) * inv;
                let dxhat = dy[j] * gain_v[j];
                d_res[i * c + j] = inv * (dxhat - m1 - xhat * m2);
            }
        }
        // residual: dE += d_res ; projection: dY = d_res Wy^T, dWy += Y^T d_res
        for (g, d) in grads[e].iter_mut().zip(&d_res) {
            *g += d;
        }
        let mut d_ybar = vec![0.0; r * c];
        mm_nt_acc(&d_res, &bufs[wy].data, &mut d_ybar, r, c, c);
        mm_tn_acc(&ybar, &d_res, &mut grads[wy], r, c, c);
        // attention: dA = dY V^T ; dV = A^T dY
        let mut d_probs = vec![0.0; r * r];
        mm_nt_acc(&d_ybar, &v, &mut d_probs, r, c, r);
        let mut d_v = vec![0.0; r * c];
        mm_tn_acc(&probs, &d_ybar, &mut d_v, r, r, c);
        // softmax rows backward, folding in the score scale
        let mut d_scores = vec![0.0; r * r];
        for i in 0..r {
            let a_row = &probs[i * r..(i + 1) * r];
            let d_row = &d_probs[i * r..(i + 1) * r];
            let dot: f64 = a_row.iter().zip(d_row).map(|(a, d)| a * d).sum();
            for j in 0..r {
                d_scores[i * r + j] = a_row[j] * (d_row[j] - dot) * scale;
            }
        }
        // scores = Q K^T: dQ = dS K ; dK = dS^T Q
        let mut d_q = vec![0.0; r * c];
        mm_acc(&d_scores, &k, &mut d_q, r, r, c);
        let mut d_k_mat = vec![0.0; r * c];
        mm_tn_acc(&d_scores, &q, &mut d_k_mat, r, r, c);
        // projections: dE += dQ Wq^T + dK Wk^T + dV Wv^T ; dW* += E^T d*
        let ev = &bufs[e].data;
        mm_nt_acc(&d_q, &bufs[wq].data, &mut grads[e], r, c, c);
        mm_nt_acc(&d_k_mat, &bufs[wk].data, &mut grads[e], r, c, c);
        mm_nt_acc(&d_v, &bufs[wv].data, &mut grads[e], r, c, c);
        mm_tn_acc(ev, &d_q, &mut grads[wq], r, c, c);
        mm_tn_acc(ev, &d_k_mat, &mut grads[wk], r, c, c);
        mm_tn_acc(ev, &d_v, &mut grads[wv], r, c, c);
        grads[out] = dout;
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn single_token_attends_to_itself() {
        let mut rng = StdRng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let p = AttentionParams::alloc(&mut store, "attn", 6, &mut rng).unwrap();
        let mut tape = Tape::new();
        let data: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e = tape.constant(1, 6, data);
        let (_, w) = attention_block_with_weights(&mut tape, &store, e, p, 6.0).unwrap();
        assert_eq!(tape.data(w), &[1.0]);
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let mut rng = StdRng::seed_from_u64(9);
        let mut store = ParamStore::new();
        let p = AttentionParams::alloc(&mut store, "attn", 8, &mut rng).unwrap();
        let mut tape = Tape::new();
        let data: Vec<f64> = (0..4 * 8).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let e = tape.constant(4, 8, data);
        let (_, w) = attention_block_with_weights(&mut tape, &store, e, p, 8.0).unwrap();
        for i in 0..4 {
            let s: f64 = tape.data(w)[i * 4..(i + 1) * 4].iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "row {i} sums to {s}");
        }
    }

    #[test]
    fn fused_block_matches_composed_bit_for_bit() {
        let mut rng = StdRng::seed_from_u64(21);
        for _ in 0..20 {
            let mut store = ParamStore::new();
            let p = AttentionParams::alloc(&mut store, "attn", 10, &mut rng).unwrap();
            let data: Vec<f64> = (0..5 * 10).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut tape = Tape::new();
            let e = tape.constant(5, 10, data);
            let fused = attention_block(&mut tape, &store, e, p, 10.0).unwrap();
            let (composed, _) = attention_block_with_weights(&mut tape, &store, e, p, 10.0).unwrap();
            let a: Vec<u64> = tape.data(fused).iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = tape.data(composed).iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut rng = StdRng::seed_from_u64(9);
        let mut store = ParamStore::new();
        let p = AttentionParams::alloc(&mut store, "attn", 4, &mut rng).unwrap();
        let mut tape = Tape::new();
        let e = tape.constant(1, 4, vec![0.0, f64::NAN, 1.0, 2.0]);
        assert!(matches!(
            attention_block(&mut tape, &store, e, p, 4.0),
            Err(NnError::NonFinite(_))
        ));
    }
}

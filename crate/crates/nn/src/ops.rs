//! Primitive tape operations.
//!
//! Each op computes its forward result immediately and, on a recording tape,
//! pushes a closure that adds its vector-Jacobian product into the input
//! gradients. Shape rules are internal invariants and panic on violation;
//! the handful of exported layer entry points ([`linear_forward`],
//! [`embedding_lookup`]) validate and return errors instead.

use crate::error::{NnError, Result};
use crate::tape::{Buf, BufId, Tape};

// ---- dense kernels (accumulating) ----

/// out[m x n] += a[m x k] * b[k x n]
pub(crate) fn mm_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (kk, &aik) in arow.iter().enumerate() {
            let brow = &b[kk * n..(kk + 1) * n];
            for j in 0..n {
                orow[j] += aik * brow[j];
            }
        }
    }
}

/// out[m x n] += a[m x k] * b[n x k]^T
pub(crate) fn mm_nt_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    let k4 = k - k % 4;
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            // four independent accumulators keep the reduction pipelined
            let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
            let mut kk = 0;
            while kk < k4 {
                s0 += arow[kk] * brow[kk];
                s1 += arow[kk + 1] * brow[kk + 1];
                s2 += arow[kk + 2] * brow[kk + 2];
                s3 += arow[kk + 3] * brow[kk + 3];
                kk += 4;
            }
            let mut acc = (s0 + s1) + (s2 + s3);
            for kk in k4..k {
                acc += arow[kk] * brow[kk];
            }
            orow[j] += acc;
        }
    }
}

/// out[k x n] += a[m x k]^T * b[m x n]
pub(crate) fn mm_tn_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let brow = &b[i * n..(i + 1) * n];
        for (p, &aip) in arow.iter().enumerate() {
            let orow = &mut out[p * n..(p + 1) * n];
            for j in 0..n {
                orow[j] += aip * brow[j];
            }
        }
    }
}

// ---- structural ops ----

/// c = a * b
pub fn matmul(tape: &mut Tape, a: BufId, b: BufId) -> BufId {
    let (m, k) = (tape.rows(a), tape.cols(a));
    let (k2, n) = (tape.rows(b), tape.cols(b));
    assert_eq!(k, k2, "matmul inner dims {k} vs {k2}");
    let mut data = vec![0.0; m * n];
    mm_acc(tape.data(a), tape.data(b), &mut data, m, k, n);
    let out = tape.push(m, n, data);
    tape.push_node(move |bufs: &[Buf], grads: &mut [Vec<f64>]| {
        let dout = std::mem::take(&mut grads[out]);
        // dA += dC * B^T ; dB += A^T * dC
        {
            let bvals = &bufs[b].data;
            mm_nt_acc(&dout, bvals, &mut grads[a], m, n, k);
        }
        {
            let avals = &bufs[a].data;
            mm_tn_acc(avals, &dout, &mut grads[b], m, k, n);
        }
        grads[out] = dout;
    });
    out
}

/// c = a * b^T
pub fn matmul_nt(tape: &mut Tape, a: BufId, b: BufId) -> BufId {
    let (m, k) = (tape.rows(a), tape.cols(a));
    let (n, k2) = (tape.rows(b), tape.cols(b));
    assert_eq!(k, k2, "matmul_nt inner dims {k} vs {k2}");
    let mut data = vec![0.0; m * n];
    mm_nt_acc(tape.data(a), tape.data(b), &mut data, m, k, n);
    let out = tape.push(m, n, data);
    tape.push_node(move |bufs: &[Buf], grads: &mut [Vec<f64>]| {
        let dout = std::mem::take(&mut grads[out]);
        // C = A B^T: dA += dC * B ; dB += dC^T * A
        mm_acc(&dout, &bufs[b].data, &mut grads[a], m, n, k);
        mm_tn_acc(&dout, &bufs[a].data, &mut grads[b], m, n, k);
        grads[out] = dout;
    });
    out
}

pub fn add(tape: &mut Tape, a: BufId, b: BufId) -> BufId {
    assert_eq!(tape.buf(a).len(), tape.buf(b).len(), "add length mismatch");
    let data: Vec<f64> = tape
        .data(a)
        .iter()
        .zip(tape.data(b))
        .map(|(x, y)| x + y)
        .collect();
    let (r, c) = (tape.rows(a), tape.cols(a));
    let out = tape.push(r, c, data);
    tape.push_node(move |_bufs, grads| {
        let dout = std::mem::take(&mut grads[out]);
        for (g, d) in grads[a].iter_mut().zip(&dout) {
            *g += d;
        }
        for (g, d) in grads[b].iter_mut().zip(&dout) {
            *g += d;
        }
        grads[out] = dout;
    });
    out
}

pub fn sub(tape: &mut Tape, a: BufId, b: BufId) -> BufId {
    assert_eq!(tape.buf(a).len(), tape.buf(b).len(), "sub length mismatch");
    let data: Vec<f64> = tape
        .data(a)
        .iter()
        .zip(tape.data(b))
        .map(|(x, y)| x - y)
        .collect();
    let (r, c) = (tape.rows(a), tape.cols(a));
    let out = tape.push(r, c, data);
    tape.push_node(move |_bufs, grads| {
        let dout = std::mem::take(&mut grads[out]);
        for (g, d) in grads[a].iter_mut().zip(&dout) {
            *g += d;
        }
        for (g, d) in grads[b].iter_mut().zip(&dout) {
            *g -= d;
        }
        grads[out] = dout;
    });
    out
}

pub fn mul(tape: &mut Tape, a: BufId, b: BufId) -> BufId {
    assert_eq!(tape.buf(a).len(), tape.buf(b).len(), "mul length mismatch");
    let data: Vec<f64> = tape
        .data(a)
        .iter()
        .zip(tape.data(b))
        .map(|(x, y)| x * y)
        .collect();
    let (r, c) = (tape.rows(a), tape.cols(a));
    let out = tape.push(r, c, data);
    tape.push_node(move |bufs, grads| {
        let dout = std::mem::take(&mut grads[out]);
        for i in 0..dout.len() {
            grads[a][i] += dout[i] * bufs[b].data[i];
            grads[b][i] += dout[i] * bufs[a].data[i];
        }
        grads[out] = dout;
    });
    out
}

pub fn scale(tape: &mut Tape, x: BufId, s: f64) -> BufId {
    let data: Vec<f64> = tape.data(x).iter().map(|v| v * s).collect();
    let (r, c) = (tape.rows(x), tape.cols(x));
    let out = tape.push(r, c, data);
    tape.push_node(move |_bufs, grads| {
        let dout = std::mem::take(&mut grads[out]);
        for (g, d) in grads[x].iter_mut().zip(&dout) {
            *g += s * d;
        }
        grads[out] = dout;
    });
    out
}

pub fn concat_cols(tape: &mut Tape, a: BufId, b: BufId) -> BufId {
    let (r, ca) = (tape.rows(a), tape.cols(a));
    let (rb, cb) = (tape.rows(b), tape.cols(b));
    assert_eq!(r, rb, "concat_cols row mismatch");
    let mut data = Vec::with_capacity(r * (ca + cb));
    for i in 0..r {
        data.extend_from_slice(&tape.data(a)[i * ca..(i + 1) * ca]);
        data.extend_from_slice(&tape.data(b)[i * cb..(i + 1) * cb]);
    }
    let out = tape.push(r, ca + cb, data);
    tape.push_node(move |_bufs, grads| {
        let dout = std::mem::take(&mut grads[out]);
        let cw = ca + cb;
        for i in 0..r {
            let drow = &dout[i * cw..(i + 1) * cw];
            for j in 0..ca {
                grads[a][i * ca + j] += drow[j];
            }
            for j in 0..cb {
                grads[b][i * cb + j] += drow[ca + j];
            }
        }
        grads[out] = dout;
    });
    out
}

pub fn slice_cols(tape: &mut Tape, x: BufId, from: usize, to: usize) -> BufId {
    let (r, c) = (tape.rows(x), tape.cols(x));
    assert!(from < to && to <= c, "slice_cols range {from}..{to} of {c}");
    let w = to - from;
    let mut data = Vec::with_capacity(r * w);
    for i in 0..r {
        data.extend_from_slice(&tape.data(x)[i * c + from..i * c + to]);
    }
    let out = tape.push(r, w, data);
    tape.push_node(move |_bufs, grads| {
        let dout = std::mem::take(&mut grads[out]);
        for i in 0..r {
            for j in 0..w {
                grads[x][i * c + from + j] += dout[i * w + j];
            }
        }
        grads[out] = dout;
    });
    out
}

pub fn mean_rows(tape: &mut Tape, x: BufId) -> BufId {
    let (r, c) = (tape.rows(x), tape.cols(x));
    let inv = 1.0 / r as f64;
    let mut data = vec![0.0; c];
    for i in 0..r {
        for j in 0..c {
            data[j] += tape.data(x)[i * c + j] * inv;
        }
    }
    let out = tape.push(1, c, data);
    tape.push_node(move |_bufs, grads| {
        let dout = std::mem::take(&mut grads[out]);
        for i in 0..r {
            for j in 0..c {
                grads[x][i * c + j] += dout[j] * inv;
            }
        }
        grads[out] = dout;
    });
    out
}

pub fn broadcast_rows(tape: &mut Tape, v: BufId, r: usize) -> BufId {
    assert_eq!(tape.rows(v), 1, "broadcast_rows expects a row vector");
    let c = tape.cols(v);
    let mut data = Vec::with_capacity(r * c);
    for _ in 0..r {
        data.extend_from_slice(tape.data(v));
    }
    let out = tape.push(r, c, data);
    tape.push_node(move |_bufs, grads| {
        let dout = std::mem::take(&mut grads[out]);
        for i in 0..r {
            for j in 0..c {
                grads[v][j] += dout[i * c + j];
            }
        }
        grads[out] = dout;
    });
    out
}

/// Assembles a matrix from constant `base` data plus scalar buffers patched
/// in at `(row, col)` positions. Used to rebuild joint-action critic inputs
/// where one agent's action column must stay differentiable.
pub fn compose_matrix(
    tape: &mut Tape,
    rows: usize,
    cols: usize,
    base: Vec<f64>,
    patches: Vec<(usize, usize, BufId)>,
) -> BufId {
    assert_eq!(base.len(), rows * cols);
    let mut data = base;
    for &(i, j, s) in &patches {
        debug_assert_eq!(tape.buf(s).len(), 1, "compose_matrix patches must be scalars");
        data[i * cols + j] = tape.value(s);
    }
    let out = tape.push(rows, cols, data);
    tape.push_node(move |_bufs, grads| {
        let dout = std::mem::take(&mut grads[out]);
        for &(i, j, s) in &patches {
            grads[s][0] += dout[i * cols + j];
        }
        grads[out] = dout;
    });
    out
}

// ---- pointwise nonlinearities ----

pub fn tanh(tape: &mut Tape, x: BufId) -> BufId {
    let data: Vec<f64> = tape.data(x).iter().map(|v| v.tanh()).collect();
    let (r, c) = (tape.rows(x), tape.cols(x));
    let out = tape.push(r, c, data);
    tape.push_node(move |bufs, grads| {
        let dout = std::mem::take(&mut grads[out]);
        for i in 0..dout.len() {
            let y = bufs[out].data[i];
            grads[x][i] += dout[i] * (1.0 - y * y);
        }
        grads[out] = dout;
    });
    out
}

pub fn relu(tape: &mut Tape, x: BufId) -> BufId {
    let data: Vec<f64> = tape.data(x).iter().map(|v| v.max(0.0)).collect();
    let (r, c) = (tape.rows(x), tape.cols(x));
    let out = tape.push(r, c, data);
    tape.push_node(move |bufs, grads| {
        let dout = std::mem::take(&mut grads[out]);
        for i in 0..dout.len() {
            if bufs[x].data[i] > 0.0 {
                grads[x][i] += dout[i];
            }
        }
        grads[out] = dout;
    });
    out
}

pub fn square(tape: &mut Tape, x: BufId) -> BufId {
    let data: Vec<f64> = tape.data(x).iter().map(|v| v * v).collect();
    let (r, c) = (tape.rows(x), tape.cols(x));
    let out = tape.push(r, c, data);
    tape.push_node(move |bufs, grads| {
        let dout = std::mem::take(&mut grads[out]);
        for i in 0..dout.len() {
            grads[x][i] += dout[i] * 2.0 * bufs[x].data[i];
        }
        grads[out] = dout;
    });
    out
}

// ---- reductions & losses ----

pub fn sum_all(tape: &mut Tape, x: BufId) -> BufId {
    let s: f64 = tape.data(x).iter().sum();
    let out = tape.push(1, 1, vec![s]);
    tape.push_node(move |_bufs, grads| {
        let d = grads[out][0];
        for g in grads[x].iter_mut() {
            *g += d;
        }
    });
    out
}

pub fn mean_all(tape: &mut Tape, x: BufId) -> BufId {
    let n = tape.buf(x).len() as f64;
    let s = sum_all(tape, x);
    scale(tape, s, 1.0 / n)
}

/// Sum of absolute values (L1 norm; subgradient 0 at exactly 0).
pub fn l1_norm(tape: &mut Tape, x: BufId) -> BufId {
    let s: f64 = tape.data(x).iter().map(|v| v.abs()).sum();
    let out = tape.push(1, 1, vec![s]);
    tape.push_node(move |bufs, grads| {
        let d = grads[out][0];
        for i in 0..bufs[x].data.len() {
            let v = bufs[x].data[i];
            if v > 0.0 {
                grads[x][i] += d;
            } else if v < 0.0 {
                grads[x][i] -= d;
            }
        }
    });
    out
}

/// Weighted sum of scalar buffers: `sum_i w_i * x_i`.
pub fn add_weighted(tape: &mut Tape, terms: &[(BufId, f64)]) -> BufId {
    let mut s = 0.0;
    for &(b, w) in terms {
        debug_assert_eq!(tape.buf(b).len(), 1, "add_weighted expects scalars");
        s += w * tape.value(b);
    }
    let terms: Vec<(BufId, f64)> = terms.to_vec();
    let out = tape.push(1, 1, vec![s]);
    tape.push_node(move |_bufs, grads| {
        let d = grads[out][0];
        for &(b, w) in &terms {
            grads[b][0] += w * d;
        }
    });
    out
}

pub fn softmax_rows(tape: &mut Tape, x: BufId) -> BufId {
    let (r, c) = (tape.rows(x), tape.cols(x));
    let mut data = vec![0.0; r * c];
    for i in 0..r {
        let row = &tape.data(x)[i * c..(i + 1) * c];
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for j in 0..c {
            let e = (row[j] - mx).exp();
            data[i * c + j] = e;
            z += e;
        }
        for j in 0..c {
            data[i * c + j] /= z;
        }
    }
    let out = tape.push(r, c, data);
    tape.push_node(move |bufs, grads| {
        let dout = std::mem::take(&mut grads[out]);
        for i in 0..r {
            let y = &bufs[out].data[i * c..(i + 1) * c];
            let dy = &dout[i * c..(i + 1) * c];
            let dot: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
            for j in 0..c {
                grads[x][i * c + j] += y[j] * (dy[j] - dot);
            }
        }
        grads[out] = dout;
    });
    out
}

/// Row-wise layer normalization with learnable gain/bias (`1 x c` each).
pub fn layernorm_rows(tape: &mut Tape, x: BufId, gain: BufId, bias: BufId) -> BufId {
    const EPS: f64 = 1e-8;
    let (r, c) = (tape.rows(x), tape.cols(x));
    assert_eq!(tape.cols(gain), c, "layernorm gain width");
    assert_eq!(tape.cols(bias), c, "layernorm bias width");
    let cf = c as f64;
    let mut data = vec![0.0; r * c];
    let mut mus = vec![0.0; r];
    let mut inv_stds = vec![0.0; r];
    for i in 0..r {
        let row = &tape.data(x)[i * c..(i + 1) * c];
        let mu: f64 = row.iter().sum::<f64>() / cf;
        let var: f64 = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / cf;
        let inv = 1.0 / (var + EPS).sqrt();
        mus[i] = mu;
        inv_stds[i] = inv;
        for j in 0..c {
            let xhat = (row[j] - mu) * inv;
            data[i * c + j] = tape.data(gain)[j] * xhat + tape.data(bias)[j];
        }
    }
    let out = tape.push(r, c, data);
    tape.push_node(move |bufs, grads| {
        let dout = std::mem::take(&mut grads[out]);
        for i in 0..r {
            let row = &bufs[x].data[i * c..(i + 1) * c];
            let dy = &dout[i * c..(i + 1) * c];
            let (mu, inv) = (mus[i], inv_stds[i]);
            // dxhat_j = dy_j * gain_j; reduce the two layernorm sums, then
            // dx_j = inv * (dxhat_j - mean(dxhat) - xhat_j * mean(dxhat*xhat))
            let mut sum_dxhat = 0.0;
            let mut sum_dxhat_xhat = 0.0;
            for j in 0..c {
                let xhat = (row[j] - mu) * inv;
                let dxhat = dy[j] * bufs[gain].data[j];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
                grads[gain][j] += dy[j] * xhat;
                grads[bias][j] += dy[j];
            }
            let m1 = sum_dxhat / cf;
            let m2 = sum_dxhat_xhat / cf;
            for j in 0..c {
                let xhat = (row[j] - mu) * inv;
                let dxhat = dy[j] * bufs[gain].data[j];
                grads[x][i * c + j] += inv * (dxhat - m1 - xhat * m2);
            }
        }
        grads[out] = dout;
    });
    out
}

/// Squared Euclidean distance from each row of `rows` to vector `v`:
/// output `1 x k` with `d_i = ||rows_i - v||^2`.
pub fn sq_dist_rows(tape: &mut Tape, rows: BufId, v: BufId) -> BufId {
    let (k, c) = (tape.rows(rows), tape.cols(rows));
    assert_eq!(tape.cols(v), c, "sq_dist_rows width mismatch");
    assert_eq!(tape.rows(v), 1, "sq_dist_rows expects row vector");
    let mut data = vec![0.0; k];
    for i in 0..k {
        let row = &tape.data(rows)[i * c..(i + 1) * c];
        data[i] = row
            .iter()
            .zip(tape.data(v))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
    }
    let out = tape.push(1, k, data);
    tape.push_node(move |bufs, grads| {
        let dout = std::mem::take(&mut grads[out]);
        for i in 0..k {
            let d = dout[i];
            for j in 0..c {
                let diff = bufs[rows].data[i * c + j] - bufs[v].data[j];
                grads[rows][i * c + j] += d * 2.0 * diff;
                grads[v][j] -= d * 2.0 * diff;
            }
        }
        grads[out] = dout;
    });
    out
}

/// Elementwise `log((d + 1) / (d + eps))` on a buffer of squared distances.
pub fn log_similarity(tape: &mut Tape, d: BufId, eps: f64) -> BufId {
    let data: Vec<f64> = tape
        .data(d)
        .iter()
        .map(|&v| ((v + 1.0) / (v + eps)).ln())
        .collect();
    let (r, c) = (tape.rows(d), tape.cols(d));
    let out = tape.push(r, c, data);
    tape.push_node(move |bufs, grads| {
        let dout = std::mem::take(&mut grads[out]);
        for i in 0..dout.len() {
            let v = bufs[d].data[i];
            grads[d][i] += dout[i] * (1.0 / (v + 1.0) - 1.0 / (v + eps));
        }
        grads[out] = dout;
    });
    out
}

/// Minimum entry of a row vector; gradient routes to the argmin (lowest
/// index on ties).
pub fn row_min(tape: &mut Tape, x: BufId) -> BufId {
    assert_eq!(tape.rows(x), 1, "row_min expects a row vector");
    let (mut best, mut arg) = (f64::INFINITY, 0);
    for (j, &v) in tape.data(x).iter().enumerate() {
        if v < best {
            best = v;
            arg = j;
        }
    }
    let out = tape.push(1, 1, vec![best]);
    tape.push_node(move |_bufs, grads| {
        grads[x][arg] += grads[out][0];
    });
    out
}

/// Rows scaled to unit L2 norm (tiny guard keeps zero rows at zero).
pub fn l2_normalize_rows(tape: &mut Tape, x: BufId) -> BufId {
    const GUARD: f64 = 1e-12;
    let (r, c) = (tape.rows(x), tape.cols(x));
    let mut data = vec![0.0; r * c];
    let mut norms = vec![0.0; r];
    for i in 0..r {
        let row = &tape.data(x)[i * c..(i + 1) * c];
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(GUARD);
        norms[i] = n;
        for j in 0..c {
            data[i * c + j] = row[j] / n;
        }
    }
    let out = tape.push(r, c, data);
    tape.push_node(move |bufs, grads| {
        let dout = std::mem::take(&mut grads[out]);
        for i in 0..r {
            let y = &bufs[out].data[i * c..(i + 1) * c];
            let dy = &dout[i * c..(i + 1) * c];
            let dot: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
            for j in 0..c {
                grads[x][i * c + j] += (dy[j] - y[j] * dot) / norms[i];
            }
        }
        grads[out] = dout;
    });
    out
}

/// `sum max(0, g_ij - xi)` over ordered pairs `i != j` with both indices in
/// the same `[start, end)` block of `blocks`. `g` is a square matrix.
pub fn hinge_offdiag_blocks(
    tape: &mut Tape,
    g: BufId,
    blocks: Vec<(usize, usize)>,
    xi: f64,
) -> BufId {
    let k = tape.rows(g);
    assert_eq!(tape.cols(g), k, "hinge_offdiag_blocks expects square input");
    let mut s = 0.0;
    for &(lo, hi) in &blocks {
        for i in lo..hi {
            for j in lo..hi {
                if i != j {
                    s += (tape.data(g)[i * k + j] - xi).max(0.0);
                }
            }
        }
    }
    let out = tape.push(1, 1, vec![s]);
    tape.push_node(move |bufs, grads| {
        let d = grads[out][0];
        for &(lo, hi) in &blocks {
            for i in lo..hi {
                for j in lo..hi {
                    if i != j && bufs[g].data[i * k + j] > xi {
                        grads[g][i * k + j] += d;
                    }
                }
            }
        }
    });
    out
}

/// Cross-entropy of a single logits row against class `target`.
pub fn cross_entropy_logits(tape: &mut Tape, logits: BufId, target: usize) -> BufId {
    assert_eq!(tape.rows(logits), 1, "cross_entropy expects one logits row");
    let c = tape.cols(logits);
    assert!(target < c, "cross_entropy target {target} out of {c}");
    let row = tape.data(logits);
    let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
    let ce = lse - row[target];
    let out = tape.push(1, 1, vec![ce]);
    tape.push_node(move |bufs, grads| {
        let d = grads[out][0];
        let row = &bufs[logits].data;
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|v| (v - mx).exp()).sum();
        for j in 0..c {
            let p = (row[j] - mx).exp() / z;
            let ind = if j == target { 1.0 } else { 0.0 };
            grads[logits][j] += d * (p - ind);
        }
    });
    out
}

// ---- exported layer entry points ----

/// `x * w + bias` broadcast per row, as one fused op.
/// `x: n x a`, `w: a x b`, `bias: 1 x b`.
pub fn linear_forward(tape: &mut Tape, x: BufId, w: BufId, bias: BufId) -> Result<BufId> {
    let (n, a) = (tape.rows(x), tape.cols(x));
    let (a2, b) = (tape.rows(w), tape.cols(w));
    if a != a2 || tape.cols(bias) != b || tape.rows(bias) != 1 {
        return Err(NnError::Shape {
            op: "linear_forward",
            detail: format!(
                "x: {n}x{a}, w: {a2}x{b}, bias: {}x{}",
                tape.rows(bias),
                tape.cols(bias)
            ),
        });
    }
    let mut data = Vec::with_capacity(n * b);
    for _ in 0..n {
        data.extend_from_slice(tape.data(bias));
    }
    mm_acc(tape.data(x), tape.data(w), &mut data, n, a, b);
    let out = tape.push(n, b, data);
    tape.push_node(move |bufs: &[Buf], grads: &mut [Vec<f64>]| {
        let dout = std::mem::take(&mut grads[out]);
        // dX += dY W^T ; dW += X^T dY ; db += column sums of dY
        mm_nt_acc(&dout, &bufs[w].data, &mut grads[x], n, b, a);
        mm_tn_acc(&bufs[x].data, &dout, &mut grads[w], n, a, b);
        for i in 0..n {
            for j in 0..b {
                grads[bias][j] += dout[i * b + j];
            }
        }
        grads[out] = dout;
    });
    Ok(out)
}

/// Returns row `index` of `table`; gradient flows only to that row.
pub fn embedding_lookup(tape: &mut Tape, index: usize, table: BufId) -> Result<BufId> {
    let (k, h) = (tape.rows(table), tape.cols(table));
    if index >= k {
        return Err(NnError::Index { index, size: k });
    }
    let data = tape.data(table)[index * h..(index + 1) * h].to_vec();
    let out = tape.push(1, h, data);
    tape.push_node(move |_bufs, grads| {
        let dout = std::mem::take(&mut grads[out]);
        for j in 0..h {
            grads[table][index * h + j] += dout[j];
        }
        grads[out] = dout;
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ParamStore;

    fn grad_of(tape: &Tape, id: BufId) -> Vec<f64> {
        tape.grad(id).to_vec()
    }

    #[test]
    fn linear_zero_input_gives_bias_rows() {
        let mut store = ParamStore::new();
        let w = store.alloc_const("w", 2, 3, 0.7).unwrap();
        let b = store
            .alloc_with("b", 1, 3, {
                let mut i = 0.0;
                move || {
                    i += 1.0;
                    i
                }
            })
            .unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(4, 2, vec![0.0; 8]);
        let wb = tape.param(&store, w);
        let bb = tape.param(&store, b);
        let y = linear_forward(&mut tape, x, wb, bb).unwrap();
        for i in 0..4 {
            assert_eq!(&tape.data(y)[i * 3..(i + 1) * 3], &[1.0, 2.0, 3.0]);
        }
    }

    #[test]
    fn linear_identity_passthrough() {
        let mut store = ParamStore::new();
        let w = store
            .alloc_with("w", 2, 2, {
                let mut i = 0;
                move || {
                    let v = if i % 3 == 0 { 1.0 } else { 0.0 };
                    i += 1;
                    v
                }
            })
            .unwrap();
        let b = store.alloc_zeros("b", 1, 2).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(3, 2, vec![1.0, -2.0, 0.5, 4.0, -1.0, 3.0]);
        let wb = tape.param(&store, w);
        let bb = tape.param(&store, b);
        let y = linear_forward(&mut tape, x, wb, bb).unwrap();
        assert_eq!(tape.data(y), tape.data(x));
    }

    #[test]
    fn linear_shape_mismatch_is_error() {
        let mut tape = Tape::new();
        let x = tape.constant(1, 3, vec![0.0; 3]);
        let w = tape.constant(2, 2, vec![0.0; 4]);
        let b = tape.constant(1, 2, vec![0.0; 2]);
        assert!(matches!(
            linear_forward(&mut tape, x, w, b),
            Err(NnError::Shape { .. })
        ));
    }

    #[test]
    fn embedding_lookup_row_and_jacobian() {
        let mut tape = Tape::new();
        let table = tape.constant(3, 2, vec![1.0, 1.0, 5.0, 6.0, 7.0, 8.0]);
        let row = embedding_lookup(&mut tape, 0, table).unwrap();
        assert_eq!(tape.data(row), &[1.0, 1.0]);

        let s = sum_all(&mut tape, row);
        tape.backward(s);
        assert_eq!(grad_of(&tape, table), vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn embedding_out_of_range() {
        let mut tape = Tape::new();
        let table = tape.constant(3, 2, vec![0.0; 6]);
        assert!(matches!(
            embedding_lookup(&mut tape, 3, table),
            Err(NnError::Index { index: 3, size: 3 })
        ));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut tape = Tape::new();
        let x = tape.constant(2, 4, vec![0.3, -2.0, 5.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        let y = softmax_rows(&mut tape, x);
        for i in 0..2 {
            let s: f64 = tape.data(y)[i * 4..(i + 1) * 4].iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn layernorm_rows_standardize() {
        let mut tape = Tape::new();
        let x = tape.constant(2, 4, vec![3.0, -1.0, 2.0, 8.0, 0.1, 0.2, 0.3, 0.4]);
        let g = tape.constant(1, 4, vec![1.0; 4]);
        let b = tape.constant(1, 4, vec![0.0; 4]);
        let y = layernorm_rows(&mut tape, x, g, b);
        for i in 0..2 {
            let row = &tape.data(y)[i * 4..(i + 1) * 4];
            let mu: f64 = row.iter().sum::<f64>() / 4.0;
            let var: f64 = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / 4.0;
            assert!(mu.abs() < 1e-6, "row mean {mu}");
            assert!((var - 1.0).abs() < 1e-6, "row var {var}");
        }
    }

    #[test]
    fn row_min_ties_break_low() {
        let mut tape = Tape::new();
        let x = tape.constant(1, 4, vec![2.0, 1.0, 1.0, 3.0]);
        let m = row_min(&mut tape, x);
        assert_eq!(tape.value(m), 1.0);
        tape.backward(m);
        assert_eq!(grad_of(&tape, x), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn cross_entropy_uniform_at_zero_logits() {
        let mut tape = Tape::new();
        let l = tape.constant(1, 4, vec![0.0; 4]);
        let ce = cross_entropy_logits(&mut tape, l, 2);
        assert!((tape.value(ce) - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn matmul_against_naive_oracle() {
        // independent triple-loop oracle in a different index order
        let a = vec![0.5, -1.0, 2.0, 0.25, 3.0, -0.5];
        let b = vec![1.0, 2.0, -1.0, 0.5, 0.0, 1.5];
        let (m, k, n) = (3, 2, 3);
        let mut expect = vec![0.0; m * n];
        for j in 0..n {
            for i in 0..m {
                let mut acc = 0.0;
                for kk in 0..k {
                    acc += a[i * k + kk] * b[kk * n + j];
                }
                expect[i * n + j] = acc;
            }
        }
        let mut tape = Tape::new();
        let ab = tape.constant(m, k, a);
        let bb = tape.constant(k, n, b);
        let c = matmul(&mut tape, ab, bb);
        for (got, want) in tape.data(c).iter().zip(&expect) {
            assert!((got - want).abs() < 1e-14);
        }
    }
}

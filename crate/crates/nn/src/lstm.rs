//! Fused LSTM recurrence with hand-written backpropagation through time.
//!
//! Running the recurrence as one tape node (per direction) keeps the node
//! count independent of sequence length, which matters because every policy
//! forward encodes a memory window.

use crate::error::{NnError, Result};
use crate::ops::{concat_cols, mm_acc, mm_tn_acc};
use crate::tape::{Buf, BufId, Tape};
use crate::tensor::{ParamId, ParamStore};

use rand::rngs::StdRng;

/// One direction's parameters. Gates are packed `[i, f, g, o]` along the
/// columns: `w_x: d_in x 4H`, `w_h: H x 4H`, `b: 1 x 4H`.
#[derive(Debug, Clone, Copy)]
pub struct LstmParams {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub b: ParamId,
}

impl LstmParams {
    pub fn alloc(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        hidden: usize,
        rng: &mut StdRng,
    ) -> Result<Self> {
        Ok(LstmParams {
            w_x: store.alloc_weight(&format!("{prefix}.w_x"), d_in, 4 * hidden, rng)?,
            w_h: store.alloc_weight(&format!("{prefix}.w_h"), hidden, 4 * hidden, rng)?,
            b: store.alloc_zeros(&format!("{prefix}.b"), 1, 4 * hidden)?,
        })
    }
}

/// Forward + backward parameter pair for [`bilstm_forward`].
#[derive(Debug, Clone, Copy)]
pub struct BiLstmParams {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
}

impl BiLstmParams {
    /// `out_dim` must be even; each direction gets `out_dim / 2` hidden units.
    pub fn alloc(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        out_dim: usize,
        rng: &mut StdRng,
    ) -> Result<Self> {
        if out_dim % 2 != 0 {
            return Err(NnError::Argument(format!(
                "bilstm output dim must be even, got {out_dim}"
            )));
        }
        Ok(BiLstmParams {
            fwd: LstmParams::alloc(store, &format!("{prefix}.fwd"), d_in, out_dim / 2, rng)?,
            bwd: LstmParams::alloc(store, &format!("{prefix}.bwd"), d_in, out_dim / 2, rng)?,
        })
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

struct StepSave {
    gates: Vec<f64>,  // post-activation [i f g o], 4H
    c: Vec<f64>,      // cell state after step, H
    tanh_c: Vec<f64>, // H
    h_prev: Vec<f64>, // H
}

/// Runs a single-direction LSTM over `seq` (`T x d_in`) from zero initial
/// state and returns the final hidden state (`1 x H`). With `reverse` the
/// sequence is consumed last-to-first.
pub fn lstm_final_hidden(
    tape: &mut Tape,
    store: &ParamStore,
    seq: BufId,
    params: LstmParams,
    hidden: usize,
    reverse: bool,
) -> Result<BufId> {
    let (t_len, d_in) = (tape.rows(seq), tape.cols(seq));
    if t_len == 0 {
        return Err(NnError::Argument("empty sequence".into()));
    }
    let wx = tape.param(store, params.w_x);
    let wh = tape.param(store, params.w_h);
    let b = tape.param(store, params.b);
    if tape.rows(wx) != d_in || tape.cols(wx) != 4 * hidden {
        return Err(NnError::Shape {
            op: "lstm_final_hidden",
            detail: format!(
                "w_x is {}x{}, need {}x{}",
                tape.rows(wx),
                tape.cols(wx),
                d_in,
                4 * hidden
            ),
        });
    }

    let order: Vec<usize> = if reverse {
        (0..t_len).rev().collect()
    } else {
        (0..t_len).collect()
    };

    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut z = vec![0.0; 4 * hidden];
    let recording = tape.recording();
    let mut saves: Vec<StepSave> = Vec::with_capacity(if recording { t_len } else { 0 });

    for &t in &order {
        let x_t = &tape.data(seq)[t * d_in..(t + 1) * d_in];
        z.copy_from_slice(tape.data(b));
        mm_acc(x_t, tape.data(wx), &mut z, 1, d_in, 4 * hidden);
        mm_acc(&h, tape.data(wh), &mut z, 1, hidden, 4 * hidden);

        let mut save = if recording {
            Some(StepSave {
                gates: vec![0.0; 4 * hidden],
                c: vec![0.0; hidden],
                tanh_c: vec![0.0; hidden],
                h_prev: h.clone(),
            })
        } else {
            None
        };
        for u in 0..hidden {
            let gi = sigmoid(z[u]);
            let gf = sigmoid(z[hidden + u]);
            let gg = z[2 * hidden + u].tanh();
            let go = sigmoid(z[3 * hidden + u]);
            let c_prev = c[u];
            c[u] = gf * c_prev + gi * gg;
            let tanh_c = c[u].tanh();
            h[u] = go * tanh_c;
            if let Some(s) = save.as_mut() {
                s.gates[u] = gi;
                s.gates[hidden + u] = gf;
                s.gates[2 * hidden + u] = gg;
                s.gates[3 * hidden + u] = go;
                s.c[u] = c[u];
                s.tanh_c[u] = tanh_c;
            }
        }
        if let Some(s) = save {
            saves.push(s);
        }
    }

    let out = tape.push(1, hidden, h);
    if !tape.recording() {
        return Ok(out);
    }

    tape.push_node(move |bufs: &[Buf], grads: &mut [Vec<f64>]| {
        let mut dh = grads[out].clone();
        let mut dc = vec![0.0; hidden];
        let wh_vals = &bufs[wh].data;
        let wx_vals = &bufs[wx].data;
        for (step_idx, &t) in order.iter().enumerate().rev() {
            let s = &saves[step_idx];
            let c_prev: &[f64] = if step_idx == 0 {
                &[]
            } else {
                &saves[step_idx - 1].c
            };
            let mut dz = vec![0.0; 4 * hidden];
            for u in 0..hidden {
                let gi = s.gates[u];
                let gf = s.gates[hidden + u];
                let gg = s.gates[2 * hidden + u];
                let go = s.gates[3 * hidden + u];
                let cp = if step_idx == 0 { 0.0 } else { c_prev[u] };
                let dcu = dc[u] + dh[u] * go * (1.0 - s.tanh_c[u] * s.tanh_c[u]);
                let d_go = dh[u] * s.tanh_c[u];
                let d_gi = dcu * gg;
                let d_gf = dcu * cp;
                let d_gg = dcu * gi;
                dz[u] = d_gi * gi * (1.0 - gi);
                dz[hidden + u] = d_gf * gf * (1.0 - gf);
                dz[2 * hidden + u] = d_gg * (1.0 - gg * gg);
                dz[3 * hidden + u] = d_go * go * (1.0 - go);
                dc[u] = dcu * gf;
            }
            // parameter gradients
            let x_t = &bufs[seq].data[t * d_in..(t + 1) * d_in];
            mm_tn_acc(x_t, &dz, &mut grads[wx], 1, d_in, 4 * hidden);
            mm_tn_acc(&s.h_prev, &dz, &mut grads[wh], 1, hidden, 4 * hidden);
            for j in 0..4 * hidden {
                grads[b][j] += dz[j];
            }
            // input gradient: dx_t = dz * w_x^T
            {
                let dseq = &mut grads[seq][t * d_in..(t + 1) * d_in];
                for p in 0..d_in {
                    let wrow = &wx_vals[p * 4 * hidden..(p + 1) * 4 * hidden];
                    let mut acc = 0.0;
                    for j in 0..4 * hidden {
                        acc += dz[j] * wrow[j];
                    }
                    dseq[p] += acc;
                }
            }
            // recurrent gradient: dh_prev = dz * w_h^T
            let mut dh_prev = vec![0.0; hidden];
            for p in 0..hidden {
                let wrow = &wh_vals[p * 4 * hidden..(p + 1) * 4 * hidden];
                let mut acc = 0.0;
                for j in 0..4 * hidden {
                    acc += dz[j] * wrow[j];
                }
                dh_prev[p] = acc;
            }
            dh = dh_prev;
        }
    });
    Ok(out)
}

/// Bidirectional LSTM over `seq` (`T x d_in`): concatenation of the final
/// forward and backward hidden states, `1 x out_dim`.
pub fn bilstm_forward(
    tape: &mut Tape,
    store: &ParamStore,
    seq: BufId,
    params: BiLstmParams,
    out_dim: usize,
) -> Result<BufId> {
    let hidden = out_dim / 2;
    let hf = lstm_final_hidden(tape, store, seq, params.fwd, hidden, false)?;
    let hb = lstm_final_hidden(tape, store, seq, params.bwd, hidden, true)?;
    Ok(concat_cols(tape, hf, hb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Hand-unrolled single-step cell, written independently of the op.
    fn single_step_oracle(x: f64, w_x: &[f64], b: &[f64], hidden: usize) -> Vec<f64> {
        let mut h = vec![0.0; hidden];
        for u in 0..hidden {
            let gi = sigmoid(x * w_x[u] + b[u]);
            let gf = sigmoid(x * w_x[hidden + u] + b[hidden + u]);
            let gg = (x * w_x[2 * hidden + u] + b[2 * hidden + u]).tanh();
            let go = sigmoid(x * w_x[3 * hidden + u] + b[3 * hidden + u]);
            let c = gf * 0.0 + gi * gg;
            h[u] = go * c.tanh();
        }
        h
    }

    #[test]
    fn single_element_matches_hand_unrolled_cell() {
        let mut rng = StdRng::seed_from_u64(11);
        let hidden = 3;
        let mut store = ParamStore::new();
        let p = LstmParams::alloc(&mut store, "lstm", 1, hidden, &mut rng).unwrap();
        // give the biases some structure so every gate is exercised
        store
            .get_mut(p.b)
            .values
            .iter_mut()
            .for_each(|v| *v = rng.gen_range(-0.5..0.5));

        let x = 0.37;
        let mut tape = Tape::new();
        let seq = tape.constant(1, 1, vec![x]);
        let h = lstm_final_hidden(&mut tape, &store, seq, p, hidden, false).unwrap();

        let expect = single_step_oracle(x, &store.get(p.w_x).values, &store.get(p.b).values, hidden);
        for (got, want) in tape.data(h).iter().zip(&expect) {
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }
    }

    #[test]
    fn empty_sequence_is_error() {
        let mut rng = StdRng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let p = BiLstmParams::alloc(&mut store, "m", 1, 4, &mut rng).unwrap();
        let mut tape = Tape::new();
        let seq = tape.constant(0, 1, vec![]);
        assert!(bilstm_forward(&mut tape, &store, seq, p, 4).is_err());
    }

    #[test]
    fn direction_symmetry_on_constant_sequence() {
        let mut rng = StdRng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let p = BiLstmParams::alloc(&mut store, "m", 1, 8, &mut rng).unwrap();
        let swapped = BiLstmParams {
            fwd: p.bwd,
            bwd: p.fwd,
        };

        let seq_data = vec![0.42; 6];
        let mut tape = Tape::eval();
        let seq = tape.constant(6, 1, seq_data.clone());
        let a = bilstm_forward(&mut tape, &store, seq, p, 8).unwrap();
        let b = bilstm_forward(&mut tape, &store, seq, swapped, 8).unwrap();

        let av = tape.data(a).to_vec();
        let bv = tape.data(b).to_vec();
        assert_eq!(&av[0..4], &bv[4..8]);
        assert_eq!(&av[4..8], &bv[0..4]);
    }

    #[test]
    fn odd_output_dim_rejected() {
        let mut rng = StdRng::seed_from_u64(1);
        let mut store = ParamStore::new();
        assert!(BiLstmParams::alloc(&mut store, "m", 1, 5, &mut rng).is_err());
    }
}

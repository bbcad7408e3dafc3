//! Forward and backward passes of the attention encoder-decoder.
//!
//! The encoder LSTM consumes the input tokens; its per-position hidden
//! states are the attention memory and its final state seeds the decoder.
//! Each decoder step attends over the memory with a bilinear score
//! (`g_prev · A · e_i`), feeds `[prev-token embedding, context]` through the
//! decoder LSTM, and projects to masked token log-probabilities.
//!
//! Backward passes are hand-written and verified against central finite
//! differences (see the gradient-check tests and the acceptance suite).

use crate::policy::math::{axpy, dot, log_softmax_masked, matvec, matvec_acc, matvec_t_acc, outer_acc, sigmoid};
#[cfg(test)]
use crate::policy::math::worst_relative_error;
use crate::policy::params::{Layout, MatSpec, Params};

/// Floor applied when reporting log-probabilities of zero-probability tokens.
pub const PROB_FLOOR: f64 = 1e-12;

pub struct LstmSpec {
    pub wx: MatSpec,
    pub wh: MatSpec,
    pub b: MatSpec,
}

impl Layout {
    pub fn encoder(&self) -> LstmSpec {
        LstmSpec { wx: self.enc_wx, wh: self.enc_wh, b: self.enc_b }
    }

    pub fn decoder(&self) -> LstmSpec {
        LstmSpec { wx: self.dec_wx, wh: self.dec_wh, b: self.dec_b }
    }
}

/// Everything one LSTM step needs to replay its backward pass.
pub struct LstmCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Post-activation gates: input, forget, cell candidate, output.
    pub gi: Vec<f64>,
    pub gf: Vec<f64>,
    pub gg: Vec<f64>,
    pub go: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

fn lstm_forward(
    params: &Params,
    spec: &LstmSpec,
    d_h: usize,
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
) -> LstmCache {
    let mut pre = vec![0.0; 4 * d_h];
    matvec(params.mat(spec.wx), 4 * d_h, x.len(), &x, &mut pre);
    matvec_acc(params.mat(spec.wh), 4 * d_h, d_h, &h_prev, &mut pre);
    axpy(&mut pre, 1.0, params.mat(spec.b));

    let mut gi = vec![0.0; d_h];
    let mut gf = vec![0.0; d_h];
    let mut gg = vec![0.0; d_h];
    let mut go = vec![0.0; d_h];
    for j in 0..d_h {
        gi[j] = sigmoid(pre[j]);
        gf[j] = sigmoid(pre[d_h + j]);
        gg[j] = pre[2 * d_h + j].tanh();
        go[j] = sigmoid(pre[3 * d_h + j]);
    }
    let mut c = vec![0.0; d_h];
    let mut h = vec![0.0; d_h];
    for j in 0..d_h {
        c[j] = gf[j] * c_prev[j] + gi[j] * gg[j];
        h[j] = go[j] * c[j].tanh();
    }
    LstmCache { x, h_prev, c_prev, gi, gf, gg, go, c, h }
}

/// Backward through one LSTM step. `dh`/`dc` are the gradients flowing into
/// this step's outputs; `dx`, `dh_prev`, `dc_prev` are written (not
/// accumulated). Parameter gradients accumulate into `grad`.
#[allow(clippy::too_many_arguments)]
fn lstm_backward(
    params: &Params,
    spec: &LstmSpec,
    d_h: usize,
    cache: &LstmCache,
    dh: &[f64],
    dc_in: &[f64],
    grad: &mut [f64],
    dx: &mut [f64],
    dh_prev: &mut [f64],
    dc_prev: &mut [f64],
) {
    let mut dpre = vec![0.0; 4 * d_h];
    for j in 0..d_h {
        let tc = cache.c[j].tanh();
        let d_o = dh[j] * tc;
        let dc = dc_in[j] + dh[j] * cache.go[j] * (1.0 - tc * tc);
        let d_i = dc * cache.gg[j];
        let d_g = dc * cache.gi[j];
        let d_f = dc * cache.c_prev[j];
        dc_prev[j] = dc * cache.gf[j];
        dpre[j] = d_i * cache.gi[j] * (1.0 - cache.gi[j]);
        dpre[d_h + j] = d_f * cache.gf[j] * (1.0 - cache.gf[j]);
        dpre[2 * d_h + j] = d_g * (1.0 - cache.gg[j] * cache.gg[j]);
        dpre[3 * d_h + j] = d_o * cache.go[j] * (1.0 - cache.go[j]);
    }
    outer_acc(&mut grad[spec.wx.range()], &dpre, &cache.x);
    outer_acc(&mut grad[spec.wh.range()], &dpre, &cache.h_prev);
    axpy(&mut grad[spec.b.range()], 1.0, &dpre);
    dx.fill(0.0);
    matvec_t_acc(params.mat(spec.wx), 4 * d_h, cache.x.len(), &dpre, dx);
    dh_prev.fill(0.0);
    matvec_t_acc(params.mat(spec.wh), 4 * d_h, d_h, &dpre, dh_prev);
}

/// Encoder hidden states for one input, plus the question's output mask.
#[derive(Debug, Clone)]
pub struct EncoderStates {
    /// One vector per input position (the attention memory).
    pub outputs: Vec<Vec<f64>>,
    pub final_h: Vec<f64>,
    pub final_c: Vec<f64>,
    /// Allowed output tokens for the question this encoding came from.
    pub mask: Vec<bool>,
}

/// Full encoder replay cache (forward states for every position).
pub struct EncCache {
    pub token_rows: Vec<usize>,
    pub steps: Vec<LstmCache>,
}

impl EncCache {
    pub fn states(&self, mask: Vec<bool>, d_h: usize) -> EncoderStates {
        let outputs: Vec<Vec<f64>> = self.steps.iter().map(|s| s.h.clone()).collect();
        let (final_h, final_c) = match self.steps.last() {
            Some(last) => (last.h.clone(), last.c.clone()),
            None => (vec![0.0; d_h], vec![0.0; d_h]),
        };
        EncoderStates { outputs, final_h, final_c, mask }
    }
}

pub fn encode_with_cache(layout: &Layout, params: &Params, tokens: &[usize]) -> EncCache {
    let d_h = layout.dims.d_h;
    let spec = layout.encoder();
    let mut h = vec![0.0; d_h];
    let mut c = vec![0.0; d_h];
    let mut steps = Vec::with_capacity(tokens.len());
    for &tok in tokens {
        let x = params.row(layout.embed_in, tok).to_vec();
        let cache = lstm_forward(params, &spec, d_h, x, h, c);
        h = cache.h.clone();
        c = cache.c.clone();
        steps.push(cache);
    }
    EncCache { token_rows: tokens.to_vec(), steps }
}

/// Decoder recurrent state.
#[derive(Debug, Clone)]
pub struct DecState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

/// Per-sequence decode context: the attention memory with `A·e_i` cached.
pub struct DecodeCtx {
    pub ae: Vec<Vec<f64>>,
}

pub fn decode_ctx(layout: &Layout, params: &Params, enc: &EncoderStates) -> DecodeCtx {
    let d_h = layout.dims.d_h;
    let attn = params.mat(layout.attn);
    let ae = enc
        .outputs
        .iter()
        .map(|e| {
            let mut out = vec![0.0; d_h];
            matvec(attn, d_h, d_h, e, &mut out);
            out
        })
        .collect();
    DecodeCtx { ae }
}

/// Attention weights and context vector for one decoder step.
fn attend(enc: &EncoderStates, ctx: &DecodeCtx, g_prev: &[f64], d_h: usize) -> (Vec<f64>, Vec<f64>) {
    let m = enc.outputs.len();
    let mut scores = vec![0.0; m];
    for i in 0..m {
        scores[i] = dot(g_prev, &ctx.ae[i]);
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
    let mut context = vec![0.0; d_h];
    for (i, &a) in scores.iter().enumerate() {
        axpy(&mut context, a, &enc.outputs[i]);
    }
    (scores, context)
}

/// One decoder step cache for backward.
pub struct DecStepCache {
    pub prev_row: usize,
    pub alpha: Vec<f64>,
    pub lstm: LstmCache,
    /// Masked probabilities over the output vocabulary.
    pub probs: Vec<f64>,
}

/// Forward one decoder step; returns masked log-probabilities and the cache.
pub fn decode_step_cached(
    layout: &Layout,
    params: &Params,
    enc: &EncoderStates,
    ctx: &DecodeCtx,
    prev_row: usize,
    state: &DecState,
) -> (Vec<f64>, DecStepCache, DecState) {
    let d_h = layout.dims.d_h;
    let d_emb = layout.dims.d_emb;
    let v_out = layout.dims.v_out;
    let (alpha, context) = attend(enc, ctx, &state.h, d_h);
    let mut x = Vec::with_capacity(d_emb + d_h);
    x.extend_from_slice(params.row(layout.embed_out, prev_row));
    x.extend_from_slice(&context);
    let lstm = lstm_forward(params, &layout.decoder(), d_h, x, state.h.clone(), state.c.clone());
    let mut logits = vec![0.0; v_out];
    matvec(params.mat(layout.out_w), v_out, d_h, &lstm.h, &mut logits);
    axpy(&mut logits, 1.0, params.mat(layout.out_b));
    log_softmax_masked(&mut logits, &enc.mask);
    let probs: Vec<f64> = logits
        .iter()
        .map(|l| if l.is_finite() { l.exp() } else { 0.0 })
        .collect();
    let next = DecState { h: lstm.h.clone(), c: lstm.c.clone() };
    let cache = DecStepCache { prev_row, alpha, lstm, probs };
    (logits, cache, next)
}

/// A target token with the weight its log-probability carries in the
/// objective `L = Σ_t weight_t · log π(token_t)`.
#[derive(Debug, Clone, Copy)]
pub struct WeightedToken {
    pub token: usize,
    pub weight: f64,
}

/// Forward-only objective value for a weighted token sequence against an
/// already-built encoding and decode context.
pub fn seq_objective_prepared(
    layout: &Layout,
    params: &Params,
    enc: &EncoderStates,
    ctx: &DecodeCtx,
    targets: &[WeightedToken],
) -> f64 {
    let mut state = DecState { h: enc.final_h.clone(), c: enc.final_c.clone() };
    let mut prev_row = layout.start_row();
    let mut total = 0.0;
    for t in targets {
        let (logp, _, next) = decode_step_cached(layout, params, enc, ctx, prev_row, &state);
        total += t.weight * logp[t.token].max(PROB_FLOOR.ln());
        state = next;
        prev_row = t.token;
    }
    total
}

/// Forward + backward for one weighted token sequence. Parameter gradients
/// of `L = Σ_t weight_t · log π(token_t)` accumulate into `grad` (ascent
/// direction). Returns the objective value.
pub fn seq_grad(
    layout: &Layout,
    params: &Params,
    enc_cache: &EncCache,
    mask: &[bool],
    targets: &[WeightedToken],
    grad: &mut [f64],
) -> f64 {
    let enc = enc_cache.states(mask.to_vec(), layout.dims.d_h);
    let ctx = decode_ctx(layout, params, &enc);
    seq_grad_prepared(layout, params, enc_cache, &enc, &ctx, targets, grad)
}

/// `seq_grad` against an already-built encoding and decode context, so
/// callers scoring several sequences for one input share the forward work.
pub fn seq_grad_prepared(
    layout: &Layout,
    params: &Params,
    enc_cache: &EncCache,
    enc: &EncoderStates,
    ctx: &DecodeCtx,
    targets: &[WeightedToken],
    grad: &mut [f64],
) -> f64 {
    debug_assert_eq!(grad.len(), layout.total);
    let d_h = layout.dims.d_h;
    let d_emb = layout.dims.d_emb;
    let v_out = layout.dims.v_out;
    let m = enc_cache.steps.len();

    // Decoder forward, caching every step.
    let mut state = DecState { h: enc.final_h.clone(), c: enc.final_c.clone() };
    let mut prev_row = layout.start_row();
    let mut steps: Vec<DecStepCache> = Vec::with_capacity(targets.len());
    let mut objective = 0.0;
    for t in targets {
        let (logp, cache, next) = decode_step_cached(layout, params, enc, ctx, prev_row, &state);
        objective += t.weight * logp[t.token].max(PROB_FLOOR.ln());
        steps.push(cache);
        state = next;
        prev_row = t.token;
    }

    // Backward through the decoder.
    let dec_spec = layout.decoder();
    let mut de: Vec<Vec<f64>> = (0..m).map(|_| vec![0.0; d_h]).collect();
    let mut dh_rec = vec![0.0; d_h];
    let mut dc_rec = vec![0.0; d_h];
    let mut dx = vec![0.0; d_emb + d_h];
    let mut dh_prev = vec![0.0; d_h];
    let mut dc_prev = vec![0.0; d_h];
    let attn = params.mat(layout.attn);
    for (t, step) in steps.iter().enumerate().rev() {
        let target = targets[t];
        // Output head: dlogits = w * (1[v = a_t] - p_v) on unmasked entries.
        let mut dh = std::mem::take(&mut dh_rec);
        if target.weight != 0.0 && step.probs[target.token] > 0.0 {
            let w_mat = params.mat(layout.out_w);
            for v in 0..v_out {
                if !enc.mask[v] {
                    continue;
                }
                let d = target.weight * ((v == target.token) as u8 as f64 - step.probs[v]);
                if d == 0.0 {
                    continue;
                }
                grad[layout.out_b.range()][v] += d;
                axpy(&mut grad[layout.out_w.row(v)], d, &step.lstm.h);
                axpy(&mut dh, d, &w_mat[v * d_h..(v + 1) * d_h]);
            }
        }

        // LSTM cell.
        lstm_backward(
            params, &dec_spec, d_h, &step.lstm, &dh, &dc_rec, grad, &mut dx, &mut dh_prev,
            &mut dc_prev,
        );
        // Split dx into the previous-token embedding part and the context part.
        axpy(&mut grad[layout.embed_out.row(step.prev_row)], 1.0, &dx[..d_emb]);
        let dctx = &dx[d_emb..];

        // Attention backward: context = Σ α_i e_i, scores_i = g_prev · A e_i.
        let g_prev = &step.lstm.h_prev;
        let mut dalpha = vec![0.0; m];
        for i in 0..m {
            dalpha[i] = dot(dctx, &enc.outputs[i]);
            axpy(&mut de[i], step.alpha[i], dctx);
        }
        let inner: f64 = step.alpha.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
        let mut dscore = vec![0.0; m];
        for i in 0..m {
            dscore[i] = step.alpha[i] * (dalpha[i] - inner);
        }
        // dA += g_prev ⊗ (Σ_i ds_i e_i); de_i += ds_i · Aᵀ g_prev; dg_prev += ds_i · A e_i
        let mut weighted_e = vec![0.0; d_h];
        for i in 0..m {
            if dscore[i] != 0.0 {
                axpy(&mut weighted_e, dscore[i], &enc.outputs[i]);
            }
        }
        outer_acc(&mut grad[layout.attn.range()], g_prev, &weighted_e);
        let mut at_g = vec![0.0; d_h];
        matvec_t_acc(attn, d_h, d_h, g_prev, &mut at_g);
        for i in 0..m {
            if dscore[i] != 0.0 {
                axpy(&mut de[i], dscore[i], &at_g);
            }
        }
        let mut dg_attn = vec![0.0; d_h];
        for i in 0..m {
            if dscore[i] != 0.0 {
                axpy(&mut dg_attn, dscore[i], &ctx.ae[i]);
            }
        }

        dh_rec = dh_prev.clone();
        axpy(&mut dh_rec, 1.0, &dg_attn);
        dc_rec.copy_from_slice(&dc_prev);
    }

    // Gradients into the encoder final state (decoder initialization).
    let mut denc_h = dh_rec;
    let mut denc_c = dc_rec;

    // Backward through the encoder.
    let enc_spec = layout.encoder();
    let mut dx_e = vec![0.0; d_emb];
    for i in (0..m).rev() {
        let mut dh = std::mem::take(&mut denc_h);
        axpy(&mut dh, 1.0, &de[i]);
        lstm_backward(
            params,
            &enc_spec,
            d_h,
            &enc_cache.steps[i],
            &dh,
            &denc_c,
            grad,
            &mut dx_e,
            &mut dh_prev,
            &mut dc_prev,
        );
        axpy(&mut grad[layout.embed_in.row(enc_cache.token_rows[i])], 1.0, &dx_e);
        denc_h = dh_prev.clone();
        denc_c = dc_prev.clone();
    }

    objective
}

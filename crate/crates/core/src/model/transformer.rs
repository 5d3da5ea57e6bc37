//! Pre-norm encoder-decoder forward pass with cached activations and the exact
//! backward pass for `-log p(y | x, z)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ops::{
    apply_mask, gelu, gelu_grad, gemm, layer_norm, layer_norm_backward, linear, linear_backward, log_softmax_rows,
    log_sum_exp, Dropout, NormCache, View,
};
use super::params::{AttnIdx, Gradients, LinearIdx, ModelParams, NormIdx};
use super::vocab::decoder_input;
use super::ModelError;

/// Whether dropout masks are drawn, and from which seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Off,
    On { seed: u64 },
}

impl DropoutMode {
    /// Mask source for one stream: 0 is the encoder, `1 + z` the decoder for class `z`.
    pub(crate) fn source(self, p: f64, stream: u64) -> Dropout {
        match self {
            DropoutMode::Off => Dropout::off(),
            DropoutMode::On { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream);
                Dropout::on(rng, p)
            }
        }
    }
}

/// Per-position log-probabilities, `len × vocab` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbs {
    pub data: Vec<f64>,
    pub len: usize,
    pub vocab: usize,
}

impl LogProbs {
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.vocab..(t + 1) * self.vocab]
    }
}

pub(crate) fn check_ids(params: &ModelParams, ids: &[u32]) -> Result<(), ModelError> {
    let cfg = &params.config;
    if ids.len() > cfg.max_len {
        return Err(ModelError::SequenceTooLong {
            len: ids.len(),
            max: cfg.max_len,
        });
    }
    if let Some(&id) = ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return Err(ModelError::TokenOutOfRange {
            id,
            vocab: cfg.vocab_size,
        });
    }
    Ok(())
}

pub(crate) fn check_latent(params: &ModelParams, z: usize) -> Result<(), ModelError> {
    if z >= params.config.k {
        return Err(ModelError::LatentOutOfRange { z, k: params.config.k });
    }
    Ok(())
}

fn slice(params: &ModelParams, off: usize, len: usize) -> &[f64] {
    &params.data[off..off + len]
}

pub(crate) fn lin(params: &ModelParams, idx: LinearIdx, x: &[f64], rows: usize) -> Vec<f64> {
    linear(
        x,
        rows,
        slice(params, idx.w, idx.inp * idx.out),
        slice(params, idx.b, idx.out),
        idx.inp,
        idx.out,
    )
}

fn lin_back(params: &ModelParams, grads: &mut [f64], idx: LinearIdx, x: &[f64], dy: &[f64], rows: usize) -> Vec<f64> {
    let n = idx.inp * idx.out;
    // bias immediately follows its weight matrix in the layout
    let (dw, rest) = grads[idx.w..].split_at_mut(n);
    linear_backward(
        x,
        dy,
        rows,
        slice(params, idx.w, n),
        idx.inp,
        idx.out,
        dw,
        &mut rest[..idx.out],
    )
}

pub(crate) fn norm(params: &ModelParams, idx: NormIdx, x: &[f64], rows: usize) -> (Vec<f64>, NormCache) {
    let d = params.config.d_model;
    layer_norm(x, rows, d, slice(params, idx.g, d), slice(params, idx.b, d))
}

fn norm_back(params: &ModelParams, grads: &mut [f64], idx: NormIdx, cache: &NormCache, dy: &[f64]) -> Vec<f64> {
    let d = params.config.d_model;
    let (dg, rest) = grads[idx.g..].split_at_mut(d);
    layer_norm_backward(dy, cache, d, slice(params, idx.g, d), dg, &mut rest[..d])
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

pub(crate) struct AttnCache {
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    p: Vec<f64>,
    mask: Option<Vec<f64>>,
    o: Vec<f64>,
    tq: usize,
    tk: usize,
}

/// Scaled dot-product attention over projected `q (tq×d)`, `k, v (tk×d)`.
/// Returns the concatenated head outputs, the softmax weights and the dropout mask.
pub(crate) fn attend(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    tq: usize,
    tk: usize,
    n_heads: usize,
    d: usize,
    causal: bool,
    drop: &mut Dropout,
) -> (Vec<f64>, Vec<f64>, Option<Vec<f64>>) {
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let blk = tq * tk;
    let mut p = vec![0.0; n_heads * blk];
    for h in 0..n_heads {
        let s = &mut p[h * blk..(h + 1) * blk];
        gemm(
            tq,
            dh,
            tk,
            scale,
            View { data: &q[h * dh..], rs: d, cs: 1 },
            View { data: &k[h * dh..], rs: 1, cs: d },
            0.0,
            s,
            tk,
            1,
        );
        for i in 0..tq {
            let row = &mut s[i * tk..(i + 1) * tk];
            let limit = if causal { (i + 1).min(tk) } else { tk };
            let m = row[..limit].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in &mut row[..limit] {
                *x = (*x - m).exp();
                sum += *x;
            }
            for x in &mut row[..limit] {
                *x /= sum;
            }
            row[limit..].fill(0.0);
        }
    }
    let mut pd = p.clone();
    let mask = drop.apply(&mut pd);
    let mut o = vec![0.0; tq * d];
    for h in 0..n_heads {
        gemm(
            tq,
            tk,
            dh,
            1.0,
            View::rows(&pd[h * blk..], tk),
            View { data: &v[h * dh..], rs: d, cs: 1 },
            0.0,
            &mut o[h * dh..],
            d,
            1,
        );
    }
    (o, p, mask)
}

fn attend_backward(c: &AttnCache, dout: &[f64], n_heads: usize, d: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (tq, tk) = (c.tq, c.tk);
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let blk = tq * tk;
    let mut dq = vec![0.0; tq * d];
    let mut dk = vec![0.0; tk * d];
    let mut dv = vec![0.0; tk * d];
    let mut pd = c.p.clone();
    apply_mask(&mut pd, &c.mask);
    let mut dp = vec![0.0; blk];
    for h in 0..n_heads {
        let ph = &c.p[h * blk..(h + 1) * blk];
        gemm(
            tk,
            tq,
            dh,
            1.0,
            View::rows(&pd[h * blk..], tk).t(),
            View { data: &dout[h * dh..], rs: d, cs: 1 },
            0.0,
            &mut dv[h * dh..],
            d,
            1,
        );
        gemm(
            tq,
            dh,
            tk,
            1.0,
            View { data: &dout[h * dh..], rs: d, cs: 1 },
            View { data: &c.v[h * dh..], rs: 1, cs: d },
            0.0,
            &mut dp,
            tk,
            1,
        );
        if let Some(m) = &c.mask {
            for (x, k) in dp.iter_mut().zip(&m[h * blk..(h + 1) * blk]) {
                *x *= k;
            }
        }
        for i in 0..tq {
            let pr = &ph[i * tk..(i + 1) * tk];
            let dr = &mut dp[i * tk..(i + 1) * tk];
            let dot: f64 = pr.iter().zip(dr.iter()).map(|(a, b)| a * b).sum();
            for (x, &pv) in dr.iter_mut().zip(pr) {
                *x = pv * (*x - dot);
            }
        }
        gemm(
            tq,
            tk,
            dh,
            scale,
            View::rows(&dp, tk),
            View { data: &c.k[h * dh..], rs: d, cs: 1 },
            0.0,
            &mut dq[h * dh..],
            d,
            1,
        );
        gemm(
            tk,
            tq,
            dh,
            scale,
            View::rows(&dp, tk).t(),
            View { data: &c.q[h * dh..], rs: d, cs: 1 },
            0.0,
            &mut dk[h * dh..],
            d,
            1,
        );
    }
    (dq, dk, dv)
}

#[allow(clippy::too_many_arguments)]
fn attention(
    params: &ModelParams,
    idx: &AttnIdx,
    xq: &[f64],
    tq: usize,
    xkv: &[f64],
    tk: usize,
    causal: bool,
    drop: &mut Dropout,
) -> (Vec<f64>, AttnCache) {
    let cfg = &params.config;
    let q = lin(params, idx.q, xq, tq);
    let k = lin(params, idx.k, xkv, tk);
    let v = lin(params, idx.v, xkv, tk);
    let (o, p, mask) = attend(&q, &k, &v, tq, tk, cfg.n_heads, cfg.d_model, causal, drop);
    let out = lin(params, idx.o, &o, tq);
    (
        out,
        AttnCache {
            q,
            k,
            v,
            p,
            mask,
            o,
            tq,
            tk,
        },
    )
}

/// Returns `(d xq, d xkv)`.
fn attention_backward(
    params: &ModelParams,
    grads: &mut [f64],
    idx: &AttnIdx,
    c: &AttnCache,
    xq: &[f64],
    xkv: &[f64],
    dout: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let cfg = &params.config;
    let d_o = lin_back(params, grads, idx.o, &c.o, dout, c.tq);
    let (dq, dk, dv) = attend_backward(c, &d_o, cfg.n_heads, cfg.d_model);
    let dxq = lin_back(params, grads, idx.q, xq, &dq, c.tq);
    let mut dxkv = lin_back(params, grads, idx.k, xkv, &dk, c.tk);
    add_into(&mut dxkv, &lin_back(params, grads, idx.v, xkv, &dv, c.tk));
    (dxq, dxkv)
}

struct FfnCache {
    x: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
    mask: Option<Vec<f64>>,
}

fn ffn(params: &ModelParams, ff1: LinearIdx, ff2: LinearIdx, x: Vec<f64>, rows: usize, drop: &mut Dropout) -> (Vec<f64>, FfnCache) {
    let pre = lin(params, ff1, &x, rows);
    let mut act: Vec<f64> = pre.iter().map(|&v| gelu(v)).collect();
    let mask = drop.apply(&mut act);
    let out = lin(params, ff2, &act, rows);
    (out, FfnCache { x, pre, act, mask })
}

fn ffn_backward(params: &ModelParams, grads: &mut [f64], ff1: LinearIdx, ff2: LinearIdx, c: &FfnCache, dy: &[f64]) -> Vec<f64> {
    let rows = c.pre.len() / ff1.out;
    let mut dact = lin_back(params, grads, ff2, &c.act, dy, rows);
    apply_mask(&mut dact, &c.mask);
    for (g, &x) in dact.iter_mut().zip(&c.pre) {
        *g *= gelu_grad(x);
    }
    lin_back(params, grads, ff1, &c.x, &dact, rows)
}

/// Token embedding scaled by `sqrt(d)` plus the positional row.
pub(crate) fn embed(params: &ModelParams, ids: &[u32], start: usize) -> Vec<f64> {
    let d = params.config.d_model;
    let scale = (d as f64).sqrt();
    let mut e = vec![0.0; ids.len() * d];
    for (t, &id) in ids.iter().enumerate() {
        let row = &params.data[params.layout.embed + id as usize * d..][..d];
        let pos = &params.pos[(start + t) * d..][..d];
        for i in 0..d {
            e[t * d + i] = row[i] * scale + pos[i];
        }
    }
    e
}

pub(crate) fn add_latent(params: &ModelParams, e: &mut [f64], z: usize) {
    let d = params.config.d_model;
    let scale = (d as f64).sqrt();
    let lat = params.latent_row(z);
    for row in e.chunks_mut(d) {
        for i in 0..d {
            row[i] += lat[i] * scale;
        }
    }
}

struct EncLayerCache {
    ln1: NormCache,
    a: Vec<f64>,
    attn: AttnCache,
    ln2: NormCache,
    ffn: FfnCache,
}

/// Encoder output for one source sequence, with the activations needed for backward.
pub struct Encoded {
    pub memory: Vec<f64>,
    pub len: usize,
    ids: Vec<u32>,
    emb_mask: Option<Vec<f64>>,
    layers: Vec<EncLayerCache>,
    final_norm: NormCache,
}

pub(crate) fn encode_with(params: &ModelParams, x: &[u32], drop: &mut Dropout) -> Result<Encoded, ModelError> {
    check_ids(params, x)?;
    if x.is_empty() {
        return Err(ModelError::EmptySource);
    }
    let s = x.len();
    let mut h = embed(params, x, 0);
    let emb_mask = drop.apply(&mut h);
    let mut layers = Vec::with_capacity(params.layout.enc.len());
    for idx in &params.layout.enc {
        let (a, ln1) = norm(params, idx.ln1, &h, s);
        let (u, attn) = attention(params, &idx.attn, &a, s, &a, s, false, drop);
        add_into(&mut h, &u);
        let (b, ln2) = norm(params, idx.ln2, &h, s);
        let (f, ffn_cache) = ffn(params, idx.ff1, idx.ff2, b, s, drop);
        add_into(&mut h, &f);
        layers.push(EncLayerCache {
            ln1,
            a,
            attn,
            ln2,
            ffn: ffn_cache,
        });
    }
    let (memory, final_norm) = norm(params, params.layout.enc_norm, &h, s);
    Ok(Encoded {
        memory,
        len: s,
        ids: x.to_vec(),
        emb_mask,
        layers,
        final_norm,
    })
}

/// Runs the encoder on `x`.
pub fn encode(params: &ModelParams, x: &[u32], dm: DropoutMode) -> Result<Encoded, ModelError> {
    encode_with(params, x, &mut dm.source(params.config.dropout_p, 0))
}

fn encoder_backward(params: &ModelParams, grads: &mut [f64], enc: &Encoded, dmemory: &[f64]) {
    let d = params.config.d_model;
    let s = enc.len;
    let mut dh = norm_back(params, grads, params.layout.enc_norm, &enc.final_norm, dmemory);
    for (idx, c) in params.layout.enc.iter().zip(&enc.layers).rev() {
        let db = ffn_backward(params, grads, idx.ff1, idx.ff2, &c.ffn, &dh);
        add_into(&mut dh, &norm_back(params, grads, idx.ln2, &c.ln2, &db));
        let (dq, dkv) = attention_backward(params, grads, &idx.attn, &c.attn, &c.a, &c.a, &dh);
        let mut da = dq;
        add_into(&mut da, &dkv);
        add_into(&mut dh, &norm_back(params, grads, idx.ln1, &c.ln1, &da));
    }
    apply_mask(&mut dh, &enc.emb_mask);
    let scale = (d as f64).sqrt();
    for (t, &id) in enc.ids.iter().enumerate() {
        let row = &mut grads[params.layout.embed + id as usize * d..][..d];
        for i in 0..d {
            row[i] += dh[t * d + i] * scale;
        }
    }
    debug_assert_eq!(dh.len(), s * d);
}

struct DecLayerCache {
    ln1: NormCache,
    a: Vec<f64>,
    self_attn: AttnCache,
    ln2: NormCache,
    b: Vec<f64>,
    cross: AttnCache,
    ln3: NormCache,
    ffn: FfnCache,
}

struct Decoded {
    ids: Vec<u32>,
    z: usize,
    emb_mask: Option<Vec<f64>>,
    layers: Vec<DecLayerCache>,
    final_norm: NormCache,
    out_in: Vec<f64>,
    logp: LogProbs,
}

fn decode_with(params: &ModelParams, enc: &Encoded, y_in: &[u32], z: usize, drop: &mut Dropout) -> Result<Decoded, ModelError> {
    check_ids(params, y_in)?;
    check_latent(params, z)?;
    let t = y_in.len();
    let v = params.config.vocab_size;
    let mut h = embed(params, y_in, 0);
    add_latent(params, &mut h, z);
    let emb_mask = drop.apply(&mut h);
    let mut layers = Vec::with_capacity(params.layout.dec.len());
    for idx in &params.layout.dec {
        let (a, ln1) = norm(params, idx.ln1, &h, t);
        let (u, self_attn) = attention(params, &idx.self_attn, &a, t, &a, t, true, drop);
        add_into(&mut h, &u);
        let (b, ln2) = norm(params, idx.ln2, &h, t);
        let (u, cross) = attention(params, &idx.cross, &b, t, &enc.memory, enc.len, false, drop);
        add_into(&mut h, &u);
        let (c, ln3) = norm(params, idx.ln3, &h, t);
        let (f, ffn_cache) = ffn(params, idx.ff1, idx.ff2, c, t, drop);
        add_into(&mut h, &f);
        layers.push(DecLayerCache {
            ln1,
            a,
            self_attn,
            ln2,
            b,
            cross,
            ln3,
            ffn: ffn_cache,
        });
    }
    let (out_in, final_norm) = norm(params, params.layout.dec_norm, &h, t);
    let mut logits = lin(params, params.layout.out, &out_in, t);
    log_softmax_rows(&mut logits, v);
    Ok(Decoded {
        ids: y_in.to_vec(),
        z,
        emb_mask,
        layers,
        final_norm,
        out_in,
        logp: LogProbs {
            data: logits,
            len: t,
            vocab: v,
        },
    })
}

/// Accumulates gradients of `scale · Σ_t -log p(y_t)` and returns d(memory).
fn decoder_backward(params: &ModelParams, grads: &mut [f64], enc: &Encoded, dec: &Decoded, y: &[u32], scale: f64) -> Vec<f64> {
    let d = params.config.d_model;
    let v = params.config.vocab_size;
    let t = dec.ids.len();
    let mut dlogits = vec![0.0; t * v];
    for (r, &target) in y.iter().enumerate() {
        let lp = dec.logp.row(r);
        let row = &mut dlogits[r * v..(r + 1) * v];
        for i in 0..v {
            row[i] = scale * lp[i].exp();
        }
        row[target as usize] -= scale;
    }
    let dout = lin_back(params, grads, params.layout.out, &dec.out_in, &dlogits, t);
    let mut dh = norm_back(params, grads, params.layout.dec_norm, &dec.final_norm, &dout);
    let mut dmem = vec![0.0; enc.len * d];
    for (idx, c) in params.layout.dec.iter().zip(&dec.layers).rev() {
        let dc = ffn_backward(params, grads, idx.ff1, idx.ff2, &c.ffn, &dh);
        add_into(&mut dh, &norm_back(params, grads, idx.ln3, &c.ln3, &dc));
        let (db, dm) = attention_backward(params, grads, &idx.cross, &c.cross, &c.b, &enc.memory, &dh);
        add_into(&mut dmem, &dm);
        add_into(&mut dh, &norm_back(params, grads, idx.ln2, &c.ln2, &db));
        let (dq, dkv) = attention_backward(params, grads, &idx.self_attn, &c.self_attn, &c.a, &c.a, &dh);
        let mut da = dq;
        add_into(&mut da, &dkv);
        add_into(&mut dh, &norm_back(params, grads, idx.ln1, &c.ln1, &da));
    }
    apply_mask(&mut dh, &dec.emb_mask);
    let s = (d as f64).sqrt();
    let lat = params.layout.latent + dec.z * d;
    for (r, &id) in dec.ids.iter().enumerate() {
        let de = &dh[r * d..(r + 1) * d];
        let row = &mut grads[params.layout.embed + id as usize * d..][..d];
        for i in 0..d {
            row[i] += de[i] * s;
        }
        let lrow = &mut grads[lat..lat + d];
        for i in 0..d {
            lrow[i] += de[i] * s;
        }
    }
    dmem
}

/// Next-token log-probabilities after each prefix of `y_prefix` (which should start
/// with the begin sentinel).
pub fn forward(params: &ModelParams, x: &[u32], y_prefix: &[u32], z: usize, dm: DropoutMode) -> Result<LogProbs, ModelError> {
    let p = params.config.dropout_p;
    let enc = encode_with(params, x, &mut dm.source(p, 0))?;
    Ok(decode_with(params, &enc, y_prefix, z, &mut dm.source(p, 1 + z as u64))?.logp)
}

fn gather(logp: &LogProbs, y: &[u32]) -> f64 {
    y.iter().enumerate().map(|(t, &id)| logp.row(t)[id as usize]).sum()
}

/// `log p(y | x, z)` where `y` ends with the end sentinel. Empty `y` scores 0.
pub fn sequence_log_prob(params: &ModelParams, x: &[u32], y: &[u32], z: usize, dm: DropoutMode) -> Result<f64, ModelError> {
    let p = params.config.dropout_p;
    let enc = encode_with(params, x, &mut dm.source(p, 0))?;
    sequence_log_prob_encoded(params, &enc, y, z, dm)
}

/// As [`sequence_log_prob`], reusing an encoder pass.
pub fn sequence_log_prob_encoded(params: &ModelParams, enc: &Encoded, y: &[u32], z: usize, dm: DropoutMode) -> Result<f64, ModelError> {
    check_latent(params, z)?;
    if y.is_empty() {
        return Ok(0.0);
    }
    let dec = decode_with(params, enc, &decoder_input(y), z, &mut dm.source(params.config.dropout_p, 1 + z as u64))?;
    Ok(gather(&dec.logp, y))
}

/// `log p(y | z, x)` for every class, sharing one encoder pass.
pub fn per_latent_log_probs(params: &ModelParams, x: &[u32], y: &[u32], dm: DropoutMode) -> Result<Vec<f64>, ModelError> {
    let enc = encode_with(params, x, &mut dm.source(params.config.dropout_p, 0))?;
    (0..params.config.k)
        .map(|z| sequence_log_prob_encoded(params, &enc, y, z, dm))
        .collect()
}

/// `log((1/K) Σ_z p(y | z, x))` under the uniform prior.
pub fn mixture_log_likelihood(params: &ModelParams, x: &[u32], y: &[u32], dm: DropoutMode) -> Result<f64, ModelError> {
    let lps = per_latent_log_probs(params, x, y, dm)?;
    Ok(log_sum_exp(&lps) - (params.config.k as f64).ln())
}

/// Adds `scale · ∇(-log p(y | x, z))` into `grads` and returns `-log p`.
pub fn accumulate_gradient(
    params: &ModelParams,
    x: &[u32],
    y: &[u32],
    z: usize,
    dm: DropoutMode,
    scale: f64,
    grads: &mut Gradients,
) -> Result<f64, ModelError> {
    check_latent(params, z)?;
    if y.is_empty() {
        check_ids(params, x)?;
        return Ok(0.0);
    }
    let p = params.config.dropout_p;
    let enc = encode_with(params, x, &mut dm.source(p, 0))?;
    let dec = decode_with(params, &enc, &decoder_input(y), z, &mut dm.source(p, 1 + z as u64))?;
    let nll = -gather(&dec.logp, y);
    let dmem = decoder_backward(params, &mut grads.data, &enc, &dec, y, scale);
    encoder_backward(params, &mut grads.data, &enc, &dmem);
    Ok(nll)
}

/// Gradient of `-log p(y | x, z)` with respect to every parameter.
pub fn backward(params: &ModelParams, x: &[u32], y: &[u32], z: usize, dm: DropoutMode) -> Result<Gradients, ModelError> {
    let mut g = Gradients::zeros(params);
    accumulate_gradient(params, x, y, z, dm, 1.0, &mut g)?;
    Ok(g)
}

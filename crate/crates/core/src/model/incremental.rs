use super::ops::{gelu, log_softmax_rows, Dropout};
use super::params::ModelParams;
use super::transformer::{add_latent, attend, check_ids, check_latent, embed, lin, norm, Encoded};
use super::ModelError;

/// Decoder for one source that advances one token at a time, keeping per-layer
/// key/value caches. Cross-attention keys and values are computed once and shared
/// by every hypothesis and latent class.
pub struct IncrementalDecoder<'a> {
    params: &'a ModelParams,
    cross: Vec<(Vec<f64>, Vec<f64>)>,
    src_len: usize,
}

/// Self-attention caches of one partial hypothesis.
#[derive(Debug, Clone)]
pub struct DecoderState {
    pub z: usize,
    pub pos: usize,
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
}

impl<'a> IncrementalDecoder<'a> {
    pub fn new(params: &'a ModelParams, enc: &Encoded) -> Self {
        let cross = params
            .layout
            .dec
            .iter()
            .map(|idx| {
                (
                    lin(params, idx.cross.k, &enc.memory, enc.len),
                    lin(params, idx.cross.v, &enc.memory, enc.len),
                )
            })
            .collect();
        Self {
            params,
            cross,
            src_len: enc.len,
        }
    }

    pub fn params(&self) -> &ModelParams {
        self.params
    }

    pub fn start(&self, z: usize) -> Result<DecoderState, ModelError> {
        check_latent(self.params, z)?;
        let layers = self.params.layout.dec.len();
        Ok(DecoderState {
            z,
            pos: 0,
            keys: vec![Vec::new(); layers],
            values: vec![Vec::new(); layers],
        })
    }

    /// Feeds `token` at the next position and returns next-token log-probabilities.
    pub fn step(&self, state: &mut DecoderState, token: u32) -> Result<Vec<f64>, ModelError> {
        let p = self.params;
        let cfg = &p.config;
        check_ids(p, &[token])?;
        if state.pos >= cfg.max_len {
            return Err(ModelError::SequenceTooLong {
                len: state.pos + 1,
                max: cfg.max_len,
            });
        }
        let (d, nh) = (cfg.d_model, cfg.n_heads);
        let mut off = Dropout::off();
        let mut h = embed(p, &[token], state.pos);
        add_latent(p, &mut h, state.z);
        for (l, idx) in p.layout.dec.iter().enumerate() {
            let (a, _) = norm(p, idx.ln1, &h, 1);
            let q = lin(p, idx.self_attn.q, &a, 1);
            state.keys[l].extend(lin(p, idx.self_attn.k, &a, 1));
            state.values[l].extend(lin(p, idx.self_attn.v, &a, 1));
            let t = state.pos + 1;
            let (o, _, _) = attend(&q, &state.keys[l], &state.values[l], 1, t, nh, d, false, &mut off);
            add(&mut h, &lin(p, idx.self_attn.o, &o, 1));
            let (b, _) = norm(p, idx.ln2, &h, 1);
            let q = lin(p, idx.cross.q, &b, 1);
            let (ck, cv) = &self.cross[l];
            let (o, _, _) = attend(&q, ck, cv, 1, self.src_len, nh, d, false, &mut off);
            add(&mut h, &lin(p, idx.cross.o, &o, 1));
            let (c, _) = norm(p, idx.ln3, &h, 1);
            let act: Vec<f64> = lin(p, idx.ff1, &c, 1).into_iter().map(gelu).collect();
            add(&mut h, &lin(p, idx.ff2, &act, 1));
        }
        let (out_in, _) = norm(p, p.layout.dec_norm, &h, 1);
        let mut logits = lin(p, p.layout.out, &out_in, 1);
        log_softmax_rows(&mut logits, cfg.vocab_size);
        state.pos += 1;
        Ok(logits)
    }
}

fn add(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

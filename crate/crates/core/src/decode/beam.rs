use std::cmp::Ordering;

use crate::model::{DecoderState, IncrementalDecoder, ModelError, BOS, EOS, PAD};

/// Next-token distribution source for decoding under one latent class.
pub trait StepScorer: Sync {
    type State: Clone + Send;

    fn num_latents(&self) -> usize;

    /// Longest token sequence (sentinels excluded) the scorer can extend.
    fn max_tokens(&self) -> usize;

    /// State after the start sentinel, with the log-probabilities of the first token.
    fn start(&self, z: usize) -> Result<(Self::State, Vec<f64>), ModelError>;

    /// Appends `token`; returns log-probabilities of the next one.
    fn step(&self, state: &mut Self::State, token: u32) -> Result<Vec<f64>, ModelError>;
}

impl StepScorer for IncrementalDecoder<'_> {
    type State = DecoderState;

    fn num_latents(&self) -> usize {
        self.params().config.k
    }

    fn max_tokens(&self) -> usize {
        // Positions hold the start sentinel plus every emitted token.
        self.params().config.max_len.saturating_sub(1)
    }

    fn start(&self, z: usize) -> Result<(DecoderState, Vec<f64>), ModelError> {
        let mut s = IncrementalDecoder::start(self, z)?;
        let row = IncrementalDecoder::step(self, &mut s, BOS)?;
        Ok((s, row))
    }

    fn step(&self, state: &mut DecoderState, token: u32) -> Result<Vec<f64>, ModelError> {
        IncrementalDecoder::step(self, state, token)
    }
}

/// First-order Markov toy model: `log_probs[z][prev][next]`, where `prev` is the
/// start sentinel for the first token. Rows are indexed by token id.
#[derive(Debug, Clone)]
pub struct TransitionModel {
    pub log_probs: Vec<Vec<Vec<f64>>>,
    pub max_tokens: usize,
}

impl TransitionModel {
    /// Builds from probability tables, normalizing each row.
    pub fn from_probs(tables: &[Vec<Vec<f64>>], max_tokens: usize) -> Self {
        let log_probs = tables
            .iter()
            .map(|t| {
                t.iter()
                    .map(|row| {
                        let s: f64 = row.iter().sum();
                        row.iter().map(|p| (p / s).ln()).collect()
                    })
                    .collect()
            })
            .collect();
        Self { log_probs, max_tokens }
    }

    /// `log p(tokens, EOS)` under class `z`.
    pub fn sequence_log_prob(&self, z: usize, tokens: &[u32]) -> f64 {
        let t = &self.log_probs[z];
        let mut prev = BOS;
        let mut lp = 0.0;
        for &tok in tokens.iter().chain(std::iter::once(&EOS)) {
            lp += t[prev as usize][tok as usize];
            prev = tok;
        }
        lp
    }
}

impl StepScorer for TransitionModel {
    /// (class, previous token)
    type State = (usize, u32);

    fn num_latents(&self) -> usize {
        self.log_probs.len()
    }

    fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    fn start(&self, z: usize) -> Result<((usize, u32), Vec<f64>), ModelError> {
        let k = self.log_probs.len();
        let t = self.log_probs.get(z).ok_or(ModelError::LatentOutOfRange { z, k })?;
        Ok(((z, BOS), t[BOS as usize].clone()))
    }

    fn step(&self, state: &mut (usize, u32), token: u32) -> Result<Vec<f64>, ModelError> {
        state.1 = token;
        Ok(self.log_probs[state.0][token as usize].clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamConfig {
    pub beam_width: usize,
    /// Token budget per hypothesis, sentinels excluded.
    pub max_len: usize,
    /// Length-normalization exponent; 0 ranks by raw log-probability.
    pub alpha: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            beam_width: 10,
            max_len: 200,
            alpha: 0.0,
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.beam_width == 0 || self.max_len == 0 {
            return Err("beam_width and max_len must be positive".into());
        }
        if !(self.alpha >= 0.0) {
            return Err(format!("alpha must be non-negative, got {}", self.alpha));
        }
        Ok(())
    }
}

/// A finished, sentinel-free decode.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<u32>,
    pub log_prob: f64,
    /// 0-based latent class.
    pub z: usize,
}

impl Hypothesis {
    /// `log_prob / (len + 1)^alpha`, counting the end sentinel.
    pub fn score(&self, alpha: f64) -> f64 {
        if alpha == 0.0 {
            self.log_prob
        } else {
            self.log_prob / ((self.tokens.len() + 1) as f64).powf(alpha)
        }
    }
}

/// Best-first order: higher score, then lexicographically smaller tokens.
pub(crate) fn rank_order(a: &Hypothesis, b: &Hypothesis, alpha: f64) -> Ordering {
    b.score(alpha)
        .total_cmp(&a.score(alpha))
        .then_with(|| a.tokens.cmp(&b.tokens))
}

struct Live<S> {
    tokens: Vec<u32>,
    log_prob: f64,
    state: S,
    next: Vec<f64>,
}

/// Beam search under latent class `z`. Each step expands every live hypothesis by
/// every token, keeps the `beam_width` best by log-probability, and sets aside the
/// kept candidates that end with the end sentinel. Sentinel and padding ids are never
/// emitted as tokens, and the end sentinel is not allowed first. Output is the best `beam_width` finished hypotheses, ranked by
/// length-normalized score; ties go to the lexicographically smaller token sequence.
pub fn beam_search<S: StepScorer>(scorer: &S, z: usize, bc: &BeamConfig) -> Result<Vec<Hypothesis>, ModelError> {
    let width = bc.beam_width.max(1);
    let max_tokens = bc.max_len.min(scorer.max_tokens());
    let (state, next) = scorer.start(z)?;
    let mut live = vec![Live {
        tokens: Vec::new(),
        log_prob: 0.0,
        state,
        next,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    while !live.is_empty() {
        // (log_prob, parent, token)
        let mut cands: Vec<(f64, usize, u32)> = Vec::new();
        for (pi, h) in live.iter().enumerate() {
            let at_limit = h.tokens.len() >= max_tokens;
            for (tok, &lp) in h.next.iter().enumerate() {
                let tok = tok as u32;
                if tok == BOS || tok == PAD || (tok == EOS && h.tokens.is_empty()) || (tok != EOS && at_limit) {
                    continue;
                }
                if lp.is_finite() {
                    cands.push((h.log_prob + lp, pi, tok));
                }
            }
        }
        cands.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| live[a.1].tokens.cmp(&live[b.1].tokens))
                .then(a.2.cmp(&b.2))
        });
        cands.truncate(width);
        let mut next_live = Vec::new();
        for (lp, pi, tok) in cands {
            let parent = &live[pi];
            if tok == EOS {
                finished.push(Hypothesis {
                    tokens: parent.tokens.clone(),
                    log_prob: lp,
                    z,
                });
                continue;
            }
            let mut state = parent.state.clone();
            let next = scorer.step(&mut state, tok)?;
            let mut tokens = parent.tokens.clone();
            tokens.push(tok);
            next_live.push(Live {
                tokens,
                log_prob: lp,
                state,
                next,
            });
        }
        live = next_live;
        // Log-probabilities only fall, so with raw scores no live hypothesis can
        // overtake a full set of finished ones.
        if bc.alpha == 0.0 && finished.len() >= width {
            let mut lps: Vec<f64> = finished.iter().map(|h| h.log_prob).collect();
            lps.sort_by(|a, b| b.total_cmp(a));
            let kth = lps[width - 1];
            if live.iter().all(|h| h.log_prob < kth) {
                break;
            }
        }
    }
    finished.sort_by(|a, b| rank_order(a, b, bc.alpha));
    finished.truncate(width);
    Ok(finished)
}

//! Online hard-EM training of the latent-mixture model and the two-phase
//! pre-train / fine-tune schedule.

mod optim;
mod synthetic;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::augment::ReactionExample;
use crate::chem::tokenize;
use crate::model::{
    accumulate_gradient, encode, mixture_log_likelihood, save_checkpoint, sequence_log_prob_encoded, target_ids,
    DropoutMode, Gradients, ModelError, ModelParams, Vocab,
};

pub use optim::{clip_grad_norm, Adam, Schedule};
pub use synthetic::{
    make_synthetic_multimodal, make_synthetic_multimodal_excluding, Mode, SyntheticExample, SyntheticTask, ALPHABET,
    MODES,
};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite loss on example {id}")]
    NonFiniteLoss { id: String },
    #[error("empty batch")]
    EmptyBatch,
    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Pretrain,
    Finetune,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Pretrain => "pretrain",
            Phase::Finetune => "finetune",
        })
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pretrain" => Ok(Phase::Pretrain),
            "finetune" => Ok(Phase::Finetune),
            _ => Err(format!("unknown phase {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub peak_lr: f64,
    pub schedule: Schedule,
    /// Global gradient-norm bound; 0 disables clipping.
    pub clip_norm: f64,
    pub max_steps: usize,
    /// Steps between metric records (validation, latent usage).
    pub eval_interval: usize,
    /// Steps between checkpoints; 0 writes only the final one.
    pub checkpoint_interval: usize,
    pub seed: u64,
    pub phase: Phase,
    /// Stop once the validation NLL per token is at or below this value.
    pub target_val_nll: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            peak_lr: 1e-3,
            schedule: Schedule::InverseSqrt { warmup: 400 },
            clip_norm: 1.0,
            max_steps: 10_000,
            eval_interval: 200,
            checkpoint_interval: 0,
            seed: 0,
            phase: Phase::Finetune,
            target_val_nll: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.batch_size == 0 || self.max_steps == 0 || self.eval_interval == 0 {
            return Err("batch_size, max_steps and eval_interval must be positive".into());
        }
        if self.peak_lr <= 0.0 {
            return Err("peak learning rate must be positive".into());
        }
        if let Schedule::InverseSqrt { warmup } = self.schedule {
            if warmup > self.max_steps {
                return Err(format!("warmup {warmup} exceeds max_steps {}", self.max_steps));
            }
        }
        Ok(())
    }
}

/// Encoded training pair; `target` ends with the end sentinel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqPair {
    pub id: String,
    pub source: Vec<u32>,
    pub target: Vec<u32>,
}

impl SeqPair {
    pub fn new<S: AsRef<str>>(id: impl Into<String>, source: &[S], target: &[S], vocab: &Vocab) -> Result<Self, TrainError> {
        let enc = |t: &[S]| {
            vocab
                .encode(t)
                .map_err(|e| TrainError::VocabMismatch(e.to_string()))
        };
        Ok(Self {
            id: id.into(),
            source: enc(source)?,
            target: target_ids(&enc(target)?),
        })
    }
}

/// Tokenized (product → reactants) pairs.
pub fn encode_reactions(examples: &[ReactionExample], vocab: &Vocab) -> Result<Vec<SeqPair>, TrainError> {
    examples
        .iter()
        .map(|e| {
            let src = tokenize(e.source_text()).map_err(|err| TrainError::VocabMismatch(format!("{}: {err}", e.id)))?;
            let tgt = tokenize(&e.target_text()).map_err(|err| TrainError::VocabMismatch(format!("{}: {err}", e.id)))?;
            SeqPair::new(e.id.clone(), &src.tokens, &tgt.tokens, vocab)
        })
        .collect()
}

/// Vocabulary over every token of the given reactions (both sides).
pub fn reaction_vocab<'a, I>(examples: I) -> Vocab
where
    I: IntoIterator<Item = &'a ReactionExample>,
{
    let mut tokens = Vec::new();
    for e in examples {
        for s in [e.source_text().to_string(), e.target_text()] {
            if let Ok(t) = tokenize(&s) {
                tokens.extend(t.tokens);
            }
        }
    }
    Vocab::from_tokens(tokens)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub id: String,
    /// Selected class (0-based).
    pub chosen: usize,
    /// `-log p(y | x, z)` per class, dropout off.
    pub losses: Vec<f64>,
}

/// Selection record of one hard-EM step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HardEMTrace {
    pub records: Vec<TraceRecord>,
}

/// Lowest index among the minima.
pub fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Dropout seed of example `i` at `step`.
pub fn dropout_seed(seed: u64, step: usize, i: usize) -> u64 {
    mix64(mix64(mix64(seed) ^ step as u64) ^ i as u64)
}

/// Per-class losses with dropout off, sharing one encoder pass.
pub fn selection_losses(params: &ModelParams, ex: &SeqPair) -> Result<Vec<f64>, TrainError> {
    let enc = encode(params, &ex.source, DropoutMode::Off)?;
    (0..params.config.k)
        .map(|z| {
            let nll = -sequence_log_prob_encoded(params, &enc, &ex.target, z, DropoutMode::Off)?;
            if nll.is_finite() {
                Ok(nll)
            } else {
                Err(TrainError::NonFiniteLoss { id: ex.id.clone() })
            }
        })
        .collect()
}

struct ExampleResult {
    record: TraceRecord,
    nll: f64,
    grads: Gradients,
}

fn example_pass(params: &ModelParams, ex: &SeqPair, scale: f64, seed: u64) -> Result<ExampleResult, TrainError> {
    let losses = selection_losses(params, ex)?;
    let chosen = argmin_first(&losses);
    let mut grads = Gradients::zeros(params);
    let nll = accumulate_gradient(
        params,
        &ex.source,
        &ex.target,
        chosen,
        DropoutMode::On { seed },
        scale,
        &mut grads,
    )?;
    if !nll.is_finite() {
        return Err(TrainError::NonFiniteLoss { id: ex.id.clone() });
    }
    Ok(ExampleResult {
        record: TraceRecord {
            id: ex.id.clone(),
            chosen,
            losses,
        },
        nll,
        grads,
    })
}

/// Batch gradient of the hard-EM objective (per-token mean loss). Examples are
/// processed in parallel and reduced in batch order.
pub fn hard_em_gradient(
    params: &ModelParams,
    batch: &[SeqPair],
    seed: u64,
    step: usize,
) -> Result<(Gradients, HardEMTrace, f64), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let tokens: usize = batch.iter().map(|e| e.target.len()).sum();
    let scale = 1.0 / tokens.max(1) as f64;
    let chunk = rayon::current_num_threads().max(1);
    let mut total = Gradients::zeros(params);
    let mut trace = HardEMTrace::default();
    let mut nll_sum = 0.0;
    for (c, part) in batch.chunks(chunk).enumerate() {
        let results: Vec<Result<ExampleResult, TrainError>> = part
            .par_iter()
            .enumerate()
            .map(|(j, ex)| example_pass(params, ex, scale, dropout_seed(seed, step, c * chunk + j)))
            .collect();
        for r in results {
            let r = r?;
            total.add_scaled(&r.grads, 1.0);
            nll_sum += r.nll;
            trace.records.push(r.record);
        }
    }
    Ok((total, trace, nll_sum * scale))
}

/// One online hard-EM update: per-class selection with dropout off, gradient of the
/// selected class with dropout on, clipping, and one optimizer step. `step` is 1-based.
pub fn hard_em_step(
    params: &mut ModelParams,
    opt: &mut Adam,
    batch: &[SeqPair],
    cfg: &TrainConfig,
    step: usize,
) -> Result<(HardEMTrace, f64), TrainError> {
    let (mut grads, trace, loss) = hard_em_gradient(params, batch, cfg.seed, step)?;
    clip_grad_norm(&mut grads.data, cfg.clip_norm);
    let lr = cfg.schedule.rate(cfg.peak_lr, step);
    opt.update(&mut params.data, &grads.data, lr);
    Ok((trace, loss))
}

/// Mean validation mixture NLL per target token, dropout off.
pub fn validation_nll(params: &ModelParams, val: &[SeqPair]) -> Result<f64, TrainError> {
    if val.is_empty() {
        return Ok(f64::NAN);
    }
    let parts: Vec<Result<(f64, usize), TrainError>> = val
        .par_iter()
        .map(|e| {
            let ll = mixture_log_likelihood(params, &e.source, &e.target, DropoutMode::Off)?;
            Ok((-ll, e.target.len()))
        })
        .collect();
    let mut nll = 0.0;
    let mut tokens = 0;
    for p in parts {
        let (a, b) = p?;
        nll += a;
        tokens += b;
    }
    Ok(nll / tokens.max(1) as f64)
}

/// One metrics-log record.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub step: usize,
    pub phase: Phase,
    pub train_loss: f64,
    pub val_nll: f64,
    pub usage: Vec<usize>,
}

impl MetricRecord {
    pub fn to_tsv(&self) -> String {
        let usage: Vec<String> = self.usage.iter().map(|u| u.to_string()).collect();
        format!(
            "{}\t{}\t{:.6}\t{:.6}\t{}",
            self.step,
            self.phase,
            self.train_loss,
            self.val_nll,
            usage.join(",")
        )
    }
}

/// Where `train` writes its side outputs.
#[derive(Default)]
pub struct TrainOutputs<'a> {
    pub metrics: Option<&'a mut dyn Write>,
    pub checkpoint_dir: Option<&'a Path>,
    pub vocab: Option<&'a Vocab>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub metrics: Vec<MetricRecord>,
    pub steps: usize,
    /// First evaluated step whose validation NLL met the target.
    pub reached_target_at: Option<usize>,
    pub checkpoints: Vec<PathBuf>,
}

fn write_checkpoint(dir: &Path, phase: Phase, step: usize, params: &ModelParams, vocab: &Vocab) -> Result<PathBuf, TrainError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{phase}-step{step}.ckpt"));
    save_checkpoint(BufWriter::new(File::create(&path)?), params, vocab)?;
    Ok(path)
}

/// Shuffled-epoch hard-EM training with a fresh optimizer.
pub fn train(
    params: &mut ModelParams,
    data: &[SeqPair],
    val: &[SeqPair],
    cfg: &TrainConfig,
    mut out: TrainOutputs<'_>,
) -> Result<TrainReport, TrainError> {
    cfg.validate().map_err(|m| TrainError::Model(ModelError::InvalidConfig(m)))?;
    if data.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let k = params.config.k;
    let mut opt = Adam::new(params.data.len());
    let mut report = TrainReport::default();
    let mut usage = vec![0usize; k];
    let mut loss_sum = 0.0;
    let mut loss_n = 0usize;
    let mut step = 0;
    let mut epoch = 0u64;
    'outer: loop {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix64(cfg.seed ^ mix64(epoch))));
        epoch += 1;
        for idx in order.chunks(cfg.batch_size) {
            step += 1;
            let batch: Vec<SeqPair> = idx.iter().map(|&i| data[i].clone()).collect();
            let (trace, loss) = hard_em_step(params, &mut opt, &batch, cfg, step)?;
            for r in &trace.records {
                usage[r.chosen] += 1;
            }
            loss_sum += loss;
            loss_n += 1;
            let last = step == cfg.max_steps;
            if step % cfg.eval_interval == 0 || last {
                let val_nll = validation_nll(params, val)?;
                let rec = MetricRecord {
                    step,
                    phase: cfg.phase,
                    train_loss: loss_sum / loss_n as f64,
                    val_nll,
                    usage: std::mem::replace(&mut usage, vec![0; k]),
                };
                info!("{}", rec.to_tsv());
                if let Some(w) = out.metrics.as_deref_mut() {
                    writeln!(w, "{}", rec.to_tsv())?;
                }
                report.metrics.push(rec);
                loss_sum = 0.0;
                loss_n = 0;
                if let Some(target) = cfg.target_val_nll {
                    if val_nll <= target {
                        report.reached_target_at = Some(step);
                        report.steps = step;
                        break 'outer;
                    }
                }
            }
            if let (Some(dir), Some(vocab)) = (out.checkpoint_dir, out.vocab) {
                if cfg.checkpoint_interval > 0 && step % cfg.checkpoint_interval == 0 && !last {
                    report.checkpoints.push(write_checkpoint(dir, cfg.phase, step, params, vocab)?);
                }
            }
            if last {
                report.steps = step;
                break 'outer;
            }
        }
    }
    if let (Some(dir), Some(vocab)) = (out.checkpoint_dir, out.vocab) {
        report.checkpoints.push(write_checkpoint(dir, cfg.phase, report.steps, params, vocab)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmin_prefers_lowest_index() {
        assert_eq!(argmin_first(&[2.0, 1.5, 3.0]), 1);
        assert_eq!(argmin_first(&[1.0, 1.0, 0.5, 0.5]), 2);
        assert_eq!(argmin_first(&[4.0]), 0);
    }

    #[test]
    fn dropout_seeds_differ() {
        assert_ne!(dropout_seed(1, 1, 0), dropout_seed(1, 1, 1));
        assert_ne!(dropout_seed(1, 1, 0), dropout_seed(1, 2, 0));
        assert_eq!(dropout_seed(3, 4, 5), dropout_seed(3, 4, 5));
    }
}

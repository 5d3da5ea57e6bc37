use std::io::Write;
use std::path::PathBuf;

use log::{info, warn};
use retromix::augment::ReactionExample;
use retromix::model::{init_params, load_checkpoint, save_checkpoint, ModelConfig, Vocab};
use retromix::training::{encode_reactions, reaction_vocab, train as run_training, Phase, Schedule, SeqPair, TrainConfig, TrainOutputs};

use crate::config::Resolver;
use crate::error::CliError;
use crate::io::{create, open, read_records};
use crate::TrainArgs;

fn model_config(a: &TrainArgs, cfg: &mut Resolver, vocab_size: usize) -> Result<ModelConfig, CliError> {
    let preset: String = cfg.value("preset", a.preset.clone(), "toy".into())?;
    let k = cfg.value("k", a.k, 1)?;
    let base = match preset.as_str() {
        "desk" => ModelConfig::desk(vocab_size, k),
        "toy" => ModelConfig::toy(vocab_size, k),
        "tiny" => ModelConfig::tiny(vocab_size, k),
        other => return Err(CliError::Usage(format!("unknown preset {other:?} (desk|toy|tiny)"))),
    };
    let mc = ModelConfig {
        vocab_size,
        k,
        d_model: cfg.value("d_model", a.d_model, base.d_model)?,
        n_heads: cfg.value("n_heads", a.n_heads, base.n_heads)?,
        n_enc_layers: cfg.value("n_enc_layers", a.n_enc_layers, base.n_enc_layers)?,
        n_dec_layers: cfg.value("n_dec_layers", a.n_dec_layers, base.n_dec_layers)?,
        d_ff: cfg.value("d_ff", a.d_ff, base.d_ff)?,
        dropout_p: cfg.value("dropout", a.dropout, base.dropout_p)?,
        max_len: cfg.value("max_len", a.max_len, base.max_len)?,
    };
    mc.validate()?;
    Ok(mc)
}

fn architecture_flags_given(a: &TrainArgs) -> bool {
    a.preset.is_some()
        || a.k.is_some()
        || a.d_model.is_some()
        || a.n_heads.is_some()
        || a.n_enc_layers.is_some()
        || a.n_dec_layers.is_some()
        || a.d_ff.is_some()
        || a.dropout.is_some()
        || a.max_len.is_some()
        || a.vocab_corpus.is_some()
}

/// Encodes examples, dropping those longer than the model accepts.
fn encode(data: &[ReactionExample], vocab: &Vocab, max_len: usize, what: &str) -> Result<Vec<SeqPair>, CliError> {
    let pairs = encode_reactions(data, vocab).map_err(|e| CliError::Data(format!("{what}: {e}")))?;
    let n = pairs.len();
    let kept: Vec<SeqPair> = pairs
        .into_iter()
        .filter(|p| p.source.len() <= max_len && p.target.len() <= max_len)
        .collect();
    if kept.len() < n {
        warn!("{what}: {} examples exceed max_len {max_len} and were dropped", n - kept.len());
    }
    Ok(kept)
}

pub fn train(a: TrainArgs, mut cfg: Resolver, phase: Phase) -> Result<(), CliError> {
    let train_path: PathBuf = cfg.required("train", a.train.clone())?;
    let valid_path: Option<PathBuf> = cfg.optional("valid", a.valid.clone())?;
    let out_dir: PathBuf = cfg.required("out_dir", a.out_dir.clone())?;
    let init: Option<PathBuf> = cfg.optional("init", a.init.clone())?;
    let seed = cfg.value("seed", a.seed, 0)?;
    let train_data = read_records(&train_path)?;
    let valid_data = match &valid_path {
        Some(p) => read_records(p)?,
        None => Vec::new(),
    };
    let (mut params, vocab) = match &init {
        Some(p) => {
            if architecture_flags_given(&a) {
                return Err(CliError::Usage("architecture and vocabulary flags conflict with --init".into()));
            }
            let (params, vocab) = load_checkpoint(open(p)?).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            for (k, v) in params.config.to_pairs() {
                cfg.note(k, v);
            }
            (params, vocab)
        }
        None => {
            let files: Option<Vec<PathBuf>> = cfg.optional("vocab_corpus", a.vocab_corpus.clone())?;
            let vocab = match files {
                Some(files) => {
                    let mut all = Vec::new();
                    for f in &files {
                        all.extend(read_records(f)?);
                    }
                    reaction_vocab(&all)
                }
                None => reaction_vocab(train_data.iter().chain(&valid_data)),
            };
            let mc = model_config(&a, &mut cfg, vocab.len())?;
            (init_params(&mc, seed)?, vocab)
        }
    };
    let warmup = cfg.value("warmup", a.warmup, 400)?;
    let tc = TrainConfig {
        batch_size: cfg.value("batch_size", a.batch_size, 32)?,
        peak_lr: cfg.value("lr", a.lr, 1e-3)?,
        schedule: if warmup == 0 { Schedule::Constant } else { Schedule::InverseSqrt { warmup } },
        clip_norm: cfg.value("clip_norm", a.clip_norm, 1.0)?,
        max_steps: cfg.value("steps", a.steps, 10_000)?,
        eval_interval: cfg.value("eval_interval", a.eval_interval, 200)?,
        checkpoint_interval: cfg.value("checkpoint_interval", a.checkpoint_interval, 0)?,
        seed,
        phase,
        target_val_nll: cfg.optional("target_val_nll", a.target_val_nll)?,
    };
    cfg.finish()?;
    tc.validate().map_err(CliError::Usage)?;
    cfg.note("phase", phase);
    cfg.note("vocab_size", vocab.len());
    cfg.note("parameters", params.data.len());

    let max_len = params.config.max_len;
    let train_pairs = encode(&train_data, &vocab, max_len, "training data")?;
    let valid_pairs = encode(&valid_data, &vocab, max_len, "validation data")?;
    if train_pairs.is_empty() {
        return Err(CliError::Data(format!("{}: no usable training examples", train_path.display())));
    }
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    cfg.write(&out_dir.join(format!("{phase}.config")))?;
    info!(
        "{phase}: {} training / {} validation examples, {} parameters",
        train_pairs.len(),
        valid_pairs.len(),
        params.data.len()
    );

    let metrics_path = out_dir.join(format!("{phase}-metrics.tsv"));
    let mut metrics = create(&metrics_path)?;
    writeln!(metrics, "step\tphase\ttrain_loss\tval_nll\tlatent_usage").map_err(|e| CliError::io(&metrics_path, e))?;
    let report = run_training(
        &mut params,
        &train_pairs,
        &valid_pairs,
        &tc,
        TrainOutputs {
            metrics: Some(&mut metrics),
            checkpoint_dir: Some(&out_dir),
            vocab: Some(&vocab),
        },
    )?;
    metrics.flush().map_err(|e| CliError::io(&metrics_path, e))?;
    let model_path = out_dir.join("model.ckpt");
    let mut w = create(&model_path)?;
    save_checkpoint(&mut w, &params, &vocab)?;
    w.flush().map_err(|e| CliError::io(&model_path, e))?;
    match report.reached_target_at {
        Some(s) => info!("validation target reached at step {s}"),
        None => info!("finished after {} steps", report.steps),
    }
    Ok(())
}

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use super::beam::{beam_search, BeamConfig, Hypothesis, StepScorer};
use crate::chem::{MolGraph, MoleculeSet};
use crate::model::{encode, DropoutMode, IncrementalDecoder, ModelError, ModelParams, Vocab};

/// One merged prediction, keyed by its canonical form.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub key: String,
    pub tokens: Vec<u32>,
    pub log_prob: f64,
    pub score: f64,
    /// 0-based latent class of the best-scoring hypothesis with this key.
    pub z: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionList {
    pub predictions: Vec<Prediction>,
    /// Hypotheses pooled across classes.
    pub pooled: usize,
    /// Pooled hypotheses that had no canonical form.
    pub invalid: usize,
}

impl PredictionList {
    pub fn invalid_rate(&self) -> f64 {
        if self.pooled == 0 {
            0.0
        } else {
            self.invalid as f64 / self.pooled as f64
        }
    }
}

/// Beam search under every latent class, with width `max(beam_width, k)`.
pub fn predict_pools<S: StepScorer>(scorer: &S, k: usize, bc: &BeamConfig) -> Result<Vec<Vec<Hypothesis>>, ModelError> {
    let bc = BeamConfig {
        beam_width: bc.beam_width.max(k),
        ..*bc
    };
    (0..scorer.num_latents())
        .into_par_iter()
        .map(|z| beam_search(scorer, z, &bc))
        .collect()
}

/// Pools hypotheses, drops those `key` rejects, collapses equal keys to the best
/// one and returns the top `k`. Order: score descending, then lower class, then key.
pub fn merge_pools<F>(pools: &[Vec<Hypothesis>], k: usize, alpha: f64, key: F) -> PredictionList
where
    F: Fn(&[u32]) -> Option<String> + Sync,
{
    let all: Vec<&Hypothesis> = pools.iter().flatten().collect();
    let keyed: Vec<Option<String>> = all.par_iter().map(|h| key(&h.tokens)).collect();
    let mut valid: Vec<Prediction> = Vec::new();
    let mut invalid = 0;
    for (h, key) in all.iter().zip(keyed) {
        match key {
            Some(key) => valid.push(Prediction {
                key,
                tokens: h.tokens.clone(),
                log_prob: h.log_prob,
                score: h.score(alpha),
                z: h.z,
            }),
            None => invalid += 1,
        }
    }
    valid.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.z.cmp(&b.z))
            .then_with(|| a.key.cmp(&b.key))
            .then_with(|| a.tokens.cmp(&b.tokens))
    });
    let mut seen = HashSet::new();
    let predictions = valid
        .into_iter()
        .filter(|p| seen.insert(p.key.clone()))
        .take(k)
        .collect();
    PredictionList {
        predictions,
        pooled: all.len(),
        invalid,
    }
}

pub fn predict_topk<S, F>(scorer: &S, k: usize, bc: &BeamConfig, key: F) -> Result<PredictionList, ModelError>
where
    S: StepScorer,
    F: Fn(&[u32]) -> Option<String> + Sync,
{
    let pools = predict_pools(scorer, k, bc)?;
    Ok(merge_pools(&pools, k, bc.alpha, key))
}

/// Canonical molecule-set string of a decoded token sequence, if it parses to a
/// non-empty set with every aromatic atom on a ring.
pub fn canonical_reactants(vocab: &Vocab, tokens: &[u32]) -> Option<String> {
    let text = vocab.decode(tokens);
    let set = MoleculeSet::parse(&text).ok()?;
    let valid = !set.is_empty() && !set.molecules.iter().any(MolGraph::has_stray_aromatic_atom);
    valid.then(|| set.canonical())
}

/// Top-`k` canonical reactant sets for one encoded product.
pub fn predict_reactants(
    params: &ModelParams,
    vocab: &Vocab,
    source: &[u32],
    k: usize,
    bc: &BeamConfig,
) -> Result<PredictionList, ModelError> {
    let enc = encode(params, source, DropoutMode::Off)?;
    let dec = IncrementalDecoder::new(params, &enc);
    predict_topk(&dec, k, bc, |t| canonical_reactants(vocab, t))
}

/// Fraction of pairs of valid entries whose canonical forms differ; `None` with
/// fewer than two valid entries.
pub fn pairwise_distinct_fraction(keys: &[Option<String>]) -> Option<f64> {
    let valid: Vec<&String> = keys.iter().flatten().collect();
    let n = valid.len();
    if n < 2 {
        return None;
    }
    let mut distinct = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            distinct += usize::from(valid[i] != valid[j]);
        }
    }
    Some(distinct as f64 / (n * (n - 1) / 2) as f64)
}

/// Mean token-level edit distance over all pairs; `None` with fewer than two.
pub fn mean_pairwise_token_distance(seqs: &[Vec<u32>]) -> Option<f64> {
    let n = seqs.len();
    if n < 2 {
        return None;
    }
    let mut total = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            total += strsim::generic_levenshtein(&seqs[i], &seqs[j]);
        }
    }
    Some(total as f64 / (n * (n - 1) / 2) as f64)
}

/// One line of a prediction file.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub id: String,
    /// 1-based.
    pub rank: usize,
    /// 0-based in memory, 1-based on disk.
    pub z: usize,
    pub score: f64,
    pub smiles: String,
}

/// Writes `id<TAB>rank<TAB>z<TAB>score<TAB>smiles` lines, rank and class 1-based.
pub fn write_predictions<W: Write>(w: &mut W, id: &str, list: &PredictionList) -> std::io::Result<()> {
    for (r, p) in list.predictions.iter().enumerate() {
        writeln!(w, "{id}\t{}\t{}\t{:.6}\t{}", r + 1, p.z + 1, p.score, p.key)?;
    }
    Ok(())
}

/// Reads a prediction file, grouping consecutive lines by id. Errors name the line.
pub fn read_predictions<R: BufRead>(r: R) -> Result<Vec<(String, Vec<PredictionRecord>)>, String> {
    let mut out: Vec<(String, Vec<PredictionRecord>)> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| format!("line {}: {e}", i + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let bad = |what: &str| format!("line {}: {what}", i + 1);
        if f.len() != 5 {
            return Err(bad("expected 5 tab-separated fields"));
        }
        let rank: usize = f[1].parse().map_err(|_| bad("bad rank"))?;
        let z: usize = f[2].parse().map_err(|_| bad("bad latent class"))?;
        let score: f64 = f[3].parse().map_err(|_| bad("bad score"))?;
        if rank == 0 || z == 0 {
            return Err(bad("rank and latent class are 1-based"));
        }
        let rec = PredictionRecord {
            id: f[0].to_string(),
            rank,
            z: z - 1,
            score,
            smiles: f[4].to_string(),
        };
        match out.last_mut() {
            Some((id, recs)) if *id == rec.id => recs.push(rec),
            _ => out.push((rec.id.clone(), vec![rec])),
        }
    }
    Ok(out)
}

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chem::{write_smiles, MolGraph, MoleculeSet};

use super::template::apply_template_sets;
use super::{random_bond_break, AugmentError, ReactionExample, Source, Template};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PretrainMethod {
    Random,
    Template,
}

impl fmt::Display for PretrainMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PretrainMethod::Random => "random",
            PretrainMethod::Template => "template",
        })
    }
}

impl FromStr for PretrainMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(PretrainMethod::Random),
            "template" => Ok(PretrainMethod::Template),
            _ => Err(format!("unknown pre-training method {s:?} (random|template)")),
        }
    }
}

/// Targets that produced no example, with the reason.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusReport {
    pub targets: usize,
    pub examples: usize,
    pub skipped: Vec<(usize, String)>,
}

fn target_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn template_examples(g: &MolGraph, templates: &[Template], cap: usize, rng: &mut ChaCha8Rng) -> Vec<ReactionExample> {
    let mut seen = HashSet::new();
    let mut pool: Vec<(String, MoleculeSet)> = Vec::new();
    for t in templates {
        for (key, set) in apply_template_sets(t, g) {
            if seen.insert(key) {
                pool.push((t.id.clone(), set));
            }
        }
    }
    let take = cap.min(pool.len());
    let mut picked: Vec<usize> = sample(rng, pool.len(), take).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .filter_map(|k| {
            let (tid, set) = pool[k].clone();
            ReactionExample::new(format!("tp{k}-{tid}"), g.clone(), set, None, Source::TemplatePretrain).ok()
        })
        .collect()
}

/// Auxiliary examples for every target, up to `cap` each. Output order is by target
/// index, then by candidate index, independent of the thread count.
pub fn build_pretrain_corpus(
    targets: &[MolGraph],
    method: PretrainMethod,
    templates: Option<&[Template]>,
    cap: usize,
    seed: u64,
) -> Result<(Vec<ReactionExample>, CorpusReport), AugmentError> {
    if method == PretrainMethod::Template && templates.is_none() {
        return Err(AugmentError::MissingTemplates);
    }
    let per_target: Vec<Result<Vec<ReactionExample>, String>> = targets
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            if g.is_empty() || !g.is_connected() {
                return Err("target is not a single connected molecule".to_string());
            }
            let g = g.without_atom_maps();
            let mut rng = target_rng(seed, i);
            let out = match method {
                PretrainMethod::Random => random_bond_break(&g, rng.gen(), cap).map_err(|e| e.to_string())?,
                PretrainMethod::Template => template_examples(&g, templates.unwrap_or_default(), cap, &mut rng),
            };
            if out.is_empty() {
                return Err("no applicable template".to_string());
            }
            Ok(out
                .into_iter()
                .map(|mut e| {
                    e.id = format!("t{i}-{}", e.id);
                    e
                })
                .collect())
        })
        .collect();
    let mut report = CorpusReport {
        targets: targets.len(),
        ..Default::default()
    };
    let mut corpus = Vec::new();
    for (i, r) in per_target.into_iter().enumerate() {
        match r {
            Ok(v) => corpus.extend(v),
            Err(reason) => report.skipped.push((i, reason)),
        }
    }
    report.examples = corpus.len();
    Ok((corpus, report))
}

/// Up to `n` copies of `r` whose product string is a distinct random traversal.
pub fn smiles_augment(r: &ReactionExample, n: usize, seed: u64) -> Vec<ReactionExample> {
    let product = r.product.without_atom_maps();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<String> = HashSet::from([r.product_smiles.clone()]);
    let mut out = Vec::new();
    let attempts = 10 * n + 10;
    for _ in 0..attempts {
        if out.len() == n {
            break;
        }
        let s = write_smiles(&product, rng.gen());
        if !seen.insert(s.clone()) {
            continue;
        }
        let mut e = r.clone();
        e.id = format!("{}-aug{}", r.id, out.len());
        e.product_smiles = s;
        e.source = Source::SmilesAug;
        out.push(e);
    }
    out
}

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::template::apply_template_sets;
use super::{extract_template, AugmentError, ReactionExample, Template};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    Random,
    TemplateDisjoint,
}

impl std::str::FromStr for SplitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(SplitMode::Random),
            "template_disjoint" => Ok(SplitMode::TemplateDisjoint),
            _ => Err(format!("unknown split mode {s:?} (random|template_disjoint)")),
        }
    }
}

impl std::fmt::Display for SplitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SplitMode::Random => "random",
            SplitMode::TemplateDisjoint => "template_disjoint",
        })
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<ReactionExample>,
    pub test: Vec<ReactionExample>,
    pub mode: SplitMode,
}

fn test_target(n: usize, test_fraction: f64) -> usize {
    ((n as f64) * test_fraction.clamp(0.0, 1.0)).round() as usize
}

/// Shuffled split with `round(n * test_fraction)` test examples.
pub fn random_split(data: &[ReactionExample], seed: u64, test_fraction: f64) -> DatasetSplit {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = test_target(data.len(), test_fraction);
    let mut in_test = vec![false; data.len()];
    for &i in &idx[..k] {
        in_test[i] = true;
    }
    let (test, train): (Vec<_>, Vec<_>) = data.iter().cloned().zip(in_test).partition(|(_, t)| *t);
    DatasetSplit {
        train: train.into_iter().map(|(e, _)| e).collect(),
        test: test.into_iter().map(|(e, _)| e).collect(),
        mode: SplitMode::Random,
    }
}

/// Template id of every example (`None` where extraction fails).
pub fn template_ids(data: &[ReactionExample]) -> Vec<Option<String>> {
    data.par_iter()
        .map(|r| extract_template(r).ok().map(|t| t.id))
        .collect()
}

/// Occurrence count of every template id.
pub fn template_counts(ids: &[Option<String>]) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for id in ids.iter().flatten() {
        *counts.entry(id.clone()).or_insert(0) += 1;
    }
    counts
}

/// Distinct templates of `data` with occurrence counts, most frequent first
/// (ties by id).
pub fn extract_templates(data: &[ReactionExample]) -> Vec<Template> {
    let extracted: Vec<Option<Template>> = data.par_iter().map(|r| extract_template(r).ok()).collect();
    let mut by_id: HashMap<String, Template> = HashMap::new();
    for t in extracted.into_iter().flatten() {
        by_id.entry(t.id.clone()).and_modify(|e| e.count += 1).or_insert(t);
    }
    let mut out: Vec<Template> = by_id.into_values().collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.id.cmp(&b.id)));
    out
}

/// True when some template rewrites the product of `r` into its gold reactants.
pub fn solvable_by(r: &ReactionExample, templates: &[Template]) -> bool {
    let gold = r.target_text();
    let product = r.product.without_atom_maps();
    templates
        .iter()
        .any(|t| apply_template_sets(t, &product).iter().any(|(k, _)| *k == gold))
}

/// Template-disjoint split: whole template groups go to test, and no test example
/// is solvable by any template extracted from train. Examples whose template cannot
/// be extracted stay in train.
pub fn template_split(data: &[ReactionExample], seed: u64, test_fraction: f64) -> Result<DatasetSplit, AugmentError> {
    let templates: Vec<Option<Template>> = data.par_iter().map(|r| extract_template(r).ok()).collect();
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    let mut group_of: HashMap<String, usize> = HashMap::new();
    for (i, t) in templates.iter().enumerate() {
        if let Some(t) = t {
            let g = *group_of.entry(t.id.clone()).or_insert_with(|| {
                groups.push((t.id.clone(), Vec::new()));
                groups.len() - 1
            });
            groups[g].1.push(i);
        }
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let wanted = test_target(data.len(), test_fraction);

    let mut in_test = vec![false; groups.len()];
    let mut rejected = vec![false; groups.len()];
    let mut next = 0;
    let mut test_size = 0;
    loop {
        while test_size < wanted && next < order.len() {
            let g = order[next];
            next += 1;
            if !rejected[g] {
                in_test[g] = true;
                test_size += groups[g].1.len();
            }
        }
        let train_templates: Vec<Template> = {
            let mut seen = HashSet::new();
            (0..groups.len())
                .filter(|&g| !in_test[g])
                .filter_map(|g| templates[groups[g].1[0]].clone())
                .filter(|t| seen.insert(t.id.clone()))
                .collect()
        };
        let violating: Vec<usize> = (0..groups.len())
            .filter(|&g| in_test[g])
            .collect::<Vec<_>>()
            .into_par_iter()
            .filter(|&g| groups[g].1.iter().any(|&i| solvable_by(&data[i], &train_templates)))
            .collect();
        if violating.is_empty() {
            break;
        }
        for g in violating {
            debug!("template group {} is solvable from train; moving it back", groups[g].0);
            in_test[g] = false;
            rejected[g] = true;
            test_size -= groups[g].1.len();
        }
    }
    if test_size < wanted {
        return Err(AugmentError::InsufficientGroups {
            wanted,
            reached: test_size,
        });
    }
    let mut test_example = vec![false; data.len()];
    for (g, (_, members)) in groups.iter().enumerate() {
        if in_test[g] {
            for &i in members {
                test_example[i] = true;
            }
        }
    }
    let mut split = DatasetSplit {
        train: Vec::new(),
        test: Vec::new(),
        mode: SplitMode::TemplateDisjoint,
    };
    for (e, t) in data.iter().zip(test_example) {
        if t {
            split.test.push(e.clone());
        } else {
            split.train.push(e.clone());
        }
    }
    info!(
        "template split: {} train, {} test from {} template groups",
        split.train.len(),
        split.test.len(),
        groups.len()
    );
    Ok(split)
}

/// Examples whose template id occurs at most `threshold` times in `data`.
pub fn rare_subset(data: &[ReactionExample], threshold: usize) -> Vec<ReactionExample> {
    rare_subset_of(data, data, threshold)
}

/// Members of `subset` whose template id occurs at most `threshold` times in `corpus`.
pub fn rare_subset_of(subset: &[ReactionExample], corpus: &[ReactionExample], threshold: usize) -> Vec<ReactionExample> {
    let counts = template_counts(&template_ids(corpus));
    subset
        .iter()
        .zip(template_ids(subset))
        .filter(|(_, id)| id.as_ref().is_some_and(|id| counts.get(id).copied().unwrap_or(0) <= threshold))
        .map(|(e, _)| e.clone())
        .collect()
}

pub fn write_template_store<W: Write>(mut w: W, templates: &[Template]) -> std::io::Result<()> {
    for t in templates {
        writeln!(w, "{}", t.to_store_line())?;
    }
    Ok(())
}

pub fn read_template_store<R: BufRead>(r: R) -> Result<Vec<Template>, AugmentError> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| AugmentError::TemplateFormat(format!("line {}: {e}", n + 1)))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(
            Template::from_store_line(&line)
                .map_err(|e| AugmentError::TemplateFormat(format!("line {}: {e}", n + 1)))?,
        );
    }
    Ok(out)
}

//! Top-k accuracy, diversity statistics and the latent-class by reaction-class table.

mod classify;

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::chem::MoleculeSet;

pub use classify::{element_delta, ReactionClassifier, SyntheticOracleClassifier, TemplateProxyClassifier};

/// Cutoffs reported by default.
pub const DEFAULT_KS: [usize; 6] = [1, 2, 3, 4, 5, 10];

/// Canonical molecule-set string, if `s` parses to a non-empty set.
pub fn canonical_set(s: &str) -> Option<String> {
    let set = MoleculeSet::parse(s).ok()?;
    (!set.is_empty()).then(|| set.without_atom_maps().canonical())
}

/// Fraction of examples whose gold answer appears among their first `k` ranked
/// predictions, for each `k`. Strings are compared after `canon`; predictions it
/// rejects never match.
pub fn topk_accuracy_by<F>(predictions: &[Vec<String>], gold: &[String], ks: &[usize], canon: F) -> Vec<f64>
where
    F: Fn(&str) -> Option<String> + Sync,
{
    assert_eq!(predictions.len(), gold.len(), "one prediction list per gold answer");
    if gold.is_empty() {
        return vec![0.0; ks.len()];
    }
    // Rank of the first match, if any.
    let hits: Vec<Option<usize>> = predictions
        .par_iter()
        .zip(gold.par_iter())
        .map(|(preds, g)| {
            let g = canon(g)?;
            preds.iter().position(|p| canon(p).as_deref() == Some(g.as_str()))
        })
        .collect();
    ks.iter()
        .map(|&k| hits.iter().filter(|h| matches!(h, Some(r) if *r < k)).count() as f64 / gold.len() as f64)
        .collect()
}

/// Top-k accuracy by canonical molecule-set equality.
pub fn topk_accuracy(predictions: &[Vec<String>], gold: &[String], ks: &[usize]) -> Vec<f64> {
    topk_accuracy_by(predictions, gold, ks, canonical_set)
}

/// One example's ranked, valid predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExamplePredictions {
    pub product: String,
    pub predictions: Vec<String>,
}

/// Mean number of distinct classifier outputs over each example's first `k`
/// predictions. Examples without predictions are skipped; `None` if none remain.
pub fn unique_reaction_count<C: ReactionClassifier + ?Sized>(items: &[ExamplePredictions], clf: &C, k: usize) -> Option<f64> {
    let counts: Vec<usize> = items
        .par_iter()
        .filter(|e| !e.predictions.is_empty())
        .map(|e| {
            let mut classes: Vec<usize> = e.predictions.iter().take(k).map(|p| clf.classify(&e.product, p)).collect();
            classes.sort_unstable();
            classes.dedup();
            classes.len()
        })
        .collect();
    if counts.is_empty() {
        None
    } else {
        Some(counts.iter().sum::<usize>() as f64 / counts.len() as f64)
    }
}

/// Classifier-output frequencies per latent class. Column 0 counts pairs the
/// classifier could not place; columns `1..=C` are reaction classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentClassMatrix {
    pub counts: Vec<Vec<usize>>,
    /// Row-normalized counts; all zeros on degenerate rows.
    pub rows: Vec<Vec<f64>>,
    /// Latent classes that produced no prediction.
    pub degenerate: Vec<bool>,
}

impl LatentClassMatrix {
    /// `z,unknown,class1,...` header then one line per latent class (1-based).
    pub fn to_csv(&self) -> String {
        let c = self.rows.first().map_or(0, |r| r.len());
        let mut s = String::from("z,unknown");
        for j in 1..c {
            let _ = write!(s, ",class{j}");
        }
        s.push_str(",degenerate\n");
        for (z, row) in self.rows.iter().enumerate() {
            let _ = write!(s, "{}", z + 1);
            for v in row {
                let _ = write!(s, ",{v:.6}");
            }
            let _ = writeln!(s, ",{}", u8::from(self.degenerate[z]));
        }
        s
    }

    /// Largest entry of each non-degenerate row.
    pub fn row_maxima(&self) -> Vec<Option<f64>> {
        self.rows
            .iter()
            .zip(&self.degenerate)
            .map(|(r, &d)| (!d).then(|| r.iter().cloned().fold(0.0, f64::max)))
            .collect()
    }
}

/// One decoded prediction attributed to the latent class that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPrediction {
    pub product: String,
    /// 0-based.
    pub z: usize,
    pub reactants: String,
}

/// Row-normalized latent-class by reaction-class frequencies over `k` latent classes.
pub fn latent_class_matrix<C: ReactionClassifier + ?Sized>(items: &[LatentPrediction], k: usize, clf: &C) -> LatentClassMatrix {
    let width = clf.num_classes() + 1;
    let labels: Vec<usize> = items.par_iter().map(|p| clf.classify(&p.product, &p.reactants)).collect();
    let mut counts = vec![vec![0usize; width]; k];
    for (p, &c) in items.iter().zip(&labels) {
        counts[p.z][c.min(width - 1)] += 1;
    }
    let degenerate: Vec<bool> = counts.iter().map(|r| r.iter().all(|&c| c == 0)).collect();
    let rows = counts
        .iter()
        .map(|r| {
            let total: usize = r.iter().sum();
            r.iter()
                .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                .collect()
        })
        .collect();
    LatentClassMatrix {
        counts,
        rows,
        degenerate,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub examples: usize,
    pub ks: Vec<usize>,
    pub accuracies: Vec<f64>,
    /// Invalid hypotheses over all pooled hypotheses.
    pub invalid_rate: f64,
    pub unique_classes: Option<f64>,
    pub matrix: Option<LatentClassMatrix>,
    pub classifier: Option<String>,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "examples: {}", self.examples);
        for (k, a) in self.ks.iter().zip(&self.accuracies) {
            let _ = writeln!(s, "top-{k:<2} accuracy: {:6.2}%", 100.0 * a);
        }
        let _ = writeln!(s, "invalid rate: {:.2}%", 100.0 * self.invalid_rate);
        if let Some(c) = &self.classifier {
            let _ = writeln!(s, "classifier: {c}");
        }
        if let Some(u) = self.unique_classes {
            let _ = writeln!(s, "mean unique reaction classes in top-5: {u:.3}");
        }
        if let Some(m) = &self.matrix {
            let _ = writeln!(s, "latent class x reaction class (row-normalized, column 0 = unknown):");
            for (z, row) in m.rows.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.2}")).collect();
                let flag = if m.degenerate[z] { "  (degenerate)" } else { "" };
                let _ = writeln!(s, "  z={:<2} {}{flag}", z + 1, cells.join(" "));
            }
        }
        s
    }

    /// `metric<TAB>value` lines.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "examples\t{}", self.examples);
        for (k, a) in self.ks.iter().zip(&self.accuracies) {
            let _ = writeln!(s, "top{k}\t{a:.6}");
        }
        let _ = writeln!(s, "invalid_rate\t{:.6}", self.invalid_rate);
        if let Some(u) = self.unique_classes {
            let _ = writeln!(s, "unique_classes_top5\t{u:.6}");
        }
        s
    }
}

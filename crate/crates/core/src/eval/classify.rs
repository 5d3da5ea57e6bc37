use std::collections::{BTreeMap, HashMap};

use crate::augment::{apply_template_sets, extract_template, ReactionExample, Template};
use crate::chem::{parse_smiles, MolGraph, MoleculeSet};
use crate::training::SyntheticTask;

/// Assigns a reaction class in `1..=num_classes` to a (product, reactants) pair, or
/// 0 when it cannot tell.
pub trait ReactionClassifier: Sync {
    fn classify(&self, product: &str, reactants: &str) -> usize;
    fn num_classes(&self) -> usize;
    /// Where the labels come from, for reports.
    fn label(&self) -> String;
}

/// Heavy-atom element counts gained from product to reactants, plus the number of
/// reactant molecules, e.g. `Br+1,O+1/2`.
pub fn element_delta(product: &MolGraph, reactants: &MoleculeSet) -> String {
    let mut counts: BTreeMap<String, i64> = BTreeMap::new();
    for m in &reactants.molecules {
        for a in m.atoms() {
            *counts.entry(a.element.to_string()).or_default() += 1;
        }
    }
    for a in product.atoms() {
        *counts.entry(a.element.to_string()).or_default() -= 1;
    }
    let parts: Vec<String> = counts
        .into_iter()
        .filter(|&(_, c)| c != 0)
        .map(|(e, c)| format!("{e}{c:+}"))
        .collect();
    format!("{}/{}", parts.join(","), reactants.len())
}

fn majority(counts: &BTreeMap<usize, usize>) -> usize {
    // Highest count; the lowest class wins ties.
    let mut best = (0, 0);
    for (&c, &n) in counts {
        if n > best.1 {
            best = (c, n);
        }
    }
    best.0
}

struct Bucket {
    templates: Vec<String>,
    classes: BTreeMap<usize, usize>,
}

/// Nearest-template stand-in for a learned reaction-class predictor.
///
/// Predicted reactants carry no atom map, so a pair is first bucketed by its
/// element delta. Within the bucket, a stored template that turns the product into
/// exactly the predicted set decides the class. Otherwise the bucket's majority
/// class is returned. Pairs outside every bucket get 0.
pub struct TemplateProxyClassifier {
    templates: HashMap<String, (Template, usize)>,
    buckets: HashMap<String, Bucket>,
    num_classes: usize,
}

impl TemplateProxyClassifier {
    /// Fits on labeled, atom-mapped examples; unlabeled ones are ignored.
    pub fn fit(train: &[ReactionExample]) -> Self {
        let mut per_template: HashMap<String, (Template, BTreeMap<usize, usize>)> = HashMap::new();
        let mut per_bucket: HashMap<String, (BTreeMap<String, usize>, BTreeMap<usize, usize>)> = HashMap::new();
        let mut num_classes = 0;
        for r in train {
            let Some(class) = r.reaction_class.map(usize::from) else { continue };
            num_classes = num_classes.max(class);
            let sig = element_delta(&r.product, &r.reactants);
            let bucket = per_bucket.entry(sig).or_default();
            *bucket.1.entry(class).or_default() += 1;
            if let Ok(t) = extract_template(r) {
                *bucket.0.entry(t.id.clone()).or_default() += 1;
                let e = per_template.entry(t.id.clone()).or_insert_with(|| (t, BTreeMap::new()));
                *e.1.entry(class).or_default() += 1;
            }
        }
        let templates = per_template
            .into_iter()
            .map(|(id, (t, counts))| (id, (t, majority(&counts))))
            .collect();
        let buckets = per_bucket
            .into_iter()
            .map(|(sig, (ids, classes))| {
                let mut ids: Vec<(String, usize)> = ids.into_iter().collect();
                ids.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                let templates = ids.into_iter().map(|(id, _)| id).collect();
                (sig, Bucket { templates, classes })
            })
            .collect();
        Self {
            templates,
            buckets,
            num_classes,
        }
    }

    pub fn template_count(&self) -> usize {
        self.templates.len()
    }
}

impl ReactionClassifier for TemplateProxyClassifier {
    fn classify(&self, product: &str, reactants: &str) -> usize {
        let (Ok(p), Ok(r)) = (parse_smiles(product), MoleculeSet::parse(reactants)) else {
            return 0;
        };
        if r.is_empty() {
            return 0;
        }
        let p = p.without_atom_maps();
        let r = r.without_atom_maps();
        let Some(bucket) = self.buckets.get(&element_delta(&p, &r)) else {
            return 0;
        };
        let key = r.canonical();
        for id in &bucket.templates {
            let (t, class) = &self.templates[id];
            if apply_template_sets(t, &p).iter().any(|(k, _)| *k == key) {
                return *class;
            }
        }
        majority(&bucket.classes)
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn label(&self) -> String {
        format!("template proxy ({} templates, {} buckets)", self.templates.len(), self.buckets.len())
    }
}

/// Labels synthetic pairs with the (1-based) mode that generated them.
pub struct SyntheticOracleClassifier {
    pub task: SyntheticTask,
}

fn letters(s: &str) -> Vec<String> {
    s.chars().filter(|c| !c.is_whitespace()).map(|c| c.to_string()).collect()
}

impl ReactionClassifier for SyntheticOracleClassifier {
    fn classify(&self, product: &str, reactants: &str) -> usize {
        self.task
            .classify(&letters(product), &letters(reactants))
            .map_or(0, |m| m + 1)
    }

    fn num_classes(&self) -> usize {
        self.task.modes.len()
    }

    fn label(&self) -> String {
        format!("synthetic generator oracle ({} modes)", self.task.modes.len())
    }
}

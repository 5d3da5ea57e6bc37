//! Auxiliary corpora and dataset handling for retrosynthesis examples.

mod bond_break;
mod corpus;
mod reaction;
mod split;
mod template;
mod toy;

pub use bond_break::{breakable_bonds, random_bond_break};
pub use corpus::{build_pretrain_corpus, smiles_augment, CorpusReport, PretrainMethod};
pub use reaction::{remove_reagents, ReactionExample, RecordError, RecordReader, Source};
pub use split::{
    extract_templates, random_split, rare_subset, rare_subset_of, read_template_store, solvable_by, template_counts,
    template_ids, template_split, write_template_store, DatasetSplit, SplitMode,
};
pub use template::{
    apply_template, apply_template_sets, extract_template, find_embeddings, rewrite, PatternAtom, ReactantAtom,
    Template, EMBEDDING_CAP,
};
pub use toy::{toy_reactions, TOY_CLASSES};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AugmentError {
    #[error("molecule has no acyclic single bond")]
    NoBreakableBond,
    #[error("unmapped atoms: {0}")]
    UnmappedAtoms(String),
    #[error("reaction {0} changes no bond or atom")]
    NoChange(String),
    #[error("template grouping reaches only {reached} of {wanted} test examples")]
    InsufficientGroups { wanted: usize, reached: usize },
    #[error("invalid example: {0}")]
    InvalidExample(String),
    #[error("malformed template: {0}")]
    TemplateFormat(String),
    #[error("template pre-training needs a template list")]
    MissingTemplates,
}

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use crate::chem::{canonicalize, MolGraph, MoleculeSet};

use super::AugmentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Dataset,
    RandomPretrain,
    TemplatePretrain,
    SmilesAug,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Dataset => "dataset",
            Source::RandomPretrain => "random_pretrain",
            Source::TemplatePretrain => "template_pretrain",
            Source::SmilesAug => "smiles_aug",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "dataset" => Source::Dataset,
            "random_pretrain" => Source::RandomPretrain,
            "template_pretrain" => Source::TemplatePretrain,
            "smiles_aug" => Source::SmilesAug,
            _ => return Err(format!("unknown source {s:?}")),
        })
    }
}

/// One single-step retrosynthesis example: a product and the reactants that form it.
#[derive(Debug, Clone)]
pub struct ReactionExample {
    pub id: String,
    /// Single connected molecule, possibly atom-mapped.
    pub product: MolGraph,
    /// The product string fed to the model (unmapped).
    pub product_smiles: String,
    pub reactants: MoleculeSet,
    pub reaction_class: Option<u8>,
    pub atom_maps_present: bool,
    pub source: Source,
}

impl ReactionExample {
    /// Builds an example whose model input is the canonical unmapped product.
    pub fn new(
        id: impl Into<String>,
        product: MolGraph,
        reactants: MoleculeSet,
        reaction_class: Option<u8>,
        source: Source,
    ) -> Result<Self, AugmentError> {
        let product_smiles = canonicalize(&product.without_atom_maps());
        Self::with_product_smiles(id, product, product_smiles, reactants, reaction_class, source)
    }

    pub fn with_product_smiles(
        id: impl Into<String>,
        product: MolGraph,
        product_smiles: String,
        reactants: MoleculeSet,
        reaction_class: Option<u8>,
        source: Source,
    ) -> Result<Self, AugmentError> {
        let id = id.into();
        if product.is_empty() || !product.is_connected() {
            return Err(AugmentError::InvalidExample(format!("{id}: product must be one connected molecule")));
        }
        if reactants.is_empty() {
            return Err(AugmentError::InvalidExample(format!("{id}: no reactants")));
        }
        let atom_maps_present = product.has_atom_maps();
        Ok(Self {
            id,
            product,
            product_smiles,
            reactants,
            reaction_class,
            atom_maps_present,
            source,
        })
    }

    /// Model input string.
    pub fn source_text(&self) -> &str {
        &self.product_smiles
    }

    /// Model target string: canonical unmapped reactant set.
    pub fn target_text(&self) -> String {
        self.reactants.without_atom_maps().canonical()
    }

    /// Parses `id<TAB>class<TAB>reactants>>product[<TAB>source]`. Returns `Ok(None)`
    /// for blank and `#` comment lines.
    pub fn parse_record(line: &str) -> Result<Option<Self>, String> {
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            return Ok(None);
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 3 || cols.len() > 4 {
            return Err(format!("expected 3 or 4 tab-separated columns, found {}", cols.len()));
        }
        let id = cols[0].to_string();
        let class = match cols[1] {
            "-" | "" => None,
            c => match c.parse::<u8>() {
                Ok(v) if (1..=10).contains(&v) => Some(v),
                _ => return Err(format!("reaction class {c:?} not in 1..10 or '-'")),
            },
        };
        let source = match cols.get(3) {
            Some(s) => s.parse::<Source>()?,
            None => Source::Dataset,
        };
        let parts: Vec<&str> = cols[2].split('>').collect();
        let (reactant_text, product_text) = match parts.as_slice() {
            [r, "", p] | [r, _, p] => (*r, *p),
            _ => return Err("expected reactants>>product".into()),
        };
        let product_graph = crate::chem::parse_smiles(product_text).map_err(|e| format!("product: {e}"))?;
        let reactant_graph = crate::chem::parse_smiles(reactant_text).map_err(|e| format!("reactants: {e}"))?;
        let mut reactants = MoleculeSet::from_graph(&reactant_graph);
        if product_graph.has_atom_maps() {
            reactants = remove_reagents(&product_graph, reactants);
        }
        let example = if product_graph.has_atom_maps() {
            Self::new(id, product_graph, reactants, class, source)
        } else {
            Self::with_product_smiles(id, product_graph, product_text.to_string(), reactants, class, source)
        };
        example.map(Some).map_err(|e| e.to_string())
    }

    /// Record line in the same format, with the source column appended.
    pub fn to_record(&self) -> String {
        let class = self
            .reaction_class
            .map_or_else(|| "-".to_string(), |c| c.to_string());
        let (reactants, product) = if self.atom_maps_present {
            (self.reactants.canonical(), canonicalize(&self.product))
        } else {
            (self.target_text(), self.product_smiles.clone())
        };
        format!("{}\t{}\t{}>>{}\t{}", self.id, class, reactants, product, self.source)
    }

    pub fn without_atom_maps(&self) -> Self {
        let mut r = self.clone();
        r.product = self.product.without_atom_maps();
        r.reactants = self.reactants.without_atom_maps();
        r.atom_maps_present = false;
        r
    }
}

/// Drops reactant molecules that contribute no mapped atom to the product.
pub fn remove_reagents(product: &MolGraph, reactants: MoleculeSet) -> MoleculeSet {
    let maps: HashSet<u32> = product.atoms().iter().filter_map(|a| a.atom_map).collect();
    let kept = reactants
        .molecules
        .into_iter()
        .filter(|m| m.atoms().iter().any(|a| a.atom_map.is_some_and(|x| maps.contains(&x))))
        .collect();
    MoleculeSet::new(kept)
}

/// A malformed dataset line.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct RecordError {
    pub line: usize,
    pub message: String,
}

/// Streams examples from a record file.
pub struct RecordReader<R> {
    inner: R,
    line: usize,
    buf: String,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            line: 0,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<ReactionExample, RecordError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            self.line += 1;
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    return Some(Err(RecordError {
                        line: self.line,
                        message: e.to_string(),
                    }))
                }
            }
            match ReactionExample::parse_record(&self.buf) {
                Ok(None) => continue,
                Ok(Some(r)) => return Some(Ok(r)),
                Err(message) => {
                    return Some(Err(RecordError {
                        line: self.line,
                        message,
                    }))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mapped_record_and_drops_reagents() {
        let line = "r1\t3\t[CH3:1][OH:2].[Na+].[Cl-]>>[CH3:1][O:2]C\n";
        let r = ReactionExample::parse_record(line).unwrap().unwrap();
        assert_eq!(r.reaction_class, Some(3));
        assert!(r.atom_maps_present);
        assert_eq!(r.reactants.len(), 1);
        assert_eq!(r.target_text(), "CO");
        assert_eq!(r.source_text(), "COC");
    }

    #[test]
    fn comments_and_errors() {
        assert!(ReactionExample::parse_record("# header").unwrap().is_none());
        assert!(ReactionExample::parse_record("").unwrap().is_none());
        assert!(ReactionExample::parse_record("x\t11\tC>>C").is_err());
        assert!(ReactionExample::parse_record("x\t-\tC").is_err());
        assert!(ReactionExample::parse_record("x\t-\tC>>C.C").is_err());
    }

    #[test]
    fn unmapped_record_keeps_product_string() {
        let r = ReactionExample::parse_record("a\t-\tCC.O>>OCC\tsmiles_aug").unwrap().unwrap();
        assert_eq!(r.source_text(), "OCC");
        assert_eq!(r.source, Source::SmilesAug);
        assert_eq!(r.to_record(), "a\t-\tC.CC>>OCC\tsmiles_aug".replace("C.CC", &r.target_text()));
    }

    #[test]
    fn reader_reports_line_numbers() {
        let data = "# c\na\t-\tC>>C\n\nb\t-\tC(>>C\n";
        let items: Vec<_> = RecordReader::new(data.as_bytes()).collect();
        assert!(items[0].is_ok());
        assert_eq!(items[1].as_ref().unwrap_err().line, 4);
    }
}

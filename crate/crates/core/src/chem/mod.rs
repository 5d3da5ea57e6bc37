//! Molecular graphs, SMILES reading/writing, canonical forms and tokenization.

mod aromatic;
pub mod canon;
mod element;
mod error;
mod generate;
mod graph;
mod parse;
mod token;
mod write;

pub use aromatic::normalize_aromatic_rings;
pub use canon::{canonicalize, canonicalize_smiles};
pub use element::Element;
pub use generate::{random_molecule, random_molecules};
pub use error::{GraphError, SmilesError, SmilesErrorKind};
pub use graph::{Atom, Bond, BondOrder, MolGraph};
pub use parse::{parse_raw, parse_smiles, parse_smiles_with_warnings};
pub use token::{detokenize, tokenize, TokenSequence};
pub use write::{write_ranked, write_smiles};

/// A multiset of connected molecules, as written with `.` separators.
#[derive(Debug, Clone, Default)]
pub struct MoleculeSet {
    pub molecules: Vec<MolGraph>,
}

impl MoleculeSet {
    pub fn new(molecules: Vec<MolGraph>) -> Self {
        debug_assert!(molecules.iter().all(MolGraph::is_connected));
        Self { molecules }
    }

    /// Splits a possibly multi-component graph into its molecules.
    pub fn from_graph(g: &MolGraph) -> Self {
        Self {
            molecules: g.split_components(),
        }
    }

    pub fn parse(s: &str) -> Result<Self, SmilesError> {
        if s.is_empty() {
            return Ok(Self::default());
        }
        Ok(Self::from_graph(&parse_smiles(s)?))
    }

    pub fn len(&self) -> usize {
        self.molecules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.molecules.is_empty()
    }

    /// Sorted canonical strings of the members.
    pub fn canonical_members(&self) -> Vec<String> {
        let mut v: Vec<String> = self.molecules.iter().map(canonicalize).collect();
        v.sort();
        v
    }

    /// Order-insensitive canonical string of the whole set.
    pub fn canonical(&self) -> String {
        self.canonical_members().join(".")
    }

    pub fn without_atom_maps(&self) -> Self {
        Self {
            molecules: self.molecules.iter().map(MolGraph::without_atom_maps).collect(),
        }
    }

    pub fn as_graph(&self) -> MolGraph {
        MolGraph::union(&self.molecules)
    }
}

/// True iff the canonical multisets coincide (order-insensitive, multiplicity-sensitive).
pub fn molecule_set_equal(a: &MoleculeSet, b: &MoleculeSet) -> bool {
    a.len() == b.len() && a.canonical_members() == b.canonical_members()
}

/// Bonds lying on at least one cycle.
pub fn ring_bonds(g: &MolGraph) -> Vec<usize> {
    g.ring_bonds()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_equality() {
        let a = MoleculeSet::parse("ClCCl.CSc1ccc(CN=[N+]=[N-])cc1").unwrap();
        let b = MoleculeSet::parse("CSc1ccc(CN=[N+]=[N-])cc1.ClCCl").unwrap();
        assert!(molecule_set_equal(&a, &b));
        assert!(molecule_set_equal(&MoleculeSet::default(), &MoleculeSet::default()));
        let cc = MoleculeSet::parse("C.C").unwrap();
        let c = MoleculeSet::parse("C").unwrap();
        assert!(!molecule_set_equal(&cc, &c));
    }

    #[test]
    fn ring_bond_examples() {
        assert_eq!(ring_bonds(&parse_smiles("c1ccccc1").unwrap()).len(), 6);
        assert!(ring_bonds(&parse_smiles("CCC").unwrap()).is_empty());
        let toluene = parse_smiles("Cc1ccccc1").unwrap();
        let rb = ring_bonds(&toluene);
        assert_eq!(rb.len(), 6);
        assert!(!rb.contains(&0));
    }
}

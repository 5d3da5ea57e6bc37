use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chem::{BondOrder, MolGraph, MoleculeSet};

use super::{AugmentError, ReactionExample, Source};

/// Bonds eligible for random breaking: single order and on no cycle.
pub fn breakable_bonds(g: &MolGraph) -> Vec<usize> {
    g.bonds()
        .iter()
        .enumerate()
        .filter(|(_, b)| b.order == BondOrder::Single && !b.in_ring)
        .map(|(i, _)| i)
        .collect()
}

/// Breaks up to `cap` distinct acyclic single bonds, chosen without replacement.
/// Each example keeps `g` as the product and the two fragments as reactants.
pub fn random_bond_break(g: &MolGraph, seed: u64, cap: usize) -> Result<Vec<ReactionExample>, AugmentError> {
    let candidates = breakable_bonds(g);
    if candidates.is_empty() {
        return Err(AugmentError::NoBreakableBond);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let take = cap.min(candidates.len());
    sample(&mut rng, candidates.len(), take)
        .into_iter()
        .map(|k| {
            let bond = candidates[k];
            let broken = g.without_bond(bond);
            ReactionExample::new(
                format!("rb{bond}"),
                g.clone(),
                MoleculeSet::from_graph(&broken),
                None,
                Source::RandomPretrain,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{canonicalize_smiles, parse_smiles};

    #[test]
    fn ethane_has_one_break() {
        let g = parse_smiles("CC").unwrap();
        let ex = random_bond_break(&g, 1, 10).unwrap();
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].target_text(), "C.C");
        assert_eq!(ex[0].source_text(), "CC");
    }

    #[test]
    fn benzene_has_none() {
        let g = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(random_bond_break(&g, 1, 10).unwrap_err(), AugmentError::NoBreakableBond);
        let g = parse_smiles("C=C").unwrap();
        assert!(random_bond_break(&g, 1, 10).is_err());
    }

    #[test]
    fn cap_and_distinctness() {
        // 14 acyclic single bonds in a branched chain
        let g = parse_smiles("CC(C)CC(C)CC(C)CC(C)CCC").unwrap();
        assert_eq!(breakable_bonds(&g).len(), 14);
        let ex = random_bond_break(&g, 7, 10).unwrap();
        assert_eq!(ex.len(), 10);
        let ids: std::collections::HashSet<_> = ex.iter().map(|e| e.id.clone()).collect();
        assert_eq!(ids.len(), 10);
        assert_eq!(
            ex.iter().map(|e| e.id.clone()).collect::<Vec<_>>(),
            random_bond_break(&g, 7, 10).unwrap().iter().map(|e| e.id.clone()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn azide_product_sulfur_break() {
        let g = parse_smiles("[N-]=[N+]=NCc1ccc(SCCl)cc1").unwrap();
        let all = random_bond_break(&g, 0, 100).unwrap();
        let want = canonicalize_smiles("[N-]=[N+]=NCc1ccc(S)cc1.CCl").unwrap();
        assert!(all.iter().any(|e| e.target_text() == want));
        for e in &all {
            assert_eq!(e.reactants.len(), 2);
        }
    }
}

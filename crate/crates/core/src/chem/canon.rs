//! Canonical atom ranking and canonical SMILES.
//!
//! Ranks start from per-atom invariants and are refined by neighborhood
//! (Morgan-style) until stable. Remaining ties are broken by individualizing one
//! member of the lowest tied class and refining again. Every member of that class
//! is tried and the lexicographically smallest resulting string wins, so the output
//! does not depend on input atom order even when refinement classes are not orbits.
//! The number of explored leaves is bounded; past the bound only the lowest-index
//! member is individualized.

use super::aromatic::normalize_aromatic_rings;
use super::error::SmilesError;
use super::graph::MolGraph;
use super::parse::parse_smiles;
use super::write::write_component;

const LEAF_BUDGET: usize = 256;

/// Dense "number of strictly smaller keys" ranks.
pub fn ranks_from_keys<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0; keys.len()];
    for (pos, &i) in idx.iter().enumerate() {
        ranks[i] = if pos > 0 && keys[idx[pos - 1]] == keys[i] {
            ranks[idx[pos - 1]]
        } else {
            pos
        };
    }
    ranks
}

/// Refines ranks by neighbor rank multisets until the partition is stable.
/// `adj[v]` lists `(neighbor, edge color)`.
pub fn refine(ranks: &mut Vec<usize>, adj: &[Vec<(usize, u8)>]) {
    let mut classes = count_classes(ranks);
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..ranks.len())
            .map(|v| {
                let mut nb: Vec<(usize, u8)> = adj[v].iter().map(|&(w, c)| (ranks[w], c)).collect();
                nb.sort_unstable();
                (ranks[v], nb)
            })
            .collect();
        let next = ranks_from_keys(&keys);
        let next_classes = count_classes(&next);
        *ranks = next;
        if next_classes == classes {
            break;
        }
        classes = next_classes;
    }
}

fn count_classes(ranks: &[usize]) -> usize {
    let mut seen = vec![false; ranks.len()];
    ranks.iter().filter(|&&r| !std::mem::replace(&mut seen[r], true)).count()
}

/// Searches tie-breaking choices and returns the smallest leaf string with the
/// discrete ranking that produced it.
pub fn canonical_search<F>(initial: Vec<usize>, adj: &[Vec<(usize, u8)>], mut leaf: F) -> (String, Vec<usize>)
where
    F: FnMut(&[usize]) -> String,
{
    let mut best: Option<(String, Vec<usize>)> = None;
    let mut leaves = 0usize;
    search(initial, adj, &mut leaf, &mut best, &mut leaves);
    best.expect("at least one leaf")
}

fn search<F>(
    mut ranks: Vec<usize>,
    adj: &[Vec<(usize, u8)>],
    leaf: &mut F,
    best: &mut Option<(String, Vec<usize>)>,
    leaves: &mut usize,
) where
    F: FnMut(&[usize]) -> String,
{
    refine(&mut ranks, adj);
    let n = ranks.len();
    let mut size = vec![0usize; n];
    for &r in &ranks {
        size[r] += 1;
    }
    let Some(tied) = (0..n).find(|&r| size[r] > 1) else {
        *leaves += 1;
        let s = leaf(&ranks);
        if best.as_ref().is_none_or(|(b, _)| s < *b) {
            *best = Some((s, ranks));
        }
        return;
    };
    let members: Vec<usize> = (0..n).filter(|&v| ranks[v] == tied).collect();
    for (k, &m) in members.iter().enumerate() {
        if k > 0 && *leaves >= LEAF_BUDGET {
            break;
        }
        let mut next = ranks.clone();
        for &o in &members {
            if o != m {
                next[o] = tied + 1;
            }
        }
        search(next, adj, leaf, best, leaves);
    }
}

fn atom_invariants(g: &MolGraph) -> Vec<usize> {
    let keys: Vec<_> = (0..g.atom_count())
        .map(|i| {
            let a = g.atom(i);
            (
                a.element.atomic_number(),
                a.isotope.unwrap_or(0),
                a.charge,
                g.degree(i),
                a.aromatic,
                g.total_h(i),
                a.atom_map.unwrap_or(0),
            )
        })
        .collect();
    ranks_from_keys(&keys)
}

fn bond_adjacency(g: &MolGraph) -> Vec<Vec<(usize, u8)>> {
    (0..g.atom_count())
        .map(|v| {
            g.neighbors(v)
                .iter()
                .map(|&(w, bi)| (w, g.bonds()[bi].order.code()))
                .collect()
        })
        .collect()
}

/// Canonical SMILES of a single connected graph, with its canonical ranks.
fn canonical_component(g: &MolGraph) -> (String, Vec<usize>) {
    if g.atom_count() == 0 {
        return (String::new(), Vec::new());
    }
    let adj = bond_adjacency(g);
    canonical_search(atom_invariants(g), &adj, |ranks| {
        let start = (0..ranks.len()).min_by_key(|&v| ranks[v]).unwrap();
        write_component(g, ranks, start)
    })
}

/// Canonical SMILES: aromatic-normalized, components canonicalized separately
/// and joined in sorted order. Atom maps, when present, are part of the identity.
pub fn canonicalize(g: &MolGraph) -> String {
    let g = normalize_aromatic_rings(g);
    let mut parts: Vec<String> = g
        .split_components()
        .iter()
        .map(|c| canonical_component(c).0)
        .collect();
    parts.sort();
    parts.join(".")
}

/// Canonical atom ranks of a connected graph (as normalized by `canonicalize`).
pub fn canonical_ranks(g: &MolGraph) -> Vec<usize> {
    canonical_component(g).1
}

pub fn canonicalize_smiles(s: &str) -> Result<String, SmilesError> {
    Ok(canonicalize(&parse_smiles(s)?))
}

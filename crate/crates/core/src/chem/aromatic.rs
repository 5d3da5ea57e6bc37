use super::graph::{BondOrder, MolGraph};

/// All simple 6-cycles as closed atom sequences, each reported once.
fn six_cycles(g: &MolGraph, eligible: &dyn Fn(usize) -> bool) -> Vec<[usize; 6]> {
    let mut out = Vec::new();
    let mut path = Vec::with_capacity(6);
    for start in 0..g.atom_count() {
        if !eligible(start) {
            continue;
        }
        path.clear();
        path.push(start);
        extend(g, eligible, start, &mut path, &mut out);
    }
    out
}

fn extend(
    g: &MolGraph,
    eligible: &dyn Fn(usize) -> bool,
    start: usize,
    path: &mut Vec<usize>,
    out: &mut Vec<[usize; 6]>,
) {
    let last = *path.last().unwrap();
    for &(nb, bi) in g.neighbors(last) {
        if g.bonds()[bi].order == BondOrder::Triple {
            continue;
        }
        if path.len() == 6 {
            // close only in one direction to avoid duplicates
            if nb == start && path[1] < path[5] {
                out.push([path[0], path[1], path[2], path[3], path[4], path[5]]);
            }
            continue;
        }
        if nb <= start || path.contains(&nb) || !eligible(nb) {
            continue;
        }
        path.push(nb);
        extend(g, eligible, start, path, out);
        path.pop();
    }
}

/// Rewrites alternating single/double 6-rings of aromatic-capable atoms into
/// aromatic form. Aromatic bonds act as wildcards, so fused Kekulé systems
/// converge over repeated passes. Rings that are already aromatic, or do not
/// alternate, are left untouched.
pub fn normalize_aromatic_rings(g: &MolGraph) -> MolGraph {
    let eligible = |i: usize| g.atom(i).element.can_be_aromatic();
    let cycles = six_cycles(g, &eligible);
    if cycles.is_empty() {
        return g.clone();
    }
    let mut atoms = g.atoms().to_vec();
    let mut orders: Vec<BondOrder> = g.bonds().iter().map(|b| b.order).collect();
    let ring_bonds: Vec<[usize; 6]> = cycles
        .iter()
        .map(|c| {
            let mut bi = [0; 6];
            for k in 0..6 {
                let a = c[k];
                let b = c[(k + 1) % 6];
                bi[k] = g
                    .neighbors(a)
                    .iter()
                    .find(|&&(nb, _)| nb == b)
                    .map(|&(_, i)| i)
                    .expect("cycle edge");
            }
            bi
        })
        .collect();

    let mut done = vec![false; cycles.len()];
    loop {
        let mut changed = false;
        for (ci, bonds) in ring_bonds.iter().enumerate() {
            if done[ci] {
                continue;
            }
            if bonds.iter().all(|&b| orders[b] == BondOrder::Aromatic) {
                done[ci] = true;
                continue;
            }
            let fits = |phase: usize| {
                bonds.iter().enumerate().all(|(k, &b)| {
                    let want = if (k + phase) % 2 == 0 {
                        BondOrder::Double
                    } else {
                        BondOrder::Single
                    };
                    orders[b] == want || orders[b] == BondOrder::Aromatic
                })
            };
            if fits(0) || fits(1) {
                for &b in bonds {
                    orders[b] = BondOrder::Aromatic;
                }
                for &a in &cycles[ci] {
                    atoms[a].aromatic = true;
                }
                done[ci] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let bonds = g
        .bonds()
        .iter()
        .zip(orders)
        .map(|(b, o)| (b.a, b.b, o))
        .collect();
    MolGraph::from_parts(atoms, bonds).expect("same topology")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse::parse_raw;

    fn aromatic_count(s: &str) -> usize {
        let g = normalize_aromatic_rings(&parse_raw(s).unwrap());
        g.atoms().iter().filter(|a| a.aromatic).count()
    }

    #[test]
    fn kekule_benzene_becomes_aromatic() {
        assert_eq!(aromatic_count("C1=CC=CC=C1"), 6);
        assert_eq!(aromatic_count("C1=CC=NC=C1"), 6);
    }

    #[test]
    fn fused_kekule_converges() {
        // naphthalene drawn with the shared bond single
        assert_eq!(aromatic_count("C1=CC=C2C=CC=CC2=C1"), 10);
        assert_eq!(aromatic_count("C1=CC2=CC=CC=C2C=C1"), 10);
    }

    #[test]
    fn non_alternating_rings_untouched() {
        assert_eq!(aromatic_count("C1CCCCC1"), 0);
        assert_eq!(aromatic_count("C1=CCCC=C1"), 0);
        assert_eq!(aromatic_count("O=C1C=CC(=O)C=C1"), 0);
        assert_eq!(aromatic_count("C1=CC=CC1"), 0);
    }
}

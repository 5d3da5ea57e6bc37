use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{BondOrder, MolGraph};

/// Writes a SMILES string from a random traversal: the start atom of each
/// component, branch order and component order are drawn from `seed`.
pub fn write_smiles(g: &MolGraph, seed: u64) -> String {
    let mut rank: Vec<usize> = (0..g.atom_count()).collect();
    rank.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    write_ranked(g, &rank)
}

/// Writes a SMILES string whose traversal is fully determined by `rank`
/// (distinct values): each component starts at its lowest-ranked atom,
/// neighbors are visited in rank order and components are emitted in order of
/// their lowest rank.
pub fn write_ranked(g: &MolGraph, rank: &[usize]) -> String {
    let mut comps = g.components();
    for c in &mut comps {
        c.sort_by_key(|&a| rank[a]);
    }
    comps.sort_by_key(|c| rank[c[0]]);
    let mut parts = Vec::with_capacity(comps.len());
    for c in &comps {
        parts.push(write_component(g, rank, c[0]));
    }
    parts.join(".")
}

struct RingEvent {
    bond: usize,
    partner: usize,
}

pub(crate) fn write_component(g: &MolGraph, rank: &[usize], start: usize) -> String {
    let n = g.atom_count();
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut openings: Vec<Vec<RingEvent>> = (0..n).map(|_| Vec::new()).collect();
    let mut closings: Vec<Vec<RingEvent>> = (0..n).map(|_| Vec::new()).collect();
    let mut visited = vec![false; n];
    let mut bond_used = vec![false; g.bonds().len()];

    // pass 1: spanning tree plus ring-closure bonds
    let sorted_neighbors = |v: usize| {
        let mut nbs = g.neighbors(v).to_vec();
        nbs.sort_by_key(|&(w, _)| rank[w]);
        nbs
    };
    let mut stack: Vec<(usize, Vec<(usize, usize)>, usize)> = vec![(start, sorted_neighbors(start), 0)];
    visited[start] = true;
    while let Some((v, nbs, slot)) = stack.last_mut() {
        let v = *v;
        if *slot >= nbs.len() {
            stack.pop();
            continue;
        }
        let (w, bi) = nbs[*slot];
        *slot += 1;
        if bond_used[bi] {
            continue;
        }
        bond_used[bi] = true;
        if visited[w] {
            openings[w].push(RingEvent { bond: bi, partner: v });
            closings[v].push(RingEvent { bond: bi, partner: w });
        } else {
            visited[w] = true;
            children[v].push((w, bi));
            let next = sorted_neighbors(w);
            stack.push((w, next, 0));
        }
    }

    // pass 2: emit
    let mut out = String::new();
    let mut digit_of_bond = vec![0u16; g.bonds().len()];
    let mut in_use = vec![false; 100];
    // (atom, incoming bond, closing paren after)
    enum Step {
        Atom(usize, Option<usize>),
        Open,
        Close,
    }
    let mut todo = vec![Step::Atom(start, None)];
    while let Some(step) = todo.pop() {
        match step {
            Step::Open => out.push('('),
            Step::Close => out.push(')'),
            Step::Atom(v, incoming) => {
                if let Some(bi) = incoming {
                    let b = &g.bonds()[bi];
                    out.push_str(bond_symbol(g, b.order, b.a, b.b));
                }
                write_atom(g, v, &mut out);
                // allocate openings before releasing closings so a digit is never
                // closed and reopened on the same atom
                let mut opened = Vec::with_capacity(openings[v].len());
                for ev in &openings[v] {
                    let d = (1..100).find(|&d| !in_use[d]).expect("fewer than 100 open rings") as u16;
                    in_use[d as usize] = true;
                    digit_of_bond[ev.bond] = d;
                    opened.push(d);
                }
                for ev in &closings[v] {
                    let d = digit_of_bond[ev.bond];
                    let b = &g.bonds()[ev.bond];
                    out.push_str(bond_symbol(g, b.order, v, ev.partner));
                    push_digit(&mut out, d);
                    in_use[d as usize] = false;
                }
                for d in opened {
                    push_digit(&mut out, d);
                }
                let kids = &children[v];
                if let Some((&(last, last_bond), rest)) = kids.split_last() {
                    todo.push(Step::Atom(last, Some(last_bond)));
                    for &(c, cb) in rest.iter().rev() {
                        todo.push(Step::Close);
                        todo.push(Step::Atom(c, Some(cb)));
                        todo.push(Step::Open);
                    }
                }
            }
        }
    }
    out
}

fn push_digit(out: &mut String, d: u16) {
    if d < 10 {
        out.push((b'0' + d as u8) as char);
    } else {
        let _ = write!(out, "%{d:02}");
    }
}

fn bond_symbol(g: &MolGraph, order: BondOrder, a: usize, b: usize) -> &'static str {
    let both_aromatic = g.atom(a).aromatic && g.atom(b).aromatic;
    match order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
    }
}

/// Atom text: bare organic-subset symbol when the implicit hydrogen count
/// reproduces the atom, bracket form otherwise.
pub(crate) fn write_atom(g: &MolGraph, i: usize, out: &mut String) {
    let a = g.atom(i);
    let h = g.total_h(i);
    let aromatic_bare = !a.aromatic || matches!(a.element.symbol(), "B" | "C" | "N" | "O" | "P" | "S");
    let bare = a.element.is_organic()
        && aromatic_bare
        && a.charge == 0
        && a.isotope.is_none()
        && a.atom_map.is_none()
        && h == g.valence_filling_h(i);
    let symbol = a.element.symbol();
    if bare {
        if a.aromatic {
            out.push_str(&symbol.to_ascii_lowercase());
        } else {
            out.push_str(symbol);
        }
        return;
    }
    out.push('[');
    if let Some(iso) = a.isotope {
        let _ = write!(out, "{iso}");
    }
    if a.aromatic {
        out.push_str(&symbol.to_ascii_lowercase());
    } else {
        out.push_str(symbol);
    }
    match h {
        0 => {}
        1 => out.push('H'),
        n => {
            let _ = write!(out, "H{n}");
        }
    }
    match a.charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => {
            let _ = write!(out, "+{c}");
        }
        c => {
            let _ = write!(out, "-{}", -c);
        }
    }
    if let Some(m) = a.atom_map {
        let _ = write!(out, ":{m}");
    }
    out.push(']');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse::parse_smiles;

    #[test]
    fn single_atom_for_every_seed() {
        let g = parse_smiles("C").unwrap();
        for seed in 0..20 {
            assert_eq!(write_smiles(&g, seed), "C");
        }
    }

    #[test]
    fn identity_rank_reproduces_simple_input() {
        for s in ["CCO", "CC(C)=O", "c1ccccc1", "C1CC1C#N", "[NH4+].[Cl-]", "[13CH3:2]O", "c1cc[nH]c1", "c1ccccc1-c1ccccc1"] {
            let g = parse_smiles(s).unwrap();
            let rank: Vec<usize> = (0..g.atom_count()).collect();
            let w = write_ranked(&g, &rank);
            assert_eq!(w, s, "rewrite of {s}");
        }
    }

    #[test]
    fn seeds_vary_output_and_balance() {
        let g = parse_smiles("Fc1cc2cncnc2cn1").unwrap();
        let outs: std::collections::HashSet<String> = (0..30).map(|s| write_smiles(&g, s)).collect();
        assert!(outs.len() > 5);
        for o in &outs {
            assert_eq!(o.matches('(').count(), o.matches(')').count());
            assert!(parse_smiles(o).is_ok(), "{o}");
        }
    }
}

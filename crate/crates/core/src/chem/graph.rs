use std::collections::HashMap;

use super::element::Element;
use super::error::GraphError;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    pub aromatic: bool,
    /// Hydrogen count fixed by a bracket atom. `None` means the count is implied by valence.
    pub explicit_h: Option<u8>,
    pub isotope: Option<u16>,
    pub atom_map: Option<u32>,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Self {
            element,
            charge: 0,
            aromatic: false,
            explicit_h: None,
            isotope: None,
            atom_map: None,
        }
    }

    pub fn aromatic(mut self, aromatic: bool) -> Self {
        self.aromatic = aromatic;
        self
    }

    pub fn with_charge(mut self, charge: i8) -> Self {
        self.charge = charge;
        self
    }

    pub fn with_h(mut self, h: u8) -> Self {
        self.explicit_h = Some(h);
        self
    }

    pub fn with_map(mut self, map: u32) -> Self {
        self.atom_map = Some(map);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to valence; aromatic bonds count as one (the extra pi share is
    /// accounted for per atom).
    pub fn valence(self) -> i32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub in_ring: bool,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// An attributed, simple, undirected molecular graph. Hydrogens are implicit
/// unless written as explicit bracket atoms.
#[derive(Debug, Clone)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolGraph {
    /// Builds a graph and enforces every structural and valence invariant.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<(usize, usize, BondOrder)>) -> Result<Self, GraphError> {
        let g = Self::build(atoms, bonds)?;
        for (i, atom) in g.atoms.iter().enumerate() {
            if atom.aromatic && !atom.element.can_be_aromatic() {
                return Err(GraphError::NonAromaticElement(atom.element.to_string()));
            }
            if let Some((valence, max)) = g.valence_excess(i) {
                return Err(GraphError::Valence {
                    atom: i,
                    element: atom.element.to_string(),
                    valence,
                    max,
                });
            }
        }
        Ok(g)
    }

    /// Builds a graph checking only structure (range, self bonds, duplicates).
    /// Used by generators whose outputs are deliberately not chemistry-filtered.
    pub fn from_parts(atoms: Vec<Atom>, bonds: Vec<(usize, usize, BondOrder)>) -> Result<Self, GraphError> {
        Self::build(atoms, bonds)
    }

    fn build(atoms: Vec<Atom>, bond_list: Vec<(usize, usize, BondOrder)>) -> Result<Self, GraphError> {
        let n = atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut bonds = Vec::with_capacity(bond_list.len());
        for (a, b, order) in bond_list {
            if a >= n {
                return Err(GraphError::EndpointOutOfRange(a));
            }
            if b >= n {
                return Err(GraphError::EndpointOutOfRange(b));
            }
            if a == b {
                return Err(GraphError::SelfBond(a));
            }
            if adjacency[a].iter().any(|&(nb, _)| nb == b) {
                return Err(GraphError::DuplicateBond(a.min(b), a.max(b)));
            }
            let idx = bonds.len();
            adjacency[a].push((b, idx));
            adjacency[b].push((a, idx));
            bonds.push(Bond {
                a,
                b,
                order,
                in_ring: false,
            });
        }
        let mut g = MolGraph {
            atoms,
            bonds,
            adjacency,
        };
        let bridges = g.bridges();
        for (i, bond) in g.bonds.iter_mut().enumerate() {
            bond.in_ring = !bridges[i];
        }
        Ok(g)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(neighbor atom, bond index)` pairs.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    /// Whether some aromatic atom lies on no ring bond; such graphs have no
    /// Kekule form.
    pub fn has_stray_aromatic_atom(&self) -> bool {
        (0..self.atoms.len())
            .any(|a| self.atoms[a].aromatic && !self.adjacency[a].iter().any(|&(_, b)| self.bonds[b].in_ring))
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|&&(nb, _)| nb == b)
            .map(|&(_, bi)| &self.bonds[bi])
    }

    /// Bond list in the `(a, b, order)` form accepted by the constructors.
    pub fn bond_triples(&self) -> Vec<(usize, usize, BondOrder)> {
        self.bonds.iter().map(|b| (b.a, b.b, b.order)).collect()
    }

    fn bond_valence_sum(&self, atom: usize) -> i32 {
        self.adjacency[atom]
            .iter()
            .map(|&(_, bi)| self.bonds[bi].order.valence())
            .sum()
    }

    fn has_multiple_bond(&self, atom: usize) -> bool {
        self.adjacency[atom]
            .iter()
            .any(|&(_, bi)| matches!(self.bonds[bi].order, BondOrder::Double | BondOrder::Triple))
    }

    /// Hydrogens implied by the valence table for atoms without a bracket H count.
    pub fn implicit_h(&self, atom: usize) -> u8 {
        if self.atoms[atom].explicit_h.is_some() {
            return 0;
        }
        self.valence_filling_h(atom)
    }

    /// Hydrogens the valence table would give this atom if it carried no bracket count.
    pub fn valence_filling_h(&self, atom: usize) -> u8 {
        let a = &self.atoms[atom];
        let valences = a.element.valences();
        if valences.is_empty() {
            return 0;
        }
        let used = self.bond_valence_sum(atom);
        let shift = a.element.charge_shift(a.charge);
        let target = valences
            .iter()
            .map(|&v| i32::from(v) + shift)
            .find(|&v| v >= used);
        match target {
            Some(t) => {
                let pi = i32::from(a.aromatic);
                (t - used - pi).max(0) as u8
            }
            None => 0,
        }
    }

    pub fn total_h(&self, atom: usize) -> u8 {
        self.atoms[atom]
            .explicit_h
            .unwrap_or_else(|| self.implicit_h(atom))
    }

    /// `Some((valence, max))` when the atom exceeds its decided maximum valence.
    pub fn valence_excess(&self, atom: usize) -> Option<(i32, i32)> {
        let a = &self.atoms[atom];
        let max = a.element.max_valence(a.charge)?;
        let pi = i32::from(a.aromatic && !self.has_multiple_bond(atom));
        let valence = self.bond_valence_sum(atom) + pi + i32::from(self.total_h(atom));
        (valence > max).then_some((valence, max))
    }

    /// Atom indices of each connected component, ordered by lowest atom index.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &(nb, _) in &self.adjacency[v] {
                    if !seen[nb] {
                        seen[nb] = true;
                        stack.push(nb);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn component_count(&self) -> usize {
        self.components().len()
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }

    /// Indices of bonds lying on at least one cycle.
    pub fn ring_bonds(&self) -> Vec<usize> {
        (0..self.bonds.len())
            .filter(|&i| self.bonds[i].in_ring)
            .collect()
    }

    /// Bridge flags per bond (iterative low-link DFS).
    fn bridges(&self) -> Vec<bool> {
        let n = self.atoms.len();
        let mut is_bridge = vec![false; self.bonds.len()];
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut timer = 0;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // (vertex, bond used to enter, next adjacency slot)
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(&mut (v, parent_bond, ref mut slot)) = stack.last_mut() {
                if *slot < self.adjacency[v].len() {
                    let (w, bi) = self.adjacency[v][*slot];
                    *slot += 1;
                    if bi == parent_bond {
                        continue;
                    }
                    if disc[w] == usize::MAX {
                        disc[w] = timer;
                        low[w] = timer;
                        timer += 1;
                        stack.push((w, bi, 0));
                    } else {
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(p, _, _)) = stack.last() {
                        low[p] = low[p].min(low[v]);
                        if low[v] > disc[p] {
                            is_bridge[parent_bond] = true;
                        }
                    }
                }
            }
        }
        is_bridge
    }

    /// Induced subgraph on `atoms` (kept in the given order).
    pub fn subgraph(&self, atoms: &[usize]) -> MolGraph {
        let index: HashMap<usize, usize> = atoms.iter().enumerate().map(|(i, &a)| (a, i)).collect();
        let new_atoms = atoms.iter().map(|&a| self.atoms[a].clone()).collect();
        let new_bonds = self
            .bonds
            .iter()
            .filter_map(|b| Some((*index.get(&b.a)?, *index.get(&b.b)?, b.order)))
            .collect();
        Self::build(new_atoms, new_bonds).expect("induced subgraph of a valid graph")
    }

    /// One graph per connected component.
    pub fn split_components(&self) -> Vec<MolGraph> {
        self.components().iter().map(|c| self.subgraph(c)).collect()
    }

    /// Copy with atom maps removed.
    pub fn without_atom_maps(&self) -> MolGraph {
        let mut g = self.clone();
        for a in &mut g.atoms {
            a.atom_map = None;
        }
        g
    }

    pub fn has_atom_maps(&self) -> bool {
        self.atoms.iter().any(|a| a.atom_map.is_some())
    }

    /// Copy with one bond removed.
    pub fn without_bond(&self, bond: usize) -> MolGraph {
        let bonds = self
            .bonds
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != bond)
            .map(|(_, b)| (b.a, b.b, b.order))
            .collect();
        Self::build(self.atoms.clone(), bonds).expect("bond removal keeps a simple graph")
    }

    /// Disjoint union of several graphs.
    pub fn union(parts: &[MolGraph]) -> MolGraph {
        let mut atoms = Vec::new();
        let mut bonds = Vec::new();
        for g in parts {
            let off = atoms.len();
            atoms.extend(g.atoms.iter().cloned());
            bonds.extend(g.bonds.iter().map(|b| (b.a + off, b.b + off, b.order)));
        }
        Self::build(atoms, bonds).expect("disjoint union of simple graphs")
    }

    /// Copy with the given atom permutation: new index `i` holds old atom `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> MolGraph {
        self.subgraph(order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> MolGraph {
        let atoms = vec![Atom::new(Element::C); n];
        let bonds = (1..n).map(|i| (i - 1, i, BondOrder::Single)).collect();
        MolGraph::new(atoms, bonds).unwrap()
    }

    #[test]
    fn rejects_bad_structure() {
        let atoms = vec![Atom::new(Element::C); 2];
        assert_eq!(
            MolGraph::new(atoms.clone(), vec![(0, 0, BondOrder::Single)]).unwrap_err(),
            GraphError::SelfBond(0)
        );
        assert_eq!(
            MolGraph::new(atoms.clone(), vec![(0, 1, BondOrder::Single), (1, 0, BondOrder::Double)]).unwrap_err(),
            GraphError::DuplicateBond(0, 1)
        );
        assert_eq!(
            MolGraph::new(atoms, vec![(0, 5, BondOrder::Single)]).unwrap_err(),
            GraphError::EndpointOutOfRange(5)
        );
    }

    #[test]
    fn checked_constructor_enforces_valence() {
        let atoms = vec![Atom::new(Element::O); 3];
        let bonds = vec![(0, 1, BondOrder::Double), (1, 2, BondOrder::Single)];
        assert!(matches!(MolGraph::new(atoms.clone(), bonds.clone()), Err(GraphError::Valence { atom: 1, .. })));
        assert!(MolGraph::from_parts(atoms, bonds).is_ok());
    }

    #[test]
    fn implicit_hydrogens() {
        let g = chain(3);
        assert_eq!(g.total_h(0), 3);
        assert_eq!(g.total_h(1), 2);
        let n = MolGraph::new(vec![Atom::new(Element::N)], vec![]).unwrap();
        assert_eq!(n.total_h(0), 3);
        let charged = MolGraph::new(vec![Atom::new(Element::N).with_charge(1).with_h(4)], vec![]).unwrap();
        assert_eq!(charged.total_h(0), 4);
    }

    #[test]
    fn ring_flags_and_components() {
        let mut bonds: Vec<_> = (1..6).map(|i| (i - 1, i, BondOrder::Single)).collect();
        bonds.push((5, 0, BondOrder::Single));
        bonds.push((0, 6, BondOrder::Single));
        let g = MolGraph::new(vec![Atom::new(Element::C); 8], bonds).unwrap();
        assert_eq!(g.ring_bonds(), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(g.component_count(), 2);
        assert!(chain(4).ring_bonds().is_empty());
        let parts = g.split_components();
        assert_eq!(parts[0].atom_count(), 7);
        assert_eq!(parts[1].atom_count(), 1);
    }
}

use std::collections::HashMap;

use log::debug;

use super::aromatic::normalize_aromatic_rings;
use super::element::Element;
use super::error::{SmilesError, SmilesErrorKind};
use super::graph::{Atom, BondOrder, MolGraph};

use SmilesErrorKind::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSymbol {
    Single,
    Double,
    Triple,
    Aromatic,
    /// `/` or `\`: directional single bonds, read as single.
    Directional,
}

impl BondSymbol {
    fn from_byte(c: u8) -> Option<Self> {
        Some(match c {
            b'-' => BondSymbol::Single,
            b'=' => BondSymbol::Double,
            b'#' => BondSymbol::Triple,
            b':' => BondSymbol::Aromatic,
            b'/' | b'\\' => BondSymbol::Directional,
            _ => return None,
        })
    }

    fn order(self) -> BondOrder {
        match self {
            BondSymbol::Single | BondSymbol::Directional => BondOrder::Single,
            BondSymbol::Double => BondOrder::Double,
            BondSymbol::Triple => BondOrder::Triple,
            BondSymbol::Aromatic => BondOrder::Aromatic,
        }
    }
}

struct RingOpening {
    atom: usize,
    bond: Option<BondSymbol>,
    offset: usize,
}

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    offsets: Vec<usize>,
    bonds: Vec<(usize, usize, BondOrder)>,
    prev: Option<usize>,
    branches: Vec<(Option<usize>, usize)>,
    pending: Option<(BondSymbol, usize)>,
    rings: HashMap<u16, RingOpening>,
}

/// Parses a SMILES string into a graph. Valence problems are tolerated (logged).
pub fn parse_smiles(s: &str) -> Result<MolGraph, SmilesError> {
    let (g, warnings) = parse_smiles_with_warnings(s)?;
    for w in warnings {
        debug!("{s}: {w}");
    }
    Ok(g)
}

/// Parses a SMILES string and reports valence violations as warnings.
pub fn parse_smiles_with_warnings(s: &str) -> Result<(MolGraph, Vec<SmilesError>), SmilesError> {
    let (raw, offsets) = parse_with_offsets(s)?;
    let g = normalize_aromatic_rings(&raw);
    let warnings = (0..g.atom_count())
        .filter_map(|i| {
            g.valence_excess(i).map(|(valence, max)| {
                SmilesError::new(
                    ValenceViolation {
                        element: g.atom(i).element.to_string(),
                        valence,
                        max,
                    },
                    offsets[i],
                )
            })
        })
        .collect();
    Ok((g, warnings))
}

/// Parses without aromatic normalization.
pub fn parse_raw(s: &str) -> Result<MolGraph, SmilesError> {
    parse_with_offsets(s).map(|(g, _)| g)
}

fn parse_with_offsets(s: &str) -> Result<(MolGraph, Vec<usize>), SmilesError> {
    if s.is_empty() {
        return Err(SmilesError::new(EmptyInput, 0));
    }
    let mut p = Parser {
        input: s.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        offsets: Vec::new(),
        bonds: Vec::new(),
        prev: None,
        branches: Vec::new(),
        pending: None,
        rings: HashMap::new(),
    };
    p.run()?;
    let g = MolGraph::from_parts(p.atoms, p.bonds).expect("parser rejects malformed bonds");
    Ok((g, p.offsets))
}

impl Parser<'_> {
    fn err<T>(&self, kind: SmilesErrorKind, offset: usize) -> Result<T, SmilesError> {
        Err(SmilesError::new(kind, offset))
    }

    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    if self.prev.is_none() {
                        return self.err(UnexpectedCharacter('('), start);
                    }
                    if self.pending.is_some() {
                        return self.err(InvalidBond("bond before branch".into()), start);
                    }
                    self.branches.push((self.prev, start));
                    self.pos += 1;
                }
                b')' => {
                    let Some((prev, _)) = self.branches.pop() else {
                        return self.err(UnbalancedParenthesis, start);
                    };
                    if self.pending.is_some() {
                        return self.err(InvalidBond("dangling bond".into()), start);
                    }
                    self.prev = prev;
                    self.pos += 1;
                }
                b'.' => {
                    if self.pending.is_some() {
                        return self.err(InvalidBond("dangling bond".into()), start);
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => self.ring_closure()?,
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom, start)?;
                }
                _ => {
                    if let Some(sym) = BondSymbol::from_byte(c) {
                        if self.pending.is_some() {
                            return self.err(InvalidBond("consecutive bond symbols".into()), start);
                        }
                        if self.prev.is_none() {
                            return self.err(InvalidBond("bond without a preceding atom".into()), start);
                        }
                        self.pending = Some((sym, start));
                        self.pos += 1;
                    } else {
                        let atom = self.organic_atom()?;
                        self.add_atom(atom, start)?;
                    }
                }
            }
        }
        if let Some(&(_, off)) = self.branches.last() {
            return self.err(UnbalancedParenthesis, off);
        }
        if let Some((_, off)) = self.pending {
            return self.err(InvalidBond("dangling bond".into()), off);
        }
        if let Some((&digit, open)) = self.rings.iter().min_by_key(|(_, r)| r.offset) {
            return self.err(UnclosedRingBond(digit), open.offset);
        }
        Ok(())
    }

    fn connect(&mut self, a: usize, b: usize, sym: Option<BondSymbol>, offset: usize) -> Result<(), SmilesError> {
        if a == b {
            return self.err(InvalidBond("ring closure to the same atom".into()), offset);
        }
        if self
            .bonds
            .iter()
            .any(|&(x, y, _)| (x == a && y == b) || (x == b && y == a))
        {
            return self.err(InvalidBond("duplicate bond".into()), offset);
        }
        let order = match sym {
            Some(s) => s.order(),
            None if self.atoms[a].aromatic && self.atoms[b].aromatic => BondOrder::Aromatic,
            None => BondOrder::Single,
        };
        self.bonds.push((a, b, order));
        Ok(())
    }

    fn add_atom(&mut self, atom: Atom, offset: usize) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        self.offsets.push(offset);
        let pending = self.pending.take();
        if let Some(prev) = self.prev {
            self.connect(prev, idx, pending.map(|p| p.0), offset)?;
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn ring_closure(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let digit = if self.input[start] == b'%' {
            let digits = self.input.get(start + 1..start + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    u16::from(d[0] - b'0') * 10 + u16::from(d[1] - b'0')
                }
                _ => return self.err(UnexpectedCharacter('%'), start),
            }
        } else {
            self.pos += 1;
            u16::from(self.input[start] - b'0')
        };
        let Some(atom) = self.prev else {
            return self.err(UnexpectedCharacter(self.input[start] as char), start);
        };
        let bond = self.pending.take().map(|p| p.0);
        match self.rings.remove(&digit) {
            Some(open) => {
                let sym = match (open.bond, bond) {
                    (Some(a), Some(b)) if a.order() != b.order() => {
                        return self.err(InvalidBond(format!("ring bond {digit} has conflicting orders")), start);
                    }
                    (a, b) => a.or(b),
                };
                self.connect(open.atom, atom, sym, start)?;
            }
            None => {
                self.rings.insert(
                    digit,
                    RingOpening {
                        atom,
                        bond,
                        offset: start,
                    },
                );
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        let c = self.input[start];
        let next = self.input.get(start + 1).copied();
        let (symbol, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => ("Cl", false, 2),
            (b'B', Some(b'r')) => ("Br", false, 2),
            (b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I', _) => {
                (std::str::from_utf8(&self.input[start..start + 1]).unwrap(), false, 1)
            }
            (b'b', _) => ("B", true, 1),
            (b'c', _) => ("C", true, 1),
            (b'n', _) => ("N", true, 1),
            (b'o', _) => ("O", true, 1),
            (b'p', _) => ("P", true, 1),
            (b's', _) => ("S", true, 1),
            _ => {
                let ch = std::str::from_utf8(&self.input[start..]).ok().and_then(|s| s.chars().next());
                return self.err(InvalidAtomToken(ch.map(String::from).unwrap_or_default()), start);
            }
        };
        self.pos += len;
        let element = Element::from_symbol(symbol).expect("organic subset symbol");
        Ok(Atom::new(element).aromatic(aromatic))
    }

    fn read_number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.input[start..self.pos]).ok()?.parse().ok()
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        let Some(rel_end) = self.input[start..].iter().position(|&c| c == b']') else {
            return self.err(InvalidAtomToken("unterminated bracket atom".into()), start);
        };
        let end = start + rel_end;
        let token = String::from_utf8_lossy(&self.input[start..=end]).into_owned();
        let bad = |s: &Self| s.err::<Atom>(InvalidAtomToken(token.clone()), start);
        self.pos += 1;

        let isotope = self.read_number();
        let (element, aromatic) = match self.bracket_symbol() {
            Some(x) => x,
            None => return bad(self),
        };
        // chirality is lexed but carries no graph semantics
        if self.peek() == Some(b'@') {
            self.pos += 1;
            if self.peek() == Some(b'@') {
                self.pos += 1;
            } else {
                let rest = &self.input[self.pos..end];
                if ["TH", "AL", "SP", "TB", "OH"].iter().any(|p| rest.starts_with(p.as_bytes())) {
                    self.pos += 2;
                    self.read_number();
                }
            }
        }
        let mut explicit_h = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            explicit_h = match self.read_number() {
                Some(n) if n <= 9 => n as u8,
                Some(_) => return bad(self),
                None => 1,
            };
        }
        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            charge = unit;
            if let Some(n) = self.read_number() {
                if n > 15 {
                    return bad(self);
                }
                charge = unit * n as i32;
            } else {
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge += unit;
                }
            }
        }
        let mut atom_map = None;
        if self.peek() == Some(b':') {
            self.pos += 1;
            match self.read_number() {
                Some(n) if n > 0 => atom_map = Some(n),
                Some(_) => {}
                None => return bad(self),
            }
        }
        if self.pos != end {
            return bad(self);
        }
        self.pos = end + 1;
        if aromatic && !element.can_be_aromatic() {
            return bad(self);
        }
        let isotope = match isotope {
            Some(0) | None => None,
            Some(n) if n <= u32::from(u16::MAX) => Some(n as u16),
            Some(_) => return bad(self),
        };
        Ok(Atom {
            element,
            charge: charge.clamp(-15, 15) as i8,
            aromatic,
            explicit_h: Some(explicit_h),
            isotope,
            atom_map,
        })
    }

    fn bracket_symbol(&mut self) -> Option<(Element, bool)> {
        let c = self.peek()?;
        if c.is_ascii_uppercase() {
            if let Some(n) = self.input.get(self.pos + 1).copied().filter(u8::is_ascii_lowercase) {
                let two = [c, n];
                if let Some(e) = std::str::from_utf8(&two).ok().and_then(Element::from_symbol) {
                    self.pos += 2;
                    return Some((e, false));
                }
            }
            let e = Element::from_symbol(std::str::from_utf8(&[c]).ok()?)?;
            self.pos += 1;
            return Some((e, false));
        }
        for (sym, e) in [("se", Element::SE), ("as", Element::AS)] {
            if self.input[self.pos..].starts_with(sym.as_bytes()) {
                self.pos += 2;
                return Some((e, true));
            }
        }
        let e = match c {
            b'b' => Element::B,
            b'c' => Element::C,
            b'n' => Element::N,
            b'o' => Element::O,
            b'p' => Element::P,
            b's' => Element::S,
            _ => return None,
        };
        self.pos += 1;
        Some((e, true))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn azide_charges_and_thioether() {
        let g = parse_smiles("CSc1ccc(CN=[N+]=[N-])cc1").unwrap();
        assert_eq!(g.atom_count(), 12);
        let ns: Vec<i8> = g
            .atoms()
            .iter()
            .filter(|a| a.element == Element::N)
            .map(|a| a.charge)
            .collect();
        assert_eq!(ns.len(), 3);
        assert!(ns.contains(&1) && ns.contains(&-1) && ns.contains(&0));
        assert_eq!(g.atoms().iter().filter(|a| a.element == Element::S).count(), 1);
        assert_eq!(g.ring_bonds().len(), 6);
        assert_eq!(g.atoms().iter().filter(|a| a.aromatic).count(), 6);
    }

    #[test]
    fn single_atom() {
        let g = parse_smiles("C").unwrap();
        assert_eq!(g.atom_count(), 1);
        assert!(g.bonds().is_empty());
    }

    #[test]
    fn dot_gives_components() {
        let g = parse_smiles("CCO.Cl").unwrap();
        assert_eq!(g.component_count(), 2);
    }

    #[test]
    fn bracket_atom_fields() {
        let g = parse_smiles("[13CH3:7][NH3+]").unwrap();
        let a = g.atom(0);
        assert_eq!(a.isotope, Some(13));
        assert_eq!(a.explicit_h, Some(3));
        assert_eq!(a.atom_map, Some(7));
        assert_eq!(g.atom(1).charge, 1);
        assert_eq!(parse_smiles("[Fe++]").unwrap().atom(0).charge, 2);
        assert_eq!(parse_smiles("[O-2]").unwrap().atom(0).charge, -2);
        assert!(parse_smiles("[C@@H](F)(Cl)Br").is_ok());
        assert_eq!(parse_smiles("[se]1cccc1").unwrap().atom(0).element, Element::SE);
    }

    #[test]
    fn ring_closures() {
        let g = parse_smiles("C%10CCCC%10").unwrap();
        assert_eq!(g.ring_bonds().len(), 5);
        let g = parse_smiles("C=1CCCC1").unwrap();
        assert_eq!(g.bond_between(0, 4).unwrap().order, BondOrder::Double);
        assert!(parse_smiles("C=1CCCC#1").is_err());
    }

    #[test]
    fn directional_bonds_are_single() {
        let g = parse_smiles("F/C=C/F").unwrap();
        assert_eq!(g.bonds()[0].order, BondOrder::Single);
        assert_eq!(g.bonds()[1].order, BondOrder::Double);
    }

    #[test]
    fn errors_carry_offsets() {
        let e = parse_smiles("").unwrap_err();
        assert_eq!(e.kind, EmptyInput);
        let e = parse_smiles("CC(C").unwrap_err();
        assert_eq!((e.kind, e.offset), (UnbalancedParenthesis, 2));
        let e = parse_smiles("CC)C").unwrap_err();
        assert_eq!((e.kind, e.offset), (UnbalancedParenthesis, 2));
        let e = parse_smiles("C1CC").unwrap_err();
        assert_eq!((e.kind, e.offset), (UnclosedRingBond(1), 1));
        let e = parse_smiles("CXC").unwrap_err();
        assert_eq!(e.offset, 1);
        assert!(matches!(e.kind, InvalidAtomToken(_)));
        let e = parse_smiles("C[Xy]").unwrap_err();
        assert_eq!(e.offset, 1);
        assert!(matches!(parse_smiles("C1C1").unwrap_err().kind, InvalidBond(_)));
        assert!(matches!(parse_smiles("CC=").unwrap_err().kind, InvalidBond(_)));
        assert!(matches!(parse_smiles("[f]").unwrap_err().kind, InvalidAtomToken(_)));
    }

    #[test]
    fn valence_is_a_warning() {
        let (g, warnings) = parse_smiles_with_warnings("C(C)(C)(C)(C)C").unwrap();
        assert_eq!(g.atom_count(), 6);
        assert_eq!(warnings.len(), 1);
        assert!(matches!(warnings[0].kind, ValenceViolation { .. }));
        assert_eq!(warnings[0].offset, 0);
        let (_, warnings) = parse_smiles_with_warnings("CCO(C)C").unwrap();
        assert_eq!(warnings[0].offset, 2);
    }
}

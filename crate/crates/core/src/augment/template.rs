//! Radius-1 reaction templates: extraction from atom-mapped reactions, a stable
//! text serialization, and application to new products.
//!
//! Serialization (one line, no tabs):
//!
//! ```text
//! <product atoms> ; <product bonds> >> <reactant atoms> ; <reactant bonds>
//! ```
//!
//! Product atoms are `Sym,arom,charge,h,degree` where `h` and `degree` are `*` for
//! atoms that only match on element, aromaticity and charge (the radius-1 shell);
//! reaction-center atoms carry both. Reactant atoms are `Sym,arom,charge,h`; the
//! first entries correspond one-to-one with the product atoms, the rest are
//! leaving-group atoms. Bonds are `i-j:o` with `o` in `1 2 3 a`. Atoms are listed in
//! canonical order, so equal templates serialize identically.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use log::warn;
use sha2::{Digest, Sha256};

use crate::chem::canon::{canonical_search, ranks_from_keys};
use crate::chem::{Atom, BondOrder, Element, MolGraph, MoleculeSet};

use super::{AugmentError, ReactionExample, Source};

/// Embeddings enumerated per (template, molecule) before giving up.
pub const EMBEDDING_CAP: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternAtom {
    pub element: Element,
    pub aromatic: bool,
    pub charge: i8,
    /// Total hydrogen count; constrained only on reaction-center atoms.
    pub h: Option<u8>,
    /// Heavy-atom degree; constrained only on reaction-center atoms.
    pub degree: Option<u8>,
}

impl PatternAtom {
    pub fn is_center(&self) -> bool {
        self.degree.is_some()
    }

    pub fn matches(&self, g: &MolGraph, v: usize) -> bool {
        let a = g.atom(v);
        a.element == self.element
            && a.aromatic == self.aromatic
            && a.charge == self.charge
            && self.h.is_none_or(|h| g.total_h(v) == h)
            && self.degree.is_none_or(|d| g.degree(v) == usize::from(d))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReactantAtom {
    pub element: Element,
    pub aromatic: bool,
    pub charge: i8,
    pub h: u8,
}

impl ReactantAtom {
    fn to_atom(&self) -> Atom {
        Atom {
            element: self.element,
            charge: self.charge,
            aromatic: self.aromatic,
            explicit_h: Some(self.h),
            isotope: None,
            atom_map: None,
        }
    }
}

/// Product pattern rewritten into reactant patterns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub id: String,
    pub product_atoms: Vec<PatternAtom>,
    pub product_bonds: Vec<(usize, usize, BondOrder)>,
    /// The first `product_atoms.len()` entries are the mapped pattern atoms.
    pub reactant_atoms: Vec<ReactantAtom>,
    pub reactant_bonds: Vec<(usize, usize, BondOrder)>,
    pub count: usize,
}

fn order_code(o: BondOrder) -> char {
    match o {
        BondOrder::Single => '1',
        BondOrder::Double => '2',
        BondOrder::Triple => '3',
        BondOrder::Aromatic => 'a',
    }
}

fn order_from_code(c: &str) -> Option<BondOrder> {
    Some(match c {
        "1" => BondOrder::Single,
        "2" => BondOrder::Double,
        "3" => BondOrder::Triple,
        "a" => BondOrder::Aromatic,
        _ => return None,
    })
}

fn opt_text(v: Option<u8>) -> String {
    v.map_or_else(|| "*".to_string(), |x| x.to_string())
}

impl Template {
    pub fn leaving_atoms(&self) -> std::ops::Range<usize> {
        self.product_atoms.len()..self.reactant_atoms.len()
    }

    /// Serializes in the given node order (`order[k]` = node placed at position k).
    fn serialize_in(&self, order: &[usize]) -> String {
        let np = self.product_atoms.len();
        let mut pos = vec![0; order.len()];
        for (k, &node) in order.iter().enumerate() {
            pos[node] = k;
        }
        let mut s = String::new();
        let product_nodes: Vec<usize> = order.iter().copied().filter(|&n| n < np).collect();
        let atoms: Vec<String> = product_nodes
            .iter()
            .map(|&n| {
                let a = &self.product_atoms[n];
                format!(
                    "{},{},{},{},{}",
                    a.element,
                    u8::from(a.aromatic),
                    a.charge,
                    opt_text(a.h),
                    opt_text(a.degree)
                )
            })
            .collect();
        s.push_str(&atoms.join(" "));
        s.push_str(" ; ");
        s.push_str(&bond_text(&self.product_bonds, &pos));
        s.push_str(" >> ");
        let atoms: Vec<String> = order
            .iter()
            .map(|&n| {
                let a = &self.reactant_atoms[n];
                format!("{},{},{},{}", a.element, u8::from(a.aromatic), a.charge, a.h)
            })
            .collect();
        s.push_str(&atoms.join(" "));
        s.push_str(" ; ");
        s.push_str(&bond_text(&self.reactant_bonds, &pos));
        s
    }

    /// Canonical serialization (see module docs).
    pub fn serialize(&self) -> String {
        let order: Vec<usize> = (0..self.reactant_atoms.len()).collect();
        self.serialize_in(&order)
    }

    /// Reorders atoms canonically and assigns the content hash id.
    fn canonicalized(mut self) -> Self {
        let n = self.reactant_atoms.len();
        let np = self.product_atoms.len();
        let keys: Vec<_> = (0..n)
            .map(|i| {
                let p = self.product_atoms.get(i).cloned();
                (i >= np, p, self.reactant_atoms[i].clone())
            })
            .collect();
        let mut colors: HashMap<(usize, usize), u8> = HashMap::new();
        for &(a, b, o) in &self.product_bonds {
            *colors.entry((a.min(b), a.max(b))).or_default() += order_code_num(o) * 8;
        }
        for &(a, b, o) in &self.reactant_bonds {
            *colors.entry((a.min(b), a.max(b))).or_default() += order_code_num(o);
        }
        let mut adj = vec![Vec::new(); n];
        for (&(a, b), &c) in &colors {
            adj[a].push((b, c));
            adj[b].push((a, c));
        }
        let (_, ranks) = canonical_search(ranks_from_keys(&keys), &adj, |ranks| {
            self.serialize_in(&order_from_ranks(ranks))
        });
        let order = order_from_ranks(&ranks);
        let mut pos = vec![0; n];
        for (k, &node) in order.iter().enumerate() {
            pos[node] = k;
        }
        let product_atoms = order.iter().filter(|&&i| i < np).map(|&i| self.product_atoms[i].clone()).collect();
        let reactant_atoms = order.iter().map(|&i| self.reactant_atoms[i].clone()).collect();
        self.product_bonds = remap_bonds(&self.product_bonds, &pos);
        self.reactant_bonds = remap_bonds(&self.reactant_bonds, &pos);
        self.product_atoms = product_atoms;
        self.reactant_atoms = reactant_atoms;
        self.id = hash_id(&self.serialize());
        self
    }

    pub fn parse(text: &str) -> Result<Self, AugmentError> {
        let bad = |m: &str| AugmentError::TemplateFormat(format!("{m}: {text:?}"));
        let (prod, react) = text.split_once(">>").ok_or_else(|| bad("missing >>"))?;
        let (pa, pb) = prod.split_once(';').ok_or_else(|| bad("missing ; in product"))?;
        let (ra, rb) = react.split_once(';').ok_or_else(|| bad("missing ; in reactants"))?;
        let parse_opt = |s: &str| -> Result<Option<u8>, AugmentError> {
            if s == "*" {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad("bad count"))
            }
        };
        let mut product_atoms = Vec::new();
        for tok in pa.split_whitespace() {
            let f: Vec<&str> = tok.split(',').collect();
            if f.len() != 5 {
                return Err(bad("product atom needs 5 fields"));
            }
            product_atoms.push(PatternAtom {
                element: Element::from_symbol(f[0]).ok_or_else(|| bad("element"))?,
                aromatic: f[1] == "1",
                charge: f[2].parse().map_err(|_| bad("charge"))?,
                h: parse_opt(f[3])?,
                degree: parse_opt(f[4])?,
            });
        }
        let mut reactant_atoms = Vec::new();
        for tok in ra.split_whitespace() {
            let f: Vec<&str> = tok.split(',').collect();
            if f.len() != 4 {
                return Err(bad("reactant atom needs 4 fields"));
            }
            reactant_atoms.push(ReactantAtom {
                element: Element::from_symbol(f[0]).ok_or_else(|| bad("element"))?,
                aromatic: f[1] == "1",
                charge: f[2].parse().map_err(|_| bad("charge"))?,
                h: f[3].parse().map_err(|_| bad("h"))?,
            });
        }
        if reactant_atoms.len() < product_atoms.len() {
            return Err(bad("fewer reactant atoms than product atoms"));
        }
        let parse_bonds = |s: &str, n: usize| -> Result<Vec<(usize, usize, BondOrder)>, AugmentError> {
            s.split_whitespace()
                .map(|tok| {
                    let (ends, o) = tok.split_once(':').ok_or_else(|| bad("bond"))?;
                    let (a, b) = ends.split_once('-').ok_or_else(|| bad("bond"))?;
                    let a: usize = a.parse().map_err(|_| bad("bond index"))?;
                    let b: usize = b.parse().map_err(|_| bad("bond index"))?;
                    if a >= n || b >= n || a == b {
                        return Err(bad("bond index out of range"));
                    }
                    Ok((a, b, order_from_code(o).ok_or_else(|| bad("bond order"))?))
                })
                .collect()
        };
        let product_bonds = parse_bonds(pb, product_atoms.len())?;
        let reactant_bonds = parse_bonds(rb, reactant_atoms.len())?;
        let t = Template {
            id: String::new(),
            product_atoms,
            product_bonds,
            reactant_atoms,
            reactant_bonds,
            count: 0,
        };
        Ok(t.canonicalized())
    }

    /// Template-store line: `id<TAB>count<TAB>serialization`.
    pub fn to_store_line(&self) -> String {
        format!("{}\t{}\t{}", self.id, self.count, self.serialize())
    }

    pub fn from_store_line(line: &str) -> Result<Self, AugmentError> {
        let cols: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
        if cols.len() != 3 {
            return Err(AugmentError::TemplateFormat(format!("expected 3 columns: {line:?}")));
        }
        let mut t = Self::parse(cols[2])?;
        if t.id != cols[0] {
            return Err(AugmentError::TemplateFormat(format!(
                "id {} does not match serialization hash {}",
                cols[0], t.id
            )));
        }
        t.count = cols[1]
            .parse()
            .map_err(|_| AugmentError::TemplateFormat(format!("bad count {:?}", cols[1])))?;
        Ok(t)
    }

    /// Bond changes as element-labeled `(product order -> reactant order)` entries,
    /// sorted; `0` marks an absent bond.
    pub fn changed_bond_signature(&self) -> String {
        let np = self.product_atoms.len();
        let mut prod: HashMap<(usize, usize), BondOrder> = HashMap::new();
        for &(a, b, o) in &self.product_bonds {
            prod.insert((a.min(b), a.max(b)), o);
        }
        let mut react: HashMap<(usize, usize), BondOrder> = HashMap::new();
        for &(a, b, o) in &self.reactant_bonds {
            react.insert((a.min(b), a.max(b)), o);
        }
        let keys: BTreeSet<(usize, usize)> = prod.keys().chain(react.keys()).copied().collect();
        let sym = |i: usize| {
            let a = &self.reactant_atoms[i];
            if a.aromatic {
                a.element.symbol().to_ascii_lowercase()
            } else {
                a.element.symbol().to_string()
            }
        };
        let mut entries: Vec<String> = keys
            .into_iter()
            .filter(|k| prod.get(k) != react.get(k))
            .filter(|&(a, b)| a < np || b < np)
            .map(|(a, b)| {
                let (x, y) = (sym(a), sym(b));
                let (x, y) = if x <= y { (x, y) } else { (y, x) };
                let o = |m: &HashMap<(usize, usize), BondOrder>| m.get(&(a, b)).map_or('0', |&o| order_code(o));
                format!("{x}-{y}:{}>{}", o(&prod), o(&react))
            })
            .collect();
        entries.sort();
        entries.join(",")
    }

    /// Reactant-side pattern split into connected pieces (atom index lists).
    pub fn reactant_patterns(&self) -> Vec<Vec<usize>> {
        let atoms = self.reactant_atoms.iter().map(ReactantAtom::to_atom).collect();
        MolGraph::from_parts(atoms, self.reactant_bonds.clone())
            .map(|g| g.components())
            .unwrap_or_default()
    }

    fn element_demand(&self) -> HashMap<Element, usize> {
        let mut m = HashMap::new();
        for a in &self.product_atoms {
            *m.entry(a.element).or_default() += 1;
        }
        m
    }
}

fn order_code_num(o: BondOrder) -> u8 {
    o.code()
}

fn order_from_ranks(ranks: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ranks.len()).collect();
    order.sort_by_key(|&i| ranks[i]);
    order
}

fn remap_bonds(bonds: &[(usize, usize, BondOrder)], pos: &[usize]) -> Vec<(usize, usize, BondOrder)> {
    let mut out: Vec<_> = bonds
        .iter()
        .map(|&(a, b, o)| {
            let (x, y) = (pos[a], pos[b]);
            (x.min(y), x.max(y), o)
        })
        .collect();
    out.sort();
    out
}

fn bond_text(bonds: &[(usize, usize, BondOrder)], pos: &[usize]) -> String {
    let mut v: Vec<(usize, usize, BondOrder)> = bonds
        .iter()
        .filter(|&&(a, b, _)| a < pos.len() && b < pos.len())
        .map(|&(a, b, o)| {
            let (x, y) = (pos[a], pos[b]);
            (x.min(y), x.max(y), o)
        })
        .collect();
    v.sort();
    let mut s = String::new();
    for (k, (a, b, o)) in v.iter().enumerate() {
        if k > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{a}-{b}:{}", order_code(*o));
    }
    s
}

fn hash_id(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Extracts the radius-1 template of an atom-mapped reaction.
pub fn extract_template(r: &ReactionExample) -> Result<Template, AugmentError> {
    let p = &r.product;
    let rg = r.reactants.as_graph();

    let mut p_of_map: HashMap<u32, usize> = HashMap::new();
    for (i, a) in p.atoms().iter().enumerate() {
        let Some(m) = a.atom_map else {
            return Err(AugmentError::UnmappedAtoms(format!("{}: product atom {i} has no map", r.id)));
        };
        if p_of_map.insert(m, i).is_some() {
            return Err(AugmentError::UnmappedAtoms(format!("{}: duplicate product map {m}", r.id)));
        }
    }
    // reactant atom -> product atom, for maps that reach the product
    let mut r_to_p: Vec<Option<usize>> = vec![None; rg.atom_count()];
    let mut p_to_r: Vec<Option<usize>> = vec![None; p.atom_count()];
    for (i, a) in rg.atoms().iter().enumerate() {
        if let Some(&pi) = a.atom_map.and_then(|m| p_of_map.get(&m)) {
            if p_to_r[pi].is_some() {
                return Err(AugmentError::UnmappedAtoms(format!("{}: duplicate reactant map", r.id)));
            }
            r_to_p[i] = Some(pi);
            p_to_r[pi] = Some(i);
        }
    }
    if let Some(pi) = p_to_r.iter().position(Option::is_none) {
        return Err(AugmentError::UnmappedAtoms(format!(
            "{}: product atom {pi} has no reactant counterpart",
            r.id
        )));
    }
    let p_to_r: Vec<usize> = p_to_r.into_iter().map(Option::unwrap).collect();

    let mut changed = vec![false; p.atom_count()];
    for (pi, &ri) in p_to_r.iter().enumerate() {
        let (pa, ra) = (p.atom(pi), rg.atom(ri));
        if pa.element != ra.element
            || pa.charge != ra.charge
            || pa.aromatic != ra.aromatic
            || p.total_h(pi) != rg.total_h(ri)
        {
            changed[pi] = true;
        }
    }
    for b in p.bonds() {
        let same = rg
            .bond_between(p_to_r[b.a], p_to_r[b.b])
            .is_some_and(|rb| rb.order == b.order);
        if !same {
            changed[b.a] = true;
            changed[b.b] = true;
        }
    }
    for b in rg.bonds() {
        match (r_to_p[b.a], r_to_p[b.b]) {
            (Some(x), Some(y)) => {
                if p.bond_between(x, y).is_none() {
                    changed[x] = true;
                    changed[y] = true;
                }
            }
            (Some(x), None) | (None, Some(x)) => changed[x] = true,
            (None, None) => {}
        }
    }
    if !changed.iter().any(|&c| c) {
        return Err(AugmentError::NoChange(r.id.clone()));
    }

    // pattern = reaction center plus its product neighbors
    let mut in_pattern = changed.clone();
    for (pi, &c) in changed.iter().enumerate() {
        if c {
            for &(nb, _) in p.neighbors(pi) {
                in_pattern[nb] = true;
            }
        }
    }
    let pattern: Vec<usize> = (0..p.atom_count()).filter(|&i| in_pattern[i]).collect();
    let mut node_of_p: HashMap<usize, usize> = HashMap::new();
    for (k, &pi) in pattern.iter().enumerate() {
        node_of_p.insert(pi, k);
    }
    let product_atoms: Vec<PatternAtom> = pattern
        .iter()
        .map(|&pi| {
            let a = p.atom(pi);
            let center = changed[pi];
            PatternAtom {
                element: a.element,
                aromatic: a.aromatic,
                charge: a.charge,
                h: center.then(|| p.total_h(pi)),
                degree: center.then(|| p.degree(pi) as u8),
            }
        })
        .collect();
    let product_bonds: Vec<(usize, usize, BondOrder)> = p
        .bonds()
        .iter()
        .filter_map(|b| Some((*node_of_p.get(&b.a)?, *node_of_p.get(&b.b)?, b.order)))
        .collect();

    // leaving groups: reactant atoms outside the product reachable from the center
    let mut node_of_r: HashMap<usize, usize> = pattern
        .iter()
        .enumerate()
        .map(|(k, &pi)| (p_to_r[pi], k))
        .collect();
    let mut reactant_atoms: Vec<ReactantAtom> = pattern
        .iter()
        .map(|&pi| reactant_atom(&rg, p_to_r[pi]))
        .collect();
    let mut queue: VecDeque<usize> = pattern
        .iter()
        .filter(|&&pi| changed[pi])
        .map(|&pi| p_to_r[pi])
        .collect();
    let mut seen: HashSet<usize> = queue.iter().copied().collect();
    while let Some(v) = queue.pop_front() {
        for &(w, _) in rg.neighbors(v) {
            if r_to_p[w].is_none() && seen.insert(w) {
                node_of_r.insert(w, reactant_atoms.len());
                reactant_atoms.push(reactant_atom(&rg, w));
                queue.push_back(w);
            }
        }
    }
    let reactant_bonds: Vec<(usize, usize, BondOrder)> = rg
        .bonds()
        .iter()
        .filter_map(|b| Some((*node_of_r.get(&b.a)?, *node_of_r.get(&b.b)?, b.order)))
        .collect();

    Ok(Template {
        id: String::new(),
        product_atoms,
        product_bonds,
        reactant_atoms,
        reactant_bonds,
        count: 1,
    }
    .canonicalized())
}

fn reactant_atom(g: &MolGraph, i: usize) -> ReactantAtom {
    let a = g.atom(i);
    ReactantAtom {
        element: a.element,
        aromatic: a.aromatic,
        charge: a.charge,
        h: g.total_h(i),
    }
}

/// Search order: each pattern atom after the first of its component has an
/// earlier-placed neighbor (its anchor).
fn match_order(t: &Template) -> Vec<(usize, Option<usize>)> {
    let n = t.product_atoms.len();
    let mut adj = vec![Vec::new(); n];
    for &(a, b, _) in &t.product_bonds {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let root = (0..n)
            .filter(|&i| !placed[i])
            .max_by_key(|&i| (t.product_atoms[i].is_center(), adj[i].len(), std::cmp::Reverse(i)))
            .unwrap();
        placed[root] = true;
        let mut queue = VecDeque::from([root]);
        order.push((root, None));
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !placed[w] {
                    placed[w] = true;
                    order.push((w, Some(v)));
                    queue.push_back(w);
                }
            }
        }
    }
    order
}

/// Subgraph embeddings of the product pattern into `g`, as pattern-index →
/// atom-index vectors. The flag reports whether the cap was hit.
pub fn find_embeddings(t: &Template, g: &MolGraph, cap: usize) -> (Vec<Vec<usize>>, bool) {
    let n = t.product_atoms.len();
    let mut out = Vec::new();
    if n == 0 || n > g.atom_count() {
        return (out, false);
    }
    let mut have: HashMap<Element, usize> = HashMap::new();
    for a in g.atoms() {
        *have.entry(a.element).or_default() += 1;
    }
    if t.element_demand().iter().any(|(e, &k)| have.get(e).copied().unwrap_or(0) < k) {
        return (out, false);
    }
    let order = match_order(t);
    let mut bonds: HashMap<(usize, usize), BondOrder> = HashMap::new();
    let mut pattern_adj = vec![Vec::new(); n];
    for &(a, b, o) in &t.product_bonds {
        bonds.insert((a, b), o);
        bonds.insert((b, a), o);
        pattern_adj[a].push(b);
        pattern_adj[b].push(a);
    }
    let mut assign = vec![usize::MAX; n];
    let mut used = vec![false; g.atom_count()];
    let mut capped = false;
    extend_match(
        t, g, &order, &bonds, &pattern_adj, 0, &mut assign, &mut used, &mut out, cap, &mut capped,
    );
    if capped {
        warn!("template {} hit the embedding cap of {cap}", t.id);
    }
    (out, capped)
}

#[allow(clippy::too_many_arguments)]
fn extend_match(
    t: &Template,
    g: &MolGraph,
    order: &[(usize, Option<usize>)],
    bonds: &HashMap<(usize, usize), BondOrder>,
    pattern_adj: &[Vec<usize>],
    depth: usize,
    assign: &mut Vec<usize>,
    used: &mut Vec<bool>,
    out: &mut Vec<Vec<usize>>,
    cap: usize,
    capped: &mut bool,
) {
    if out.len() >= cap {
        *capped = true;
        return;
    }
    if depth == order.len() {
        out.push(assign.clone());
        return;
    }
    let (p, anchor) = order[depth];
    let candidates: Vec<usize> = match anchor {
        Some(q) => g.neighbors(assign[q]).iter().map(|&(w, _)| w).collect(),
        None => (0..g.atom_count()).collect(),
    };
    for v in candidates {
        if used[v] || !t.product_atoms[p].matches(g, v) {
            continue;
        }
        let consistent = pattern_adj[p].iter().all(|&q| {
            assign[q] == usize::MAX
                || g.bond_between(v, assign[q]).is_some_and(|b| Some(&b.order) == bonds.get(&(p, q)))
        });
        if !consistent {
            continue;
        }
        assign[p] = v;
        used[v] = true;
        extend_match(t, g, order, bonds, pattern_adj, depth + 1, assign, used, out, cap, capped);
        used[v] = false;
        assign[p] = usize::MAX;
        if *capped {
            return;
        }
    }
}

/// Rewrites `g` at one embedding into the reactant graph.
pub fn rewrite(t: &Template, g: &MolGraph, embedding: &[usize]) -> Option<MolGraph> {
    let np = t.product_atoms.len();
    let mut atoms = g.atoms().to_vec();
    for (k, pa) in t.product_atoms.iter().enumerate() {
        if pa.is_center() {
            let ra = &t.reactant_atoms[k];
            let a = &mut atoms[embedding[k]];
            a.charge = ra.charge;
            a.aromatic = ra.aromatic;
            a.explicit_h = Some(ra.h);
        }
    }
    let mut removed: HashSet<(usize, usize)> = HashSet::new();
    for &(a, b, _) in &t.product_bonds {
        let (x, y) = (embedding[a], embedding[b]);
        removed.insert((x.min(y), x.max(y)));
    }
    let node = |k: usize, atoms_len: usize| if k < np { embedding[k] } else { atoms_len + k - np };
    let base = atoms.len();
    let mut added: HashMap<(usize, usize), BondOrder> = HashMap::new();
    for &(a, b, o) in &t.reactant_bonds {
        let (x, y) = (node(a, base), node(b, base));
        added.insert((x.min(y), x.max(y)), o);
    }
    let mut bonds: Vec<(usize, usize, BondOrder)> = g
        .bonds()
        .iter()
        .filter(|b| {
            let key = (b.a.min(b.b), b.a.max(b.b));
            !removed.contains(&key) && !added.contains_key(&key)
        })
        .map(|b| (b.a, b.b, b.order))
        .collect();
    let mut extra: Vec<_> = added.into_iter().map(|((x, y), o)| (x, y, o)).collect();
    extra.sort();
    bonds.extend(extra);
    atoms.extend(t.reactant_atoms[np..].iter().map(ReactantAtom::to_atom));
    MolGraph::from_parts(atoms, bonds).ok()
}

/// Distinct reactant sets obtainable by applying `t` to `g`, keyed by canonical form,
/// in embedding order.
pub fn apply_template_sets(t: &Template, g: &MolGraph) -> Vec<(String, MoleculeSet)> {
    let g = g.without_atom_maps();
    let (embeddings, _) = find_embeddings(t, &g, EMBEDDING_CAP);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for e in embeddings {
        let Some(rg) = rewrite(t, &g, &e) else { continue };
        let set = MoleculeSet::from_graph(&rg);
        let key = set.canonical();
        if seen.insert(key.clone()) {
            out.push((key, set));
        }
    }
    out
}

/// One example per distinct rewrite of `g` by `t`.
pub fn apply_template(t: &Template, g: &MolGraph) -> Vec<ReactionExample> {
    apply_template_sets(t, g)
        .into_iter()
        .enumerate()
        .filter_map(|(k, (_, set))| {
            ReactionExample::new(format!("{}-{k}", t.id), g.clone(), set, None, Source::TemplatePretrain).ok()
        })
        .collect()
}

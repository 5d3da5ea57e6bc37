use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::element::Element;
use super::graph::{Atom, BondOrder, MolGraph};

const ELEMENTS: [(&str, f64); 7] = [
    ("C", 0.60),
    ("N", 0.12),
    ("O", 0.12),
    ("S", 0.04),
    ("F", 0.04),
    ("Cl", 0.04),
    ("Br", 0.04),
];

struct Builder {
    atoms: Vec<Atom>,
    /// Unused valence per atom.
    free: Vec<i32>,
    bonds: Vec<(usize, usize, BondOrder)>,
}

impl Builder {
    fn add(&mut self, atom: Atom, free: i32) -> usize {
        self.atoms.push(atom);
        self.free.push(free);
        self.atoms.len() - 1
    }

    fn bond(&mut self, a: usize, b: usize, order: BondOrder) {
        let v = order.valence();
        self.free[a] -= v;
        self.free[b] -= v;
        self.bonds.push((a, b, order));
    }

    fn bonded(&self, a: usize, b: usize) -> bool {
        self.bonds.iter().any(|&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a))
    }

    fn open_atoms(&self) -> Vec<usize> {
        (0..self.atoms.len()).filter(|&i| self.free[i] > 0).collect()
    }

    /// Six-membered aromatic ring, optionally with one pyridine-type nitrogen.
    fn ring(&mut self, rng: &mut ChaCha8Rng) -> usize {
        let n_pos = rng.gen_bool(0.3).then(|| rng.gen_range(1..6));
        let start = self.atoms.len();
        for k in 0..6 {
            if Some(k) == n_pos {
                self.add(Atom::new(element("N")).aromatic(true), 1);
            } else {
                self.add(Atom::new(element("C")).aromatic(true), 2);
            }
        }
        for k in 0..6 {
            self.bond(start + k, start + (k + 1) % 6, BondOrder::Aromatic);
        }
        start
    }
}

fn element(sym: &str) -> Element {
    Element::from_symbol(sym).expect("table element")
}

fn pick_element(rng: &mut ChaCha8Rng) -> &'static str {
    let mut x = rng.gen::<f64>();
    for (s, w) in ELEMENTS {
        if x < w {
            return s;
        }
        x -= w;
    }
    "C"
}

fn attempt(rng: &mut ChaCha8Rng, max_atoms: usize) -> Option<MolGraph> {
    let target = rng.gen_range(2..=max_atoms.max(2));
    let mut b = Builder {
        atoms: Vec::new(),
        free: Vec::new(),
        bonds: Vec::new(),
    };
    if target >= 6 && rng.gen_bool(0.4) {
        b.ring(rng);
    } else {
        b.add(Atom::new(element("C")), 4);
    }
    while b.atoms.len() < target {
        let open = b.open_atoms();
        if open.is_empty() {
            break;
        }
        let parent = open[rng.gen_range(0..open.len())];
        if b.atoms.len() + 6 <= target && rng.gen_bool(0.06) {
            let r = b.ring(rng);
            let at = (r..r + 6).find(|&i| b.free[i] > 0)?;
            b.bond(parent, at, BondOrder::Single);
            continue;
        }
        let sym = pick_element(rng);
        let el = element(sym);
        let (atom, free) = match sym {
            "N" if rng.gen_bool(0.05) => (Atom::new(el).with_charge(1), 4),
            "O" if rng.gen_bool(0.05) => (Atom::new(el).with_charge(-1), 1),
            _ => (Atom::new(el), i32::from(el.valences()[0])),
        };
        let child = b.add(atom, free);
        b.bond(parent, child, BondOrder::Single);
    }
    // Ring closures among aliphatic atoms.
    for _ in 0..rng.gen_range(0..=2) {
        let open: Vec<usize> = b.open_atoms().into_iter().filter(|&i| !b.atoms[i].aromatic).collect();
        if open.len() < 2 {
            break;
        }
        let x = open[rng.gen_range(0..open.len())];
        let y = open[rng.gen_range(0..open.len())];
        if x != y && !b.bonded(x, y) {
            b.bond(x, y, BondOrder::Single);
        }
    }
    // Unsaturation on aliphatic single bonds.
    for i in 0..b.bonds.len() {
        let (x, y, order) = b.bonds[i];
        if order != BondOrder::Single || b.atoms[x].aromatic || b.atoms[y].aromatic {
            continue;
        }
        let up = if b.free[x] >= 2 && b.free[y] >= 2 && rng.gen_bool(0.04) {
            2
        } else if b.free[x] >= 1 && b.free[y] >= 1 && rng.gen_bool(0.15) {
            1
        } else {
            0
        };
        if up > 0 {
            b.free[x] -= up;
            b.free[y] -= up;
            b.bonds[i].2 = if up == 2 { BondOrder::Triple } else { BondOrder::Double };
        }
    }
    MolGraph::new(b.atoms, b.bonds).ok()
}

/// Random connected, valence-valid molecule with at most `max_atoms` heavy atoms
/// (aromatic rings may overshoot by up to five). Mixes aliphatic chains and rings,
/// unsaturation, halogens, charged N/O and benzene or pyridine rings.
pub fn random_molecule(rng: &mut ChaCha8Rng, max_atoms: usize) -> MolGraph {
    loop {
        if let Some(g) = attempt(rng, max_atoms) {
            return g;
        }
    }
}

/// `n` molecules from one seed.
pub fn random_molecules(n: usize, max_atoms: usize, seed: u64) -> Vec<MolGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_molecule(&mut rng, max_atoms)).collect()
}

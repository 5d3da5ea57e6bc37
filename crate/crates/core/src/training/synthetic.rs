use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Letters of the toy alphabet.
pub const ALPHABET: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];

/// Deterministic string transformations; each is one "reaction type".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Identity,
    Reverse,
    /// Every letter advanced by one, wrapping around the alphabet.
    Shift,
    /// Adjacent pairs swapped.
    SwapPairs,
    /// First letter moved to the end.
    Rotate,
}

pub const MODES: [Mode; 5] = [Mode::Identity, Mode::Reverse, Mode::Shift, Mode::SwapPairs, Mode::Rotate];

impl Mode {
    pub fn apply(self, s: &[String]) -> Vec<String> {
        match self {
            Mode::Identity => s.to_vec(),
            Mode::Reverse => s.iter().rev().cloned().collect(),
            Mode::Shift => s
                .iter()
                .map(|t| {
                    let i = ALPHABET.iter().position(|a| a == t).unwrap_or(0);
                    ALPHABET[(i + 1) % ALPHABET.len()].to_string()
                })
                .collect(),
            Mode::SwapPairs => {
                let mut v = s.to_vec();
                for pair in v.chunks_mut(2) {
                    pair.reverse();
                }
                v
            }
            Mode::Rotate => {
                let mut v = s.to_vec();
                if !v.is_empty() {
                    v.rotate_left(1);
                }
                v
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticExample {
    pub id: String,
    pub source: Vec<String>,
    pub target: Vec<String>,
    /// Index into the task's modes.
    pub mode: usize,
}

/// One-to-many string task: every source is paired with each of `modes`.
#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub modes: Vec<Mode>,
    pub examples: Vec<SyntheticExample>,
}

impl SyntheticTask {
    /// Every token the task can emit.
    pub fn tokens(&self) -> Vec<String> {
        ALPHABET.iter().map(|s| s.to_string()).collect()
    }

    /// Index of the mode that turns `source` into `target`, if exactly one does.
    pub fn classify(&self, source: &[String], target: &[String]) -> Option<usize> {
        let hits: Vec<usize> = (0..self.modes.len())
            .filter(|&m| self.modes[m].apply(source) == target)
            .collect();
        (hits.len() == 1).then(|| hits[0])
    }

    /// Distinct sources in first-appearance order.
    pub fn sources(&self) -> Vec<Vec<String>> {
        let mut seen = HashSet::new();
        self.examples
            .iter()
            .filter(|e| seen.insert(e.source.clone()))
            .map(|e| e.source.clone())
            .collect()
    }
}

fn random_source(rng: &mut ChaCha8Rng, modes: &[Mode], min_len: usize, max_len: usize) -> Vec<String> {
    loop {
        let len = rng.gen_range(min_len..=max_len);
        let s: Vec<String> = (0..len)
            .map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())].to_string())
            .collect();
        let outs: HashSet<Vec<String>> = modes.iter().map(|m| m.apply(&s)).collect();
        if outs.len() == modes.len() {
            return s;
        }
    }
}

/// `n_examples` pairs over `ceil(n_examples / n_modes)` fresh sources, each source
/// emitted once per mode, shuffled. Sources whose mode outputs collide are rejected,
/// so the generating mode of every example is recoverable. `exclude` sources are
/// never drawn.
pub fn make_synthetic_multimodal_excluding(
    n_modes: usize,
    n_examples: usize,
    seed: u64,
    exclude: &HashSet<Vec<String>>,
) -> SyntheticTask {
    assert!((2..=MODES.len()).contains(&n_modes), "n_modes must be in 2..={}", MODES.len());
    let modes = MODES[..n_modes].to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_sources = n_examples.div_ceil(n_modes);
    let mut seen = exclude.clone();
    let mut examples = Vec::with_capacity(n_sources * n_modes);
    let mut k = 0;
    while k < n_sources {
        let s = random_source(&mut rng, &modes, 4, 8);
        if !seen.insert(s.clone()) {
            continue;
        }
        for (m, mode) in modes.iter().enumerate() {
            examples.push(SyntheticExample {
                id: format!("s{k}m{}", m + 1),
                target: mode.apply(&s),
                source: s.clone(),
                mode: m,
            });
        }
        k += 1;
    }
    examples.shuffle(&mut rng);
    examples.truncate(n_examples);
    SyntheticTask { modes, examples }
}

pub fn make_synthetic_multimodal(n_modes: usize, n_examples: usize, seed: u64) -> SyntheticTask {
    make_synthetic_multimodal_excluding(n_modes, n_examples, seed, &HashSet::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.chars().map(|c| c.to_string()).collect()
    }

    #[test]
    fn modes_behave() {
        assert_eq!(Mode::Reverse.apply(&toks("abcd")), toks("dcba"));
        assert_eq!(Mode::Shift.apply(&toks("agh")), toks("bha"));
        assert_eq!(Mode::SwapPairs.apply(&toks("abcde")), toks("badce"));
        assert_eq!(Mode::Rotate.apply(&toks("abcd")), toks("bcda"));
    }

    #[test]
    fn two_modes_every_source_has_both_targets() {
        let t = make_synthetic_multimodal(2, 40, 3);
        assert_eq!(t.examples.len(), 40);
        for s in t.sources() {
            let targets: HashSet<_> = t.examples.iter().filter(|e| e.source == s).map(|e| e.target.clone()).collect();
            assert_eq!(targets.len(), 2);
            assert!(targets.contains(&s));
            assert!(targets.contains(&Mode::Reverse.apply(&s)));
        }
        let alphabet: HashSet<String> = t.tokens().into_iter().collect();
        assert!(t.examples.iter().all(|e| e.source.iter().chain(&e.target).all(|x| alphabet.contains(x))));
    }

    #[test]
    fn oracle_labels_every_example() {
        let t = make_synthetic_multimodal(3, 300, 9);
        for e in &t.examples {
            assert_eq!(t.classify(&e.source, &e.target), Some(e.mode));
        }
        let again = make_synthetic_multimodal(3, 300, 9);
        assert_eq!(again.examples, t.examples);
    }
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::reaction::ReactionExample;

/// Number of reaction classes produced by [`toy_reactions`].
pub const TOY_CLASSES: usize = 6;

/// Mapped alkyl chain written so its last atom bonds to what follows.
fn alkyl_left(n: usize, base: u32) -> String {
    let mut s = format!("[CH3:{base}]");
    for k in 1..n as u32 {
        s.push_str(&format!("[CH2:{}]", base + k));
    }
    s
}

/// Mapped alkyl chain written so its first atom bonds to what precedes it.
fn alkyl_right(n: usize, base: u32) -> String {
    let mut s = String::new();
    for k in (1..n as u32).rev() {
        s.push_str(&format!("[CH2:{}]", base + k));
    }
    s.push_str(&format!("[CH3:{base}]"));
    s
}

fn left_groups(base: u32) -> Vec<String> {
    let mut v: Vec<String> = (1..=6).map(|n| alkyl_left(n, base)).collect();
    v.push(format!("[CH3:{base}][CH:{}]([CH3:{}])", base + 1, base + 2));
    v.push(format!("[cH:{base}]1[cH:{}][cH:{}][cH:{}][cH:{}][c:{}]1", base + 1, base + 2, base + 3, base + 4, base + 5));
    v.push(format!("[CH3:{base}][O:{}][CH2:{}][CH2:{}]", base + 1, base + 2, base + 3));
    v
}

fn right_groups(base: u32) -> Vec<String> {
    let mut v: Vec<String> = (1..=5).map(|n| alkyl_right(n, base)).collect();
    v.push(format!("[CH:{base}]([CH3:{}])[CH3:{}]", base + 1, base + 2));
    v.push(format!("[CH2:{base}][c:{}]1[cH:{}][cH:{}][cH:{}][cH:{}][cH:{}]1", base + 1, base + 2, base + 3, base + 4, base + 5, base + 6));
    v
}

fn substituents(base: u32) -> Vec<Option<String>> {
    vec![
        None,
        Some(format!("[CH3:{base}]")),
        Some(format!("[F:{base}]")),
        Some(format!("[O:{base}][CH3:{}]", base + 1)),
        Some(format!("[Cl:{base}]")),
        Some(format!("[C:{base}]([F:{}])([F:{}])[F:{}]", base + 1, base + 2, base + 3)),
    ]
}

/// Ring atoms after the attachment atom `first`, closing with `digit`.
fn aryl_tail(first: u32, sub: &Option<String>, digit: u8) -> String {
    let para = match sub {
        Some(s) => format!("[c:{}]({s})", first + 3),
        None => format!("[cH:{}]", first + 3),
    };
    format!(
        "[cH:{}][cH:{}]{para}[cH:{}][cH:{}]{digit}",
        first + 1,
        first + 2,
        first + 4,
        first + 5
    )
}

fn class_reactions(class: usize) -> Vec<String> {
    let mut out = Vec::new();
    match class {
        1 => {
            for r in left_groups(20) {
                out.push(format!("{r}[CH2:1][OH:2].I[CH3:3]>>{r}[CH2:1][O:2][CH3:3]"));
            }
        }
        2 => {
            for s in substituents(60) {
                let tail = aryl_tail(1, &s, 1);
                for r in right_groups(40) {
                    out.push(format!("Br[c:1]1{tail}.[NH2:7]{r}>>[c:1]1([NH:7]{r}){tail}"));
                }
            }
        }
        3 | 4 => {
            let (x, xh) = if class == 3 { ("NH", "NH2") } else { ("O", "OH") };
            for l in left_groups(20) {
                for r in right_groups(40) {
                    out.push(format!(
                        "{l}[C:1](=[O:2])O.[{xh}:3]{r}>>{l}[C:1](=[O:2])[{x}:3]{r}"
                    ));
                }
            }
        }
        5 => {
            for s1 in substituents(60) {
                for s2 in substituents(70) {
                    let t1 = aryl_tail(1, &s1, 1);
                    let t2 = aryl_tail(10, &s2, 2);
                    out.push(format!(
                        "Br[c:1]1{t1}.OB(O)[c:10]2{t2}>>[c:1]1([c:10]2{t2}){t1}"
                    ));
                }
            }
        }
        6 => {
            for l in left_groups(20) {
                out.push(format!("{l}[NH:1]C(=O)OC(C)(C)C>>{l}[NH2:1]"));
            }
        }
        _ => {}
    }
    out
}

/// Atom-mapped, class-labeled reactions of six textbook types over varied
/// substituents, at most `per_class` of each, shuffled by `seed`. Classes are
/// O-methylation (1), aryl amination (2), amide coupling (3), esterification (4),
/// biaryl coupling (5) and carbamate removal (6).
pub fn toy_reactions(per_class: usize, seed: u64) -> Vec<ReactionExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for class in 1..=TOY_CLASSES {
        let mut rxns = class_reactions(class);
        rxns.shuffle(&mut rng);
        for (i, r) in rxns.into_iter().take(per_class).enumerate() {
            let line = format!("c{class}-{i}\t{class}\t{r}");
            let ex = ReactionExample::parse_record(&line)
                .unwrap_or_else(|e| panic!("toy reaction {line}: {e}"))
                .expect("non-empty record");
            out.push(ex);
        }
    }
    out.shuffle(&mut rng);
    out
}

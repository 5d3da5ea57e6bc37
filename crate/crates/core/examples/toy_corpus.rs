//! Writes the mapped toy reaction corpus as reaction records on stdout.

use retromix::augment::toy_reactions;

fn main() {
    let per_class = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let seed = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    for r in toy_reactions(per_class, seed) {
        println!("{}", r.to_record());
    }
}

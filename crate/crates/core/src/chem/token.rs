use std::sync::OnceLock;

use regex::Regex;

use super::error::{SmilesError, SmilesErrorKind};

// Atom-level SMILES lexer: bracket atoms, two-letter organic halogens, %nn ring
// closures and every single-character symbol are one token each.
const TOKEN_PATTERN: &str =
    r"(\[[^\]]+\]|Br?|Cl?|N|O|S|P|F|I|b|c|n|o|s|p|\(|\)|\.|=|#|-|\+|\\|/|:|~|@|\?|>|\*|\$|%[0-9]{2}|[0-9])";

fn token_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(TOKEN_PATTERN).expect("static token pattern"))
}

/// Tokens of a SMILES string; concatenation reproduces the source.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn detokenize(&self) -> String {
        self.tokens.concat()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

pub fn tokenize(s: &str) -> Result<TokenSequence, SmilesError> {
    let mut tokens = Vec::new();
    let mut pos = 0;
    for m in token_regex().find_iter(s) {
        if m.start() != pos {
            return Err(unlexable(s, pos));
        }
        tokens.push(m.as_str().to_string());
        pos = m.end();
    }
    if pos != s.len() {
        return Err(unlexable(s, pos));
    }
    Ok(TokenSequence { tokens })
}

fn unlexable(s: &str, pos: usize) -> SmilesError {
    let c = s[pos..].chars().next().unwrap_or('\0');
    SmilesError::new(SmilesErrorKind::UnlexableCharacter(c), pos)
}

pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens.iter().map(AsRef::as_ref).collect()
}

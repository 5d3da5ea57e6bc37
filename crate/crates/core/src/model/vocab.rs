use std::collections::{BTreeSet, HashMap};

use super::ModelError;

pub const BOS: u32 = 0;
pub const EOS: u32 = 1;
pub const PAD: u32 = 2;

const SPECIALS: [&str; 3] = ["<bos>", "<eos>", "<pad>"];

/// Token inventory. Ids 0, 1, 2 are the begin, end and padding sentinels; the
/// remaining tokens follow in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: BTreeSet<String> = tokens
            .into_iter()
            .map(|t| t.as_ref().to_string())
            .filter(|t| !SPECIALS.contains(&t.as_str()))
            .collect();
        Self::from_list(SPECIALS.iter().map(|s| s.to_string()).chain(set).collect())
            .expect("specials lead the list")
    }

    /// Rebuilds a vocabulary from its full id-ordered list.
    pub fn from_list(tokens: Vec<String>) -> Result<Self, ModelError> {
        if tokens.len() < 3 || tokens[..3] != SPECIALS {
            return Err(ModelError::Checkpoint("vocabulary does not start with the reserved tokens".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(ModelError::Checkpoint(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<u32>, ModelError> {
        tokens
            .iter()
            .map(|t| {
                self.id(t.as_ref())
                    .ok_or_else(|| ModelError::UnknownToken(t.as_ref().to_string()))
            })
            .collect()
    }

    /// Concatenated text of `ids`, stopping at the end sentinel and skipping the others.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut s = String::new();
        for &id in ids {
            if id == EOS {
                break;
            }
            if id == BOS || id == PAD {
                continue;
            }
            if let Some(t) = self.token(id) {
                s.push_str(t);
            }
        }
        s
    }
}

/// Decoder targets: `ids` followed by the end sentinel.
pub fn target_ids(ids: &[u32]) -> Vec<u32> {
    let mut y = ids.to_vec();
    y.push(EOS);
    y
}

/// Decoder input for targets `y`: the begin sentinel followed by `y` without its last id.
pub fn decoder_input(y: &[u32]) -> Vec<u32> {
    let mut v = Vec::with_capacity(y.len());
    if !y.is_empty() {
        v.push(BOS);
        v.extend_from_slice(&y[..y.len() - 1]);
    }
    v
}

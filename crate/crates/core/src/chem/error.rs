use thiserror::Error;

/// What went wrong while reading or validating a SMILES string.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesErrorKind {
    #[error("empty input")]
    EmptyInput,
    #[error("unbalanced parenthesis")]
    UnbalancedParenthesis,
    #[error("ring bond {0} opened but never closed")]
    UnclosedRingBond(u16),
    #[error("invalid atom token: {0}")]
    InvalidAtomToken(String),
    #[error("invalid bond: {0}")]
    InvalidBond(String),
    #[error("unexpected character {0:?}")]
    UnexpectedCharacter(char),
    #[error("valence violation on {element} (valence {valence}, max {max})")]
    ValenceViolation { element: String, valence: i32, max: i32 },
    #[error("character {0:?} cannot be lexed")]
    UnlexableCharacter(char),
}

/// A SMILES fault with the byte offset at which it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}")]
pub struct SmilesError {
    pub kind: SmilesErrorKind,
    pub offset: usize,
}

impl SmilesError {
    pub fn new(kind: SmilesErrorKind, offset: usize) -> Self {
        Self { kind, offset }
    }
}

/// Structural problems in an internally constructed graph.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("bond endpoint {0} out of range")]
    EndpointOutOfRange(usize),
    #[error("self bond on atom {0}")]
    SelfBond(usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("aromatic flag on {0}, which cannot be aromatic")]
    NonAromaticElement(String),
    #[error("atom {atom}: valence {valence} exceeds {max} for {element}")]
    Valence {
        atom: usize,
        element: String,
        valence: i32,
        max: i32,
    },
}

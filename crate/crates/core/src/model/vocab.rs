use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub const UNK: &str = "<unk>";
pub const YOU: &str = "YOU:";
pub const THEM: &str = "THEM:";
pub const EOS: &str = "<eos>";
pub const SELECTION: &str = "<selection>";

const SPECIALS: [&str; 5] = [UNK, YOU, THEM, EOS, SELECTION];

/// Token ↔ id map. Specials come first, then corpus tokens in sorted order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    pub fn build<'a, I: IntoIterator<Item = &'a str>>(tokens: I) -> Vocab {
        let mut words: Vec<&str> = tokens.into_iter().filter(|t| !SPECIALS.contains(t)).collect();
        words.sort_unstable();
        words.dedup();
        let all: Vec<String> = SPECIALS.iter().copied().chain(words).map(ToString::to_string).collect();
        Vocab::from(all)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `token`, or of `<unk>` when unknown.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Tokens a speaker never generates: `<unk>` and the speaker markers.
    pub fn is_control_input(&self, id: usize) -> bool {
        id < 3
    }
}

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Tokens;
use crate::error::{Error, Result};

/// Character alphabet over Unicode scalar values.
///
/// Id 0 is the unknown character and id 1 the sentence-start symbol (what
/// the C2W embedder composes for the start token). Observed characters
/// follow in decreasing frequency, ties by code point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CharRecord", into = "CharRecord")]
pub struct CharVocabulary {
    chars: Vec<char>,
    counts: Vec<usize>,
    index: HashMap<char, usize>,
}

#[derive(Serialize, Deserialize)]
struct CharRecord {
    entries: Vec<(char, usize)>,
}

impl From<CharVocabulary> for CharRecord {
    fn from(c: CharVocabulary) -> Self {
        CharRecord {
            entries: c.chars.into_iter().zip(c.counts).collect(),
        }
    }
}

impl TryFrom<CharRecord> for CharVocabulary {
    type Error = Error;

    fn try_from(r: CharRecord) -> Result<Self> {
        CharVocabulary::from_entries(r.entries)
    }
}

impl CharVocabulary {
    pub const UNK_ID: usize = 0;
    pub const START_ID: usize = 1;
    pub const SENTINELS: usize = 2;

    pub fn build<'a, S, I>(sentences: I) -> Self
    where
        S: Tokens + 'a + ?Sized,
        I: IntoIterator<Item = &'a S>,
    {
        let mut freq: HashMap<char, usize> = HashMap::new();
        for s in sentences {
            for tok in s.tokens() {
                for ch in tok.chars() {
                    *freq.entry(ch).or_default() += 1;
                }
            }
        }
        let mut entries: Vec<(char, usize)> = freq.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_entries(entries).expect("entries are unique")
    }

    pub fn from_entries(entries: Vec<(char, usize)>) -> Result<Self> {
        let mut index = HashMap::new();
        let mut chars = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        for (ch, count) in entries {
            if index.insert(ch, chars.len() + Self::SENTINELS).is_some() {
                return Err(Error::Checkpoint(format!("duplicate character {ch:?}")));
            }
            chars.push(ch);
            counts.push(count);
        }
        Ok(CharVocabulary {
            chars,
            counts,
            index,
        })
    }

    /// Id of `ch`, or the unknown-character id.
    pub fn id(&self, ch: char) -> usize {
        self.index.get(&ch).copied().unwrap_or(Self::UNK_ID)
    }

    pub fn get(&self, ch: char) -> Option<usize> {
        self.index.get(&ch).copied()
    }

    /// Training frequency; 0 for the sentinels.
    pub fn count(&self, id: usize) -> usize {
        if id < Self::SENTINELS {
            0
        } else {
            self.counts[id - Self::SENTINELS]
        }
    }

    pub fn char_ids(&self, word: &str) -> Vec<usize> {
        word.chars().map(|c| self.id(c)).collect()
    }

    /// Number of ids including the sentinels.
    pub fn len(&self) -> usize {
        self.chars.len() + Self::SENTINELS
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Observed characters (sentinels excluded).
    pub fn observed(&self) -> usize {
        self.chars.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charset_of_tokens_only() {
        let s = vec![vec!["ab".to_string(), "Ab".to_string()]];
        let cs = CharVocabulary::build(&s);
        assert_eq!(cs.observed(), 3);
        assert_eq!(cs.get(' '), None);
        assert!(cs.get('A').is_some() && cs.get('a').is_some());
        assert_eq!(cs.get('b'), Some(2), "most frequent first");
        assert_eq!(cs.id('z'), CharVocabulary::UNK_ID);
    }

    #[test]
    fn unicode_scalars() {
        let s = vec![vec!["évde".to_string(), "日本".to_string()]];
        let cs = CharVocabulary::build(&s);
        assert_eq!(cs.observed(), 6);
        assert_eq!(cs.char_ids("日").len(), 1);
    }
}

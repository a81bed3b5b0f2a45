use std::borrow::Cow;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const START: &str = "<s>";
pub const END: &str = "</s>";

/// Anything that exposes a token sequence.
pub trait Tokens {
    fn tokens(&self) -> &[String];
}

impl Tokens for Vec<String> {
    fn tokens(&self) -> &[String] {
        self
    }
}

/// Bidirectional word ↔ id map with training frequencies.
///
/// Ids 0, 1, 2 are the unknown, start and end sentinels; content types follow
/// in decreasing frequency, ties broken lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabRecord", into = "VocabRecord")]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<usize>,
    index: HashMap<String, usize>,
    lowercase: bool,
}

#[derive(Serialize, Deserialize)]
struct VocabRecord {
    lowercase: bool,
    /// Content types in id order, after the sentinels.
    entries: Vec<(String, usize)>,
}

impl From<Vocabulary> for VocabRecord {
    fn from(v: Vocabulary) -> Self {
        VocabRecord {
            lowercase: v.lowercase,
            entries: v.content().map(|(w, c)| (w.to_string(), c)).collect(),
        }
    }
}

impl TryFrom<VocabRecord> for Vocabulary {
    type Error = Error;

    fn try_from(r: VocabRecord) -> Result<Self> {
        Vocabulary::from_entries(r.lowercase, r.entries)
    }
}

impl Vocabulary {
    pub const UNK_ID: usize = 0;
    pub const START_ID: usize = 1;
    pub const END_ID: usize = 2;
    pub const SENTINELS: usize = 3;

    fn empty(lowercase: bool) -> Self {
        let mut v = Vocabulary {
            words: Vec::new(),
            counts: Vec::new(),
            index: HashMap::new(),
            lowercase,
        };
        for s in [UNK, START, END] {
            v.push(s.to_string(), 0);
        }
        v
    }

    fn push(&mut self, word: String, count: usize) {
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.counts.push(count);
    }

    /// Keeps the `max_size` most frequent types (all of them for `None`).
    pub fn build<'a, S, I>(sentences: I, max_size: Option<usize>, lowercase: bool) -> Self
    where
        S: Tokens + 'a + ?Sized,
        I: IntoIterator<Item = &'a S>,
    {
        let mut freq: HashMap<String, usize> = HashMap::new();
        for s in sentences {
            for tok in s.tokens() {
                let key = if lowercase {
                    tok.to_lowercase()
                } else {
                    tok.clone()
                };
                *freq.entry(key).or_default() += 1;
            }
        }
        let mut entries: Vec<(String, usize)> = freq
            .into_iter()
            .filter(|(w, _)| ![UNK, START, END].contains(&w.as_str()))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        if let Some(max) = max_size {
            entries.truncate(max);
        }
        let mut v = Vocabulary::empty(lowercase);
        for (w, c) in entries {
            v.push(w, c);
        }
        v
    }

    /// Rebuilds a vocabulary from its content entries in id order.
    pub fn from_entries(lowercase: bool, entries: Vec<(String, usize)>) -> Result<Self> {
        let mut v = Vocabulary::empty(lowercase);
        for (w, c) in entries {
            if v.index.contains_key(&w) {
                return Err(Error::Checkpoint(format!("duplicate vocabulary entry `{w}`")));
            }
            if lowercase && w.to_lowercase() != w {
                return Err(Error::Checkpoint(format!(
                    "uppercase entry `{w}` in a lowercased vocabulary"
                )));
            }
            v.push(w, c);
        }
        Ok(v)
    }

    /// Adds types absent from the vocabulary with count 0 (e.g. words known
    /// only from pretrained vectors). Returns how many were added.
    pub fn extend<'a>(&mut self, words: impl IntoIterator<Item = &'a str>) -> usize {
        let mut added = 0;
        for w in words {
            let w = self.normalize(w).into_owned();
            if !self.index.contains_key(&w) {
                self.push(w, 0);
                added += 1;
            }
        }
        added
    }

    pub fn normalize<'w>(&self, word: &'w str) -> Cow<'w, str> {
        if self.lowercase {
            Cow::Owned(word.to_lowercase())
        } else {
            Cow::Borrowed(word)
        }
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(self.normalize(word).as_ref()).copied()
    }

    /// Id of `word`, or the unknown id.
    pub fn id(&self, word: &str) -> usize {
        self.get(word).unwrap_or(Self::UNK_ID)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn count(&self, id: usize) -> usize {
        self.counts[id]
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn is_sentinel(id: usize) -> bool {
        id < Self::SENTINELS
    }

    /// Content types with their counts, in id order.
    pub fn content(&self) -> impl Iterator<Item = (&str, usize)> {
        self.words[Self::SENTINELS..]
            .iter()
            .zip(&self.counts[Self::SENTINELS..])
            .map(|(w, &c)| (w.as_str(), c))
    }
}

/// Label set of a tagger. No sentinels: every tag must be observed.
/// Ids follow lexicographic order of the tag strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TagSet {
    tags: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<TagSet> for Vec<String> {
    fn from(t: TagSet) -> Self {
        t.tags
    }
}

impl TryFrom<Vec<String>> for TagSet {
    type Error = Error;

    fn try_from(tags: Vec<String>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, t) in tags.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Checkpoint(format!("duplicate tag `{t}`")));
            }
        }
        if tags.is_empty() {
            return Err(Error::EmptyInput("tagset"));
        }
        Ok(TagSet { tags, index })
    }
}

impl TagSet {
    pub fn build<'a>(tags: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut all: Vec<String> = tags.into_iter().map(str::to_string).collect();
        all.sort();
        all.dedup();
        TagSet::try_from(all)
    }

    pub fn get(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn tag(&self, id: usize) -> &str {
        &self.tags[id]
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tags.iter().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sents(lines: &[&str]) -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| l.split_whitespace().map(str::to_string).collect())
            .collect()
    }

    #[test]
    fn keeps_most_frequent() {
        let s = sents(&["a a b"]);
        let v = Vocabulary::build(&s, Some(1), false);
        assert_eq!(v.len(), 4);
        assert_eq!(v.get("a"), Some(3));
        assert_eq!(v.id("b"), Vocabulary::UNK_ID);
    }

    #[test]
    fn no_type_dropped_when_max_is_large() {
        let s = sents(&["a b c", "c d"]);
        let v = Vocabulary::build(&s, Some(100), false);
        assert_eq!(v.content().count(), 4);
    }

    #[test]
    fn ties_are_lexicographic() {
        let s = sents(&["y x"]);
        let v = Vocabulary::build(&s, Some(1), false);
        assert_eq!(v.get("x"), Some(3));
        assert_eq!(v.get("y"), None);
    }

    #[test]
    fn lowercase_flag() {
        let s = sents(&["The the THE cat"]);
        let v = Vocabulary::build(&s, None, true);
        assert_eq!(v.count(v.id("tHe")), 3);
        assert!(v.content().all(|(w, _)| w.to_lowercase() == w));
    }

    #[test]
    fn serde_round_trip() {
        let s = sents(&["b a a c"]);
        let v = Vocabulary::build(&s, None, true);
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(v, back);
    }

    #[test]
    fn tagset_is_sorted() {
        let t = TagSet::build(["NN", "DT", "NN", "VB"]).unwrap();
        assert_eq!(t.iter().collect::<Vec<_>>(), ["DT", "NN", "VB"]);
        assert_eq!(t.get("DT"), Some(0));
    }
}

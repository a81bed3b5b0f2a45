//! Word vectors in the word2vec text layout: a `<count> <dim>` header, then
//! one word and `dim` reals per line, space-separated.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::corpus::Vocabulary;
use crate::embeddings::WordLookupTable;
use crate::error::{Error, Result};
use crate::nncore::ParamStore;
use crate::SeededRng;

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainedVectors {
    pub dim: usize,
    words: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

/// How much of a lookup vocabulary came from pretrained vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Coverage {
    /// Content types in the vocabulary.
    pub vocab_size: usize,
    pub initialized: usize,
    pub random: usize,
}

impl std::fmt::Display for Coverage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} of {} vocabulary types initialized from pretrained vectors, {} random",
            self.initialized, self.vocab_size, self.random
        )
    }
}

impl PretrainedVectors {
    /// Parses `text`; `path` is only used in error messages. The first
    /// occurrence of a duplicated word wins.
    pub fn parse(text: &str, path: &Path, expected_dim: usize) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing `<count> <dim>` header".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (count, dim) = match fields.as_slice() {
            [c, d] => match (c.parse::<usize>(), d.parse::<usize>()) {
                (Ok(c), Ok(d)) => (c, d),
                _ => return Err(err(1, format!("bad header `{header}`"))),
            },
            _ => return Err(err(1, format!("bad header `{header}`"))),
        };
        if dim != expected_dim {
            return Err(Error::PretrainedDimension {
                expected: expected_dim,
                found: dim,
            });
        }
        let mut v = PretrainedVectors {
            dim,
            words: Vec::with_capacity(count),
            vectors: Vec::with_capacity(count),
            index: HashMap::with_capacity(count),
        };
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("nonblank line");
            let values = parts
                .map(|x| x.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| err(n, format!("non-numeric or non-finite value for `{word}`")))?;
            if values.len() != dim {
                return Err(err(n, format!("`{word}` has {} values, expected {dim}", values.len())));
            }
            if !v.index.contains_key(word) {
                v.index.insert(word.to_string(), v.words.len());
                v.words.push(word.to_string());
                v.vectors.push(values);
            }
        }
        if v.words.len() != count {
            log::warn!("{}: header announces {count} vectors, found {}", path.display(), v.words.len());
        }
        Ok(v)
    }

    pub fn read(path: impl AsRef<Path>, expected_dim: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(PathBuf::from(path), e))?;
        PretrainedVectors::parse(&text, path, expected_dim)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.vectors[i].as_slice())
    }

    /// Adds every pretrained word to `vocab` (count 0), so that words seen
    /// in neither the training data nor the pretraining data are the only
    /// unknowns.
    pub fn extend_vocab(&self, vocab: &mut Vocabulary) -> usize {
        vocab.extend(self.words())
    }

    /// Overwrites the columns of `table` whose word has a pretrained vector
    /// and leaves the rest at their random initialization. Under a
    /// lowercased vocabulary several pretrained spellings can map to one
    /// column; the first in file order wins.
    pub fn apply(&self, store: &mut ParamStore, table: &WordLookupTable) -> Result<Coverage> {
        if table.dim != self.dim {
            return Err(Error::PretrainedDimension {
                expected: table.dim,
                found: self.dim,
            });
        }
        let mut done = vec![false; table.vocab.len()];
        let values = store.value_mut(table.table);
        for (word, vector) in self.words.iter().zip(&self.vectors) {
            let Some(col) = table.vocab.get(word) else { continue };
            if Vocabulary::is_sentinel(col) || done[col] {
                continue;
            }
            done[col] = true;
            for (r, x) in vector.iter().enumerate() {
                values.set2(r, col, *x);
            }
        }
        let vocab_size = table.vocab.len() - Vocabulary::SENTINELS;
        let initialized = done.iter().filter(|d| **d).count();
        let coverage = Coverage {
            vocab_size,
            initialized,
            random: vocab_size - initialized,
        };
        if initialized == 0 {
            log::warn!("no vocabulary word has a pretrained vector; all columns stay random");
        }
        log::info!("{coverage}");
        Ok(coverage)
    }
}

/// Builds a lookup table over `vocab` extended with the words of the file at
/// `path`, initialized from the file where possible and uniformly at random
/// elsewhere.
pub fn load_pretrained_embeddings(
    path: impl AsRef<Path>,
    store: &mut ParamStore,
    name: &str,
    mut vocab: Vocabulary,
    dim: usize,
    rng: &mut SeededRng,
) -> Result<(WordLookupTable, Coverage)> {
    let vectors = PretrainedVectors::read(path, dim)?;
    vectors.extend_vocab(&mut vocab);
    let table = WordLookupTable::new(store, name, vocab, dim, rng);
    let coverage = vectors.apply(store, &table)?;
    Ok((table, coverage))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn vocab(words: &[&str]) -> Vocabulary {
        let s: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        Vocabulary::build(std::iter::once(&s), None, true)
    }

    fn parse(text: &str, dim: usize) -> Result<PretrainedVectors> {
        PretrainedVectors::parse(text, Path::new("vec.txt"), dim)
    }

    #[test]
    fn full_coverage_leaves_nothing_random() {
        let v = parse("2 2\ncat 1 2\ndog 3 4\n", 2).unwrap();
        let mut store = ParamStore::new();
        let table = WordLookupTable::new(&mut store, "lookup", vocab(&["cat", "dog"]), 2, &mut seeded_rng(1));
        let c = v.apply(&mut store, &table).unwrap();
        assert_eq!((c.initialized, c.random), (2, 0));
        let col = store.value(table.table).column(table.vocab.id("dog"));
        assert_eq!(col.data(), [3.0, 4.0]);
    }

    #[test]
    fn empty_intersection_is_all_random() {
        let v = parse("1 2\nzebra 1 2\n", 2).unwrap();
        let mut store = ParamStore::new();
        let table = WordLookupTable::new(&mut store, "lookup", vocab(&["cat"]), 2, &mut seeded_rng(1));
        let before = store.value(table.table).clone();
        let c = v.apply(&mut store, &table).unwrap();
        assert_eq!((c.initialized, c.random), (0, 1));
        assert_eq!(store.value(table.table), &before);
    }

    #[test]
    fn dimension_mismatch() {
        let text = format!("1 100\nw {}\n", vec!["0.5"; 100].join(" "));
        assert!(matches!(parse(&text, 50), Err(Error::PretrainedDimension { expected: 50, found: 100 })));
    }

    #[test]
    fn malformed_line_reports_number() {
        match parse("2 2\na 1 2\nb 1 x\n", 2) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("2 2\na 1\n", 2), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn pretrained_words_join_vocabulary() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.txt");
        fs::write(&path, "2 2\nCat 1 2\nzebra 5 6\n").unwrap();
        let mut store = ParamStore::new();
        let (table, c) =
            load_pretrained_embeddings(&path, &mut store, "lookup", vocab(&["cat", "dog"]), 2, &mut seeded_rng(4)).unwrap();
        assert_eq!(table.vocab.count(table.vocab.id("zebra")), 0);
        assert_eq!((c.vocab_size, c.initialized, c.random), (3, 2, 1));
        assert_eq!(store.value(table.table).column(table.vocab.id("cat")).data(), [1.0, 2.0]);
    }
}

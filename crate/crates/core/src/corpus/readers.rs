use std::io::Write;
use std::path::Path;

use super::Tokens;
use crate::error::{Error, Result};

/// A nonempty, whitespace-tokenized sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<String>,
}

impl Sentence {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("sentence"));
        }
        Ok(Sentence { tokens })
    }

    pub fn parse(line: &str) -> Option<Self> {
        let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        Sentence::new(tokens).ok()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Tokens for Sentence {
    fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedSentence {
    tokens: Vec<String>,
    tags: Vec<String>,
}

impl TaggedSentence {
    pub fn new(tokens: Vec<String>, tags: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("tagged sentence"));
        }
        if tokens.len() != tags.len() {
            return Err(Error::dim(
                "tagged sentence",
                "tags",
                tokens.len(),
                tags.len(),
            ));
        }
        Ok(TaggedSentence { tokens, tags })
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sentence(&self) -> Sentence {
        Sentence {
            tokens: self.tokens.clone(),
        }
    }
}

impl Tokens for TaggedSentence {
    fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PlainCorpus {
    pub sentences: Vec<Sentence>,
    pub skipped_lines: usize,
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let line = std::str::from_utf8(raw).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("invalid UTF-8: {e}"),
        })?;
        lines.push(line.to_string());
    }
    // A trailing newline produces one empty final piece.
    if bytes.ends_with(b"\n") {
        lines.pop();
    }
    Ok(lines)
}

/// One sentence per line, whitespace-tokenized; blank lines are skipped and counted.
pub fn read_plaintext(path: impl AsRef<Path>) -> Result<PlainCorpus> {
    let mut corpus = PlainCorpus::default();
    for line in read_lines(path.as_ref())? {
        match Sentence::parse(&line) {
            Some(s) => corpus.sentences.push(s),
            None => corpus.skipped_lines += 1,
        }
    }
    Ok(corpus)
}

/// Default CoNLL-X columns (zero-based): FORM and CPOSTAG.
pub const CONLL_WORD_COL: usize = 1;
pub const CONLL_TAG_COL: usize = 4;

/// Tab-separated rows, blank lines between sentences, `#` lines ignored.
pub fn read_conll(path: impl AsRef<Path>, word_col: usize, tag_col: usize) -> Result<Vec<TaggedSentence>> {
    let path = path.as_ref();
    let need = word_col.max(tag_col) + 1;
    let mut out = Vec::new();
    let (mut tokens, mut tags) = (Vec::new(), Vec::new());
    let mut flush = |tokens: &mut Vec<String>, tags: &mut Vec<String>| -> Result<()> {
        if !tokens.is_empty() {
            out.push(TaggedSentence::new(
                std::mem::take(tokens),
                std::mem::take(tags),
            )?);
        }
        Ok(())
    };
    for (i, line) in read_lines(path)?.into_iter().enumerate() {
        if line.trim().is_empty() {
            flush(&mut tokens, &mut tags)?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < need {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected at least {need} columns, found {}", cols.len()),
            });
        }
        tokens.push(cols[word_col].to_string());
        tags.push(cols[tag_col].to_string());
    }
    flush(&mut tokens, &mut tags)?;
    Ok(out)
}

/// Writes `token<TAB>tag` lines with a blank line after each sentence.
pub fn write_tagged<'a, W, I>(mut w: W, sentences: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a [String], &'a [String])>,
{
    for (tokens, tags) in sentences {
        for (tok, tag) in tokens.iter().zip(tags) {
            writeln!(w, "{tok}\t{tag}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

use std::cmp::Ordering;

use super::{Embedder, EmbeddingCache};
use crate::error::{Error, Result};
use crate::nncore::{ParamStore, Tape, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbors {
    pub query: String,
    /// Best first; equal scores in lexicographic order.
    pub ranked: Vec<(String, f64)>,
    /// Candidates (or the query) whose vector had zero norm.
    pub zero_norm_skipped: usize,
}

pub fn cosine(a: &Tensor, b: &Tensor) -> f64 {
    a.dot(b) / (a.norm() * b.norm())
}

/// Top-`k` candidates by cosine similarity to `query` under the frozen
/// embedder. The query string itself is never returned.
pub fn nearest_neighbors(
    store: &ParamStore,
    embedder: &Embedder,
    query: &str,
    candidates: &[String],
    k: usize,
    cache: Option<&EmbeddingCache>,
) -> Result<Neighbors> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("nearest_neighbors candidates"));
    }
    let embed = |w: &str| -> Result<Tensor> {
        let mut tape = Tape::new();
        let node = match cache {
            Some(c) => embedder.embed_cached(&mut tape, store, w, c)?,
            None => embedder.embed(&mut tape, store, w)?,
        };
        Ok(tape.value(node).clone())
    };
    let q = embed(query)?;
    let mut result = Neighbors {
        query: query.to_string(),
        ranked: Vec::new(),
        zero_norm_skipped: 0,
    };
    if q.norm() == 0.0 {
        log::warn!("query `{query}` has a zero-norm embedding");
        result.zero_norm_skipped = 1;
        return Ok(result);
    }
    let mut scored = Vec::with_capacity(candidates.len());
    for c in candidates {
        if c == query {
            continue;
        }
        let v = embed(c)?;
        if v.norm() == 0.0 {
            result.zero_norm_skipped += 1;
            continue;
        }
        scored.push((c.clone(), cosine(&q, &v)));
    }
    if result.zero_norm_skipped > 0 {
        log::warn!("{} zero-norm candidates excluded", result.zero_norm_skipped);
    }
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    scored.dedup_by(|a, b| a.0 == b.0);
    scored.truncate(k);
    result.ranked = scored;
    Ok(result)
}

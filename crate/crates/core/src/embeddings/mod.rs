//! Word embedders (lookup table, C2W, combined), the embedding cache,
//! parameter accounting and nearest-neighbor queries.

mod c2w;
mod cache;
mod count;
mod embedder;
mod lookup;
mod neighbors;

pub use c2w::{compose_word, C2WParams};
pub use cache::{cache_get_or_compose, CacheStats, EmbeddingCache, DEFAULT_CACHE_CAPACITY};
pub use count::{count_parameters, ClosedFormCounts, HasParameters, ParameterBreakdown};
pub use embedder::{EmbedKey, EmbedSession, Embedder, EmbedderConfig, EmbedderKind, EmbedderVocabs};
pub use lookup::WordLookupTable;
pub use neighbors::{cosine, nearest_neighbors, Neighbors};

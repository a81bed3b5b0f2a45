use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{TagSet, Vocabulary};
use crate::embeddings::EmbedderVocabs;
use crate::error::{Error, Result};
use crate::langmodel::{LmConfig, LmModel};
use crate::nncore::ParamStore;
use crate::tagger::{TaggerConfig, TaggerModel};
use crate::training::TrainingSummary;

pub const FORMAT_VERSION: u32 = 1;

/// A trained (or freshly initialized) model of either kind.
#[derive(Clone, Debug)]
pub enum Model {
    Lm(LmModel),
    Tagger(TaggerModel),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lm,
    Tagger,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Lm => "language model",
            ModelKind::Tagger => "tagger",
        })
    }
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Lm(_) => ModelKind::Lm,
            Model::Tagger(_) => ModelKind::Tagger,
        }
    }

    pub fn store(&self) -> &ParamStore {
        match self {
            Model::Lm(m) => &m.store,
            Model::Tagger(m) => &m.store,
        }
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        match self {
            Model::Lm(m) => &mut m.store,
            Model::Tagger(m) => &mut m.store,
        }
    }

    pub fn summary(&self) -> Option<&TrainingSummary> {
        match self {
            Model::Lm(m) => m.summary.as_ref(),
            Model::Tagger(m) => m.summary.as_ref(),
        }
    }
}

impl From<LmModel> for Model {
    fn from(m: LmModel) -> Self {
        Model::Lm(m)
    }
}

impl From<TaggerModel> for Model {
    fn from(m: TaggerModel) -> Self {
        Model::Tagger(m)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Spec {
    Lm {
        config: LmConfig,
        vocabs: EmbedderVocabs,
        out_vocab: Vocabulary,
        summary: Option<TrainingSummary>,
    },
    Tagger {
        config: TaggerConfig,
        vocabs: EmbedderVocabs,
        tagset: TagSet,
        summary: Option<TrainingSummary>,
    },
}

#[derive(Serialize, Deserialize)]
struct ParamRecord {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the blob.
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    model: Spec,
    params: Vec<ParamRecord>,
}

/// `<path>.manifest` and `<path>.blob`.
pub fn checkpoint_paths(path: impl AsRef<Path>) -> (PathBuf, PathBuf) {
    let p = path.as_ref().as_os_str();
    let with = |ext: &str| {
        let mut s = p.to_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    (with(".manifest"), with(".blob"))
}

fn manifest_of(model: &Model) -> Manifest {
    let model_spec = match model {
        Model::Lm(m) => Spec::Lm {
            config: m.config.clone(),
            vocabs: m.embedder.vocabs(),
            out_vocab: m.out_vocab.clone(),
            summary: m.summary.clone(),
        },
        Model::Tagger(m) => Spec::Tagger {
            config: m.config.clone(),
            vocabs: m.embedder.vocabs(),
            tagset: m.tagset.clone(),
            summary: m.summary.clone(),
        },
    };
    let mut offset = 0;
    let params = model
        .store()
        .iter()
        .map(|(_, p)| {
            let r = ParamRecord {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
                offset,
            };
            offset += 8 * p.len();
            r
        })
        .collect();
    Manifest {
        format_version: FORMAT_VERSION,
        model: model_spec,
        params,
    }
}

/// Serializes `model` to manifest text and blob bytes.
pub fn encode_checkpoint(model: &Model) -> Result<(String, Vec<u8>)> {
    let store = model.store();
    let mut blob = Vec::with_capacity(8 * store.total_size());
    for (_, p) in store.iter() {
        if !p.value.is_finite() {
            return Err(Error::CheckpointNonFinite { name: p.name.clone() });
        }
        for x in p.value.data() {
            blob.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut text = serde_json::to_string_pretty(&manifest_of(model))?;
    text.push('\n');
    Ok((text, blob))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<PathBuf> {
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let result = fs::File::create(&tmp).and_then(|mut f| {
        f.write_all(bytes)?;
        f.sync_all()
    });
    match result {
        Ok(()) => Ok(tmp),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(Error::io(&tmp, e))
        }
    }
}

/// Writes `<path>.manifest` and `<path>.blob` via temporary files and
/// renames; on failure no temporary file is left behind.
pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let (manifest_path, blob_path) = checkpoint_paths(&path);
    let (text, blob) = encode_checkpoint(model)?;
    let blob_tmp = write_atomic(&blob_path, &blob)?;
    let manifest_tmp = match write_atomic(&manifest_path, text.as_bytes()) {
        Ok(t) => t,
        Err(e) => {
            let _ = fs::remove_file(&blob_tmp);
            return Err(e);
        }
    };
    for (tmp, dest) in [(&blob_tmp, &blob_path), (&manifest_tmp, &manifest_path)] {
        if let Err(e) = fs::rename(tmp, dest) {
            let _ = fs::remove_file(&blob_tmp);
            let _ = fs::remove_file(&manifest_tmp);
            return Err(Error::io(dest, e));
        }
    }
    Ok(())
}

/// Rebuilds a model from manifest text and blob bytes, validating version,
/// registry, sizes and finiteness.
pub fn decode_checkpoint(text: &str, blob: &[u8]) -> Result<Model> {
    let header: serde_json::Value = serde_json::from_str(text)?;
    let found = header
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Checkpoint("missing format_version".into()))?;
    if found != u64::from(FORMAT_VERSION) {
        return Err(Error::CheckpointVersion {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            supported: FORMAT_VERSION,
        });
    }
    let manifest: Manifest = serde_json::from_value(header)?;
    let mut model = match manifest.model {
        Spec::Lm {
            config,
            vocabs,
            out_vocab,
            summary,
        } => {
            let mut m = LmModel::from_parts(config, vocabs, out_vocab)?;
            m.summary = summary;
            Model::Lm(m)
        }
        Spec::Tagger {
            config,
            vocabs,
            tagset,
            summary,
        } => {
            let mut m = TaggerModel::from_parts(config, vocabs, tagset)?;
            m.summary = summary;
            Model::Tagger(m)
        }
    };

    let store = model.store_mut();
    let ids: Vec<_> = store.ids().collect();
    if ids.len() != manifest.params.len() {
        return Err(Error::Checkpoint(format!(
            "registry lists {} parameters, model has {}",
            manifest.params.len(),
            ids.len()
        )));
    }
    let mut expected_offset = 0;
    for (id, rec) in ids.into_iter().zip(&manifest.params) {
        let p = store.get_mut(id);
        if p.name != rec.name {
            return Err(Error::Checkpoint(format!(
                "registry entry `{}` where `{}` was expected",
                rec.name, p.name
            )));
        }
        if p.value.shape() != rec.shape.as_slice() {
            return Err(Error::CheckpointShape {
                name: rec.name.clone(),
                expected: p.value.shape().to_vec(),
                found: rec.shape.clone(),
            });
        }
        if rec.offset != expected_offset {
            return Err(Error::CheckpointSize {
                name: rec.name.clone(),
                message: format!("offset {} where {} was expected", rec.offset, expected_offset),
            });
        }
        let end = rec.offset + 8 * p.len();
        let bytes = blob.get(rec.offset..end).ok_or_else(|| Error::CheckpointSize {
            name: rec.name.clone(),
            message: format!("needs bytes {}..{}, blob has {}", rec.offset, end, blob.len()),
        })?;
        for (x, chunk) in p.value.data_mut().iter_mut().zip(bytes.chunks_exact(8)) {
            *x = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        if !p.value.is_finite() {
            return Err(Error::CheckpointNonFinite { name: rec.name.clone() });
        }
        expected_offset = end;
    }
    if blob.len() != expected_offset {
        let last = manifest.params.last().map_or("<none>", |r| r.name.as_str());
        return Err(Error::CheckpointSize {
            name: last.to_string(),
            message: format!("{} trailing bytes after the last parameter", blob.len() - expected_offset),
        });
    }
    Ok(model)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    let (manifest_path, blob_path) = checkpoint_paths(&path);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let blob = fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
    decode_checkpoint(&text, &blob)
}

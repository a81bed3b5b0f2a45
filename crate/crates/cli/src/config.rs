//! Run configuration: a flat TOML table, overridden by `--set key=value`
//! pairs and dedicated flags (flags > file > defaults).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use c2w::embeddings::{EmbedderConfig, EmbedderKind, DEFAULT_CACHE_CAPACITY};
use c2w::langmodel::LmConfig;
use c2w::tagger::TaggerConfig;
use c2w::training::{GradScale, TrainConfig};

/// Environment variable naming the directory searched for config files.
pub const CONFIG_DIR_ENV: &str = "C2W_CONFIG_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Checkpoint path prefix (`.manifest` / `.blob` are appended).
    pub checkpoint: Option<PathBuf>,
    pub pretrained: Option<PathBuf>,
    /// Per-epoch log; defaults to `<checkpoint>.log`.
    pub log: Option<PathBuf>,
    /// Sentences withdrawn from the end of `train` when `dev` is not given.
    pub dev_from_train: usize,
    pub word_col: usize,
    pub tag_col: usize,

    pub embedder: EmbedderKind,
    pub d: usize,
    pub d_c: usize,
    pub d_cs: usize,
    pub c2w_tanh: bool,
    pub d_lm: usize,
    pub out_vocab_size: usize,
    pub d_ws: usize,
    pub d_ws_f: usize,
    pub d_ws_b: usize,
    pub cache_capacity: usize,

    pub lr: f64,
    pub momentum: f64,
    pub batch_sentences: usize,
    pub singleton_unk_prob: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub grad_scale: GradScale,
    /// Unset uses the task default; `0` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let e = EmbedderConfig::default();
        let lm = LmConfig::default();
        let tg = TaggerConfig::default();
        let t = TrainConfig::default();
        RunConfig {
            train: None,
            dev: None,
            test: None,
            checkpoint: None,
            pretrained: None,
            log: None,
            dev_from_train: 100,
            word_col: c2w::corpus::CONLL_WORD_COL,
            tag_col: c2w::corpus::CONLL_TAG_COL,
            embedder: e.kind,
            d: e.d,
            d_c: e.d_c,
            d_cs: e.d_cs,
            c2w_tanh: e.c2w_tanh,
            d_lm: lm.d_lm,
            out_vocab_size: lm.out_vocab_size,
            d_ws: tg.d_ws,
            d_ws_f: tg.d_ws_f,
            d_ws_b: tg.d_ws_b,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            lr: t.lr,
            momentum: t.momentum,
            batch_sentences: t.batch_sentences,
            singleton_unk_prob: t.singleton_unk_prob,
            max_epochs: t.max_epochs,
            seed: t.seed,
            grad_scale: t.grad_scale,
            clip_norm: None,
        }
    }
}

/// Values given on the command line, applied over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    /// `key=value` pairs; values use TOML syntax, bare words are strings.
    pub set: Vec<String>,
    pub seed: Option<u64>,
    pub max_epochs: Option<usize>,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key v"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Resolves `path`; a relative path that does not exist is looked up in
/// `$C2W_CONFIG_DIR`.
pub fn resolve_config_path(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(dir) = std::env::var_os(CONFIG_DIR_ENV) {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    path.to_path_buf()
}

/// The config file for `command` when none is given: `<command>.toml` in
/// `$C2W_CONFIG_DIR`, if present.
pub fn default_config_path(command: &str) -> Option<PathBuf> {
    let dir = std::env::var_os(CONFIG_DIR_ENV)?;
    let p = Path::new(&dir).join(format!("{command}.toml"));
    p.exists().then_some(p)
}

impl RunConfig {
    pub fn from_toml_str(text: &str, overrides: &Overrides) -> Result<Self> {
        let mut table: toml::Table = text.parse().context("config is not valid TOML")?;
        for pair in &overrides.set {
            let (k, v) = pair
                .split_once('=')
                .with_context(|| format!("--set expects key=value, got `{pair}`"))?;
            table.insert(k.trim().to_string(), parse_value(v.trim()));
        }
        let path_str = |p: &PathBuf| toml::Value::String(p.to_string_lossy().into_owned());
        if let Some(s) = overrides.seed {
            table.insert("seed".into(), toml::Value::Integer(i64::try_from(s).context("seed too large")?));
        }
        if let Some(e) = overrides.max_epochs {
            table.insert("max_epochs".into(), toml::Value::Integer(i64::try_from(e)?));
        }
        for (key, value) in [("train", &overrides.train), ("dev", &overrides.dev), ("checkpoint", &overrides.checkpoint)] {
            if let Some(p) = value {
                table.insert(key.into(), path_str(p));
            }
        }
        let cfg: RunConfig = table.try_into().context("invalid configuration")?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let text = match path {
            Some(p) => {
                let p = resolve_config_path(p);
                std::fs::read_to_string(&p).with_context(|| format!("reading config {}", p.display()))?
            }
            None => String::new(),
        };
        RunConfig::from_toml_str(&text, overrides)
    }

    pub fn require<'a>(&self, key: &'static str, value: &'a Option<PathBuf>) -> Result<&'a Path> {
        match value {
            Some(p) => Ok(p),
            None => bail!("missing required config key `{key}`"),
        }
    }

    pub fn embedder_config(&self) -> EmbedderConfig {
        EmbedderConfig {
            kind: self.embedder,
            d: self.d,
            d_c: self.d_c,
            d_cs: self.d_cs,
            c2w_tanh: self.c2w_tanh,
        }
    }

    fn train_config(&self, task: TrainConfig) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            momentum: self.momentum,
            batch_sentences: self.batch_sentences,
            singleton_unk_prob: self.singleton_unk_prob,
            max_epochs: self.max_epochs,
            seed: self.seed,
            grad_scale: self.grad_scale,
            clip_norm: match self.clip_norm {
                None => task.clip_norm,
                Some(c) => (c > 0.0).then_some(c),
            },
        }
    }

    pub fn lm_config(&self) -> LmConfig {
        LmConfig {
            embedder: self.embedder_config(),
            d_lm: self.d_lm,
            out_vocab_size: self.out_vocab_size,
            cache_capacity: self.cache_capacity,
            train: self.train_config(LmConfig::default().train),
        }
    }

    pub fn tagger_config(&self) -> TaggerConfig {
        TaggerConfig {
            embedder: self.embedder_config(),
            d_ws_f: self.d_ws_f,
            d_ws_b: self.d_ws_b,
            d_ws: self.d_ws,
            cache_capacity: self.cache_capacity,
            train: self.train_config(TaggerConfig::default().train),
        }
    }

    pub fn log_path(&self) -> Option<PathBuf> {
        self.log.clone().or_else(|| {
            self.checkpoint.as_ref().map(|c| {
                let mut s = c.as_os_str().to_os_string();
                s.push(".log");
                PathBuf::from(s)
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_library_defaults() {
        let cfg = RunConfig::from_toml_str("", &Overrides::default()).unwrap();
        assert_eq!(cfg.lm_config(), LmConfig::default());
        assert_eq!(cfg.tagger_config(), TaggerConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml_str("learning_rate = 0.1", &Overrides::default()).unwrap_err();
        assert!(format!("{err:#}").contains("learning_rate"), "{err:#}");
    }

    #[test]
    fn precedence_flags_over_set_over_file() {
        let o = Overrides {
            set: vec!["seed=5".into(), "embedder=lookup".into(), "lr = 0.5".into()],
            seed: Some(9),
            ..Default::default()
        };
        let cfg = RunConfig::from_toml_str("seed = 3\nlr = 0.1\nd = 8", &o).unwrap();
        assert_eq!((cfg.seed, cfg.lr, cfg.d), (9, 0.5, 8));
        assert_eq!(cfg.embedder, EmbedderKind::Lookup);
    }

    #[test]
    fn missing_path_names_key() {
        let cfg = RunConfig::default();
        let err = cfg.require("train", &cfg.train).unwrap_err();
        assert!(err.to_string().contains("`train`"));
    }
}

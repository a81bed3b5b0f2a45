//! Tiny-dimension gradient suites for the language model and the tagger.

use anyhow::Result;

use c2w::corpus::{Sentence, TaggedSentence};
use c2w::embeddings::{EmbedderConfig, EmbedderKind};
use c2w::langmodel::{LmConfig, LmModel};
use c2w::nncore::{GradCheckOptions, ParamStore};
use c2w::tagger::{TaggerConfig, TaggerModel};
use c2w::training::TrainConfig;

/// Failure threshold on the relative error.
pub const TOLERANCE: f64 = 1e-4;

/// Deliberate gradient corruption, for testing that failures are detected.
#[derive(Clone, Debug, PartialEq)]
pub struct Corruption {
    pub group: String,
    pub factor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub suite: &'static str,
    /// Worst relative error per parameter group, each group once.
    pub groups: Vec<(String, f64)>,
}

impl SuiteResult {
    pub fn max_error(&self) -> f64 {
        self.groups.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.groups.iter().all(|(_, e)| *e < TOLERANCE)
    }
}

fn tamper(corrupt: Option<&Corruption>) -> impl FnMut(&mut ParamStore) + '_ {
    move |store: &mut ParamStore| {
        let Some(c) = corrupt else { return };
        let ids: Vec<_> = store
            .iter()
            .filter(|(_, p)| p.group == c.group)
            .map(|(id, _)| id)
            .collect();
        for id in ids {
            store.get_mut(id).grad.data_mut().iter_mut().for_each(|g| *g *= c.factor);
        }
    }
}

/// Factor applied to the ±0.1 initial values before checking. At the
/// training scale many LSTM weight gradients are ~1e−9, where round-off in
/// the central difference (~1e−10 at ε = 1e−5) dominates the relative error;
/// larger factors start saturating the gates, which shrinks gradients again.
pub const CHECK_INIT_SCALE: f64 = 12.0;

fn spread(store: &mut ParamStore) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        store.value_mut(id).data_mut().iter_mut().for_each(|v| *v *= CHECK_INIT_SCALE);
    }
}

fn tiny_train(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..Default::default()
    }
}

fn sentences(lines: &[&str]) -> Vec<Sentence> {
    lines.iter().map(|l| Sentence::parse(l).expect("nonempty")).collect()
}

fn tagged(lines: &[&str]) -> Vec<TaggedSentence> {
    lines
        .iter()
        .map(|l| {
            let (w, t) = l
                .split_whitespace()
                .map(|p| {
                    let (a, b) = p.split_once('/').expect("word/tag");
                    (a.to_string(), b.to_string())
                })
                .unzip();
            TaggedSentence::new(w, t).expect("parallel")
        })
        .collect()
}

/// Combined embedder with tanh so that the character table, both character
/// LSTMs, `D_f`, `D_b`, `b_d` and the lookup table all receive gradient.
fn tiny_embedder(d: usize, d_cs: usize) -> EmbedderConfig {
    EmbedderConfig {
        kind: EmbedderKind::Combined,
        d,
        d_c: 3,
        d_cs,
        c2w_tanh: true,
    }
}

/// d = 4, d_C = 3, d_CS = 5, d_LM = 6, |V_out| = 7 (4 words + 3 sentinels).
pub fn lm_suite(opts: &GradCheckOptions, corrupt: Option<&Corruption>) -> Result<SuiteResult> {
    let corpus = sentences(&["the cat ran", "a dog sat", "cat ran"]);
    let config = LmConfig {
        embedder: tiny_embedder(4, 5),
        d_lm: 6,
        out_vocab_size: 4,
        cache_capacity: 0,
        train: tiny_train(opts.seed),
    };
    let mut model = LmModel::new(config, &corpus)?;
    debug_assert_eq!(model.out_vocab.len(), 7);
    spread(&mut model.store);
    let batch: Vec<&Sentence> = corpus.iter().collect();
    let report = model.gradient_check(&batch, opts, tamper(corrupt))?;
    Ok(SuiteResult {
        suite: "lm",
        groups: report.by_group().into_iter().collect(),
    })
}

/// d = 6, d_C = 3, d_CS = 7, d_WS = 5, |Y| = 5.
pub fn tagger_suite(opts: &GradCheckOptions, corrupt: Option<&Corruption>) -> Result<SuiteResult> {
    let corpus = tagged(&["the/D cat/N ran/V", "dogs/N sat/R so/A"]);
    let config = TaggerConfig {
        embedder: tiny_embedder(6, 7),
        d_ws_f: 4,
        d_ws_b: 3,
        d_ws: 5,
        cache_capacity: 0,
        train: tiny_train(opts.seed),
    };
    let mut model = TaggerModel::new(config, &corpus)?;
    debug_assert_eq!(model.tagset.len(), 5);
    spread(&mut model.store);
    let batch: Vec<&TaggedSentence> = corpus.iter().collect();
    let report = model.gradient_check(&batch, opts, tamper(corrupt))?;
    Ok(SuiteResult {
        suite: "tagger",
        groups: report.by_group().into_iter().collect(),
    })
}

pub fn run_all(opts: &GradCheckOptions, corrupt: Option<&Corruption>) -> Result<Vec<SuiteResult>> {
    Ok(vec![lm_suite(opts, corrupt)?, tagger_suite(opts, corrupt)?])
}

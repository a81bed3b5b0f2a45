use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use c2w::corpus::{read_conll, read_plaintext, withdraw_tail, write_tagged, Sentence, Tokens};
use c2w::embeddings::{count_parameters, nearest_neighbors, ClosedFormCounts, Embedder, EmbedderVocabs, EmbeddingCache};
use c2w::langmodel::{continue_lm, LmModel};
use c2w::nncore::{GradCheckOptions, ParamStore};
use c2w::persist::{load_checkpoint, save_checkpoint, Model, ModelKind, PretrainedVectors};
use c2w::tagger::{continue_tagger, TaggerModel};
use c2w::training::EpochRecord;

use crate::config::RunConfig;
use crate::gradcheck::{self, Corruption, SuiteResult, TOLERANCE};

/// Metric selected for `eval`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Metric {
    /// Perplexity (language models).
    Ppl,
    /// Token accuracy ×100 (taggers).
    Acc,
}

fn read_sentences(path: &Path) -> Result<Vec<Sentence>> {
    let corpus = read_plaintext(path)?;
    if corpus.skipped_lines > 0 {
        log::info!("{}: skipped {} blank lines", path.display(), corpus.skipped_lines);
    }
    Ok(corpus.sentences)
}

/// Train and dev splits; without a dev file the last `dev_from_train`
/// training sentences are withdrawn for tuning.
fn splits<T: Clone>(cfg: &RunConfig, read: impl Fn(&Path) -> Result<Vec<T>>) -> Result<(Vec<T>, Vec<T>)> {
    let train = read(cfg.require("train", &cfg.train)?)?;
    if train.is_empty() {
        bail!("training corpus is empty");
    }
    match &cfg.dev {
        Some(dev) => Ok((train, read(dev)?)),
        None => {
            if train.len() <= cfg.dev_from_train {
                bail!(
                    "no `dev` given and the training corpus has only {} sentences (dev_from_train = {})",
                    train.len(),
                    cfg.dev_from_train
                );
            }
            Ok(withdraw_tail(&train, cfg.dev_from_train))
        }
    }
}

/// Reads pretrained vectors and extends the lookup vocabulary with them.
fn prepare_pretrained(cfg: &RunConfig, vocabs: &mut EmbedderVocabs) -> Result<Option<PretrainedVectors>> {
    let Some(path) = &cfg.pretrained else { return Ok(None) };
    let Some(lookup) = vocabs.lookup.as_mut() else {
        bail!("`pretrained` needs the lookup or combined embedder");
    };
    let vectors = PretrainedVectors::read(path, cfg.d)?;
    let added = vectors.extend_vocab(lookup);
    log::info!("{added} pretrained-only words added to the lookup vocabulary");
    Ok(Some(vectors))
}

fn apply_pretrained(vectors: Option<PretrainedVectors>, store: &mut ParamStore, embedder: &Embedder, out: &mut impl Write) -> Result<()> {
    if let (Some(v), Some(table)) = (vectors, embedder.lookup.as_ref()) {
        let coverage = v.apply(store, table)?;
        writeln!(out, "{coverage}")?;
    }
    Ok(())
}

struct EpochLog {
    file: Option<BufWriter<File>>,
}

impl EpochLog {
    fn open(path: Option<PathBuf>, metric: &str) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let mut f = BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?);
                writeln!(f, "epoch\ttrain-loss\tdev-{metric}\tseconds\twords/sec")?;
                Some(f)
            }
            None => None,
        };
        Ok(EpochLog { file })
    }

    fn record(&mut self, r: &EpochRecord) {
        if let Some(f) = self.file.as_mut() {
            let _ = writeln!(f, "{}", r.tsv()).and_then(|_| f.flush());
        }
    }
}

fn print_breakdown(out: &mut impl Write, store: &ParamStore, model: &impl c2w::embeddings::HasParameters) -> Result<()> {
    writeln!(out, "parameters:")?;
    writeln!(out, "{}", count_parameters(store, model))?;
    Ok(())
}

pub fn train_lm(cfg: &RunConfig, out: &mut impl Write) -> Result<()> {
    let checkpoint = cfg.require("checkpoint", &cfg.checkpoint)?.to_path_buf();
    let (train, dev) = splits(cfg, read_sentences)?;
    let config = cfg.lm_config();
    let mut vocabs = EmbedderVocabs::build(config.embedder.kind, &train);
    let pretrained = prepare_pretrained(cfg, &mut vocabs)?;
    let out_vocab = c2w::corpus::Vocabulary::build(&train, Some(config.out_vocab_size), true);
    let mut model = LmModel::from_parts(config, vocabs, out_vocab)?;
    apply_pretrained(pretrained, &mut model.store, &model.embedder, out)?;
    let initial = model.perplexity(&dev)?;
    writeln!(out, "initial dev perplexity: {initial:.2}")?;

    let mut log = EpochLog::open(cfg.log_path(), "perplexity")?;
    let (model, result) = continue_lm(model, &train, &dev, |r| log.record(r))?;
    save_checkpoint(&Model::Lm(model.clone()), &checkpoint)?;
    writeln!(out, "best epoch: {}", result.best_epoch)?;
    writeln!(out, "dev perplexity: {:.2}", result.best_dev_metric)?;
    print_breakdown(out, &model.store, &model)?;
    Ok(())
}

pub fn train_tagger(cfg: &RunConfig, out: &mut impl Write) -> Result<()> {
    let checkpoint = cfg.require("checkpoint", &cfg.checkpoint)?.to_path_buf();
    let (train, dev) = splits(cfg, |p| Ok(read_conll(p, cfg.word_col, cfg.tag_col)?))?;
    let config = cfg.tagger_config();
    let mut vocabs = EmbedderVocabs::build(config.embedder.kind, &train);
    let pretrained = prepare_pretrained(cfg, &mut vocabs)?;
    let tagset = c2w::corpus::TagSet::build(train.iter().flat_map(|s| s.tags().iter().map(String::as_str)))?;
    let mut model = TaggerModel::from_parts(config, vocabs, tagset)?;
    apply_pretrained(pretrained, &mut model.store, &model.embedder, out)?;
    let initial = model.tagging_accuracy(&dev)?;
    writeln!(out, "initial dev accuracy: {:.2}", 100.0 * initial)?;

    let mut log = EpochLog::open(cfg.log_path(), "accuracy")?;
    let (model, result) = continue_tagger(model, &train, &dev, |r| log.record(r))?;
    save_checkpoint(&Model::Tagger(model.clone()), &checkpoint)?;
    writeln!(out, "best epoch: {}", result.best_epoch)?;
    writeln!(out, "dev accuracy: {:.2}", 100.0 * result.best_dev_metric)?;
    print_breakdown(out, &model.store, &model)?;
    Ok(())
}

/// Metric value as printed by `eval`: perplexity, or accuracy ×100.
pub fn evaluate(model: &Model, corpus: &Path, metric: Metric, word_col: usize, tag_col: usize) -> Result<f64> {
    match (model, metric) {
        (Model::Lm(m), Metric::Ppl) => Ok(m.perplexity(&read_sentences(corpus)?)?),
        (Model::Tagger(m), Metric::Acc) => Ok(100.0 * m.tagging_accuracy(&read_conll(corpus, word_col, tag_col)?)?),
        (m, metric) => {
            let needs = match metric {
                Metric::Ppl => ModelKind::Lm,
                Metric::Acc => ModelKind::Tagger,
            };
            bail!(
                "metric `{}` needs a {needs} checkpoint, but this checkpoint holds a {}",
                format!("{metric:?}").to_lowercase(),
                m.kind()
            )
        }
    }
}

pub fn eval(checkpoint: &Path, corpus: &Path, metric: Metric, word_col: usize, tag_col: usize, out: &mut impl Write) -> Result<()> {
    let model = load_checkpoint(checkpoint)?;
    let value = evaluate(&model, corpus, metric, word_col, tag_col)?;
    writeln!(out, "{value:.2}")?;
    Ok(())
}

fn expect_tagger(model: Model) -> Result<TaggerModel> {
    match model {
        Model::Tagger(m) => Ok(m),
        other => bail!("expected a tagger checkpoint, found a {}", other.kind()),
    }
}

/// Tags one sentence per input line; blank lines are skipped.
pub fn tag(checkpoint: &Path, input: &Path, output: &mut impl Write) -> Result<()> {
    let model = expect_tagger(load_checkpoint(checkpoint)?)?;
    let sentences = read_sentences(input)?;
    let mut tagged = Vec::with_capacity(sentences.len());
    for s in &sentences {
        tagged.push((s.tokens().to_vec(), model.tag_sentence(s.tokens())?));
    }
    write_tagged(&mut *output, tagged.iter().map(|(w, t)| (w.as_slice(), t.as_slice())))?;
    Ok(())
}

fn embedder_of(model: &Model) -> (&ParamStore, &Embedder) {
    match model {
        Model::Lm(m) => (&m.store, &m.embedder),
        Model::Tagger(m) => (&m.store, &m.embedder),
    }
}

/// Training word types of the model, the candidate set for neighbor queries.
pub fn vocabulary_words(model: &Model) -> Vec<String> {
    let (_, embedder) = embedder_of(model);
    embedder.words.content().map(|(w, _)| w.to_string()).collect()
}

pub fn neighbors_of(model: &Model, query: &str, k: usize) -> Result<c2w::embeddings::Neighbors> {
    let (store, embedder) = embedder_of(model);
    let candidates = vocabulary_words(model);
    let cache = EmbeddingCache::new(candidates.len(), &embedder.words);
    Ok(nearest_neighbors(store, embedder, query, &candidates, k, Some(&cache))?)
}

pub fn neighbors(checkpoint: &Path, queries: &[String], k: usize, out: &mut impl Write) -> Result<()> {
    let model = load_checkpoint(checkpoint)?;
    for q in queries {
        let n = neighbors_of(&model, q, k)?;
        writeln!(out, "{q}")?;
        for (w, score) in &n.ranked {
            writeln!(out, "  {w}\t{score:.4}")?;
        }
    }
    Ok(())
}

/// Dimensions for the closed-form part of `params`.
#[derive(Clone, Copy, Debug)]
pub struct Dims {
    pub vocab_size: usize,
    pub num_chars: usize,
    pub d: usize,
    pub d_c: usize,
    pub d_cs: usize,
}

pub fn params(checkpoint: Option<&Path>, dims: Dims, out: &mut impl Write) -> Result<()> {
    let c = ClosedFormCounts::new(dims.vocab_size, dims.num_chars, dims.d, dims.d_c, dims.d_cs);
    writeln!(
        out,
        "closed form (|V| = {}, |C| = {}, d = {}, d_C = {}, d_CS = {}):",
        dims.vocab_size, dims.num_chars, dims.d, dims.d_c, dims.d_cs
    )?;
    for line in c.explain(dims.d, dims.d_c, dims.d_cs) {
        writeln!(out, "  {line}")?;
    }
    if let Some(path) = checkpoint {
        let model = load_checkpoint(path)?;
        writeln!(out, "enumerated ({}):", model.kind())?;
        match &model {
            Model::Lm(m) => print_breakdown(out, &m.store, m)?,
            Model::Tagger(m) => print_breakdown(out, &m.store, m)?,
        }
    }
    Ok(())
}

/// Runs both suites, prints the worst error per group and returns whether
/// every group is within tolerance.
pub fn gradcheck(seed: u64, corrupt: Option<&Corruption>, out: &mut impl Write) -> Result<(bool, Vec<SuiteResult>)> {
    let opts = GradCheckOptions {
        seed,
        ..Default::default()
    };
    let results = gradcheck::run_all(&opts, corrupt)?;
    let mut ok = true;
    for r in &results {
        for (group, err) in &r.groups {
            let status = if *err < TOLERANCE { "ok" } else { "FAIL" };
            writeln!(out, "{}\t{group}\t{err:.3e}\t{status}", r.suite)?;
        }
        ok &= r.passed();
    }
    writeln!(out, "tolerance {TOLERANCE:e}: {}", if ok { "passed" } else { "FAILED" })?;
    Ok((ok, results))
}


//! End-to-end acceptance checks, one PASS/FAIL line each. Runs without the
//! libtest harness so the lines come out in order and unbuffered.

use std::collections::{BTreeSet, HashMap};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use rand::Rng;

use c2w::corpus::{CharVocabulary, Replacement, Sentence, TaggedSentence, Tokens, Vocabulary};
use c2w::embeddings::{count_parameters, ClosedFormCounts, Embedder, EmbedderConfig, EmbedderKind, EmbedderVocabs, EmbeddingCache};
use c2w::embeddings::{compose_word, C2WParams};
use c2w::langmodel::{train_lm, LmConfig, LmModel};
use c2w::nncore::{lstm_step, GradCheckOptions, LstmParams, LstmState, ParamStore, Tape, Tensor};
use c2w::persist::{encode_checkpoint, load_checkpoint, save_checkpoint, Model};
use c2w::seeded_rng;
use c2w::synthetic::{bigram_chain_corpus, fresh_stems, suffix_language, SuffixLanguage, SuffixLanguageConfig, SUFFIX_TAGS};
use c2w::tagger::{train_tagger, TaggerConfig, TaggerModel};
use c2w::training::TrainConfig;
use c2w_cli::commands::neighbors_of;
use c2w_cli::gradcheck::{run_all, TOLERANCE};

#[path = "../../core/tests/scalar/mod.rs"]
mod scalar;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

fn store_bits(store: &ParamStore) -> Vec<u64> {
    store
        .iter()
        .flat_map(|(_, p)| p.value.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
        .collect()
}

fn gradient_fidelity() -> Result<Outcome> {
    let start = Instant::now();
    let results = run_all(&GradCheckOptions::default(), None)?;
    let secs = start.elapsed().as_secs_f64();
    let required = [
        "c2w.char_table",
        "c2w.fwd",
        "c2w.bwd",
        "c2w.d_fwd",
        "c2w.d_bwd",
        "c2w.b_d",
        "lookup",
        "lm.seq",
        "lm.out_proj",
        "tagger.tag_proj",
    ];
    let groups: BTreeSet<&str> = results.iter().flat_map(|r| r.groups.iter().map(|(g, _)| g.as_str())).collect();
    let missing: Vec<&str> = required.iter().copied().filter(|g| !groups.contains(g)).collect();
    let (worst_suite, worst) = results
        .iter()
        .flat_map(|r| r.groups.iter().map(move |(g, e)| (format!("{}/{g}", r.suite), *e)))
        .fold((String::new(), 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let pass = results.iter().all(|r| r.passed()) && missing.is_empty() && secs < 120.0;
    outcome(
        pass,
        format!("max rel. error {worst:.2e} ({worst_suite}) < {TOLERANCE:e}, {} groups, missing {missing:?}, {secs:.1}s", groups.len()),
    )
}

/// Random tiny instances of each primitive against the scalar versions.
fn scalar_oracles() -> Result<Outcome> {
    let instances = 200;
    let mut worst = [0.0f64; 3];
    for seed in 0..instances as u64 {
        let mut rng = seeded_rng(seed);
        let (di, ds) = (rng.gen_range(1..6), rng.gen_range(1..6));
        let mut store = ParamStore::new();
        let p = LstmParams::new(&mut store, "lstm", di, ds, &mut rng);
        scalar::spread(&mut store, seed);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect() };
        let (x, h, c) = (draw(di), draw(ds), draw(ds));
        let mut tape = Tape::new();
        let xn = tape.constant(Tensor::vector(x.clone()));
        let prev = LstmState {
            h: tape.constant(Tensor::vector(h.clone())),
            c: tape.constant(Tensor::vector(c.clone())),
        };
        let next = lstm_step(&mut tape, &store, &p, xn, prev)?;
        let (hw, cw) = scalar::ScalarLstm::read(&store, &p).step(&x, &h, &c);
        worst[0] = worst[0]
            .max(scalar::max_diff(tape.value(next.h).data(), &hw))
            .max(scalar::max_diff(tape.value(next.c).data(), &cw));

        let mut rng = seeded_rng(seed ^ 0x5EED);
        let chars: Vec<usize> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(0..7)).collect();
        let mut store = ParamStore::new();
        let (dc, dcs, d) = (rng.gen_range(1..5), rng.gen_range(1..6), rng.gen_range(1..6));
        let p = C2WParams::new(&mut store, "c2w", 7, dc, dcs, d, &mut rng);
        scalar::spread(&mut store, seed);
        let mut tape = Tape::new();
        let e = compose_word(&mut tape, &store, &p, &chars)?;
        worst[1] = worst[1].max(scalar::max_diff(tape.value(e).data(), &scalar::scalar_compose(&store, &p, &chars)));

        let words = ["ab", "ba", "abc", "cab", "b"];
        let train = vec![TaggedSentence::new(
            words.iter().map(|w| w.to_string()).collect(),
            ["X", "Y", "Z", "X", "Y"].iter().map(|t| t.to_string()).collect(),
        )?];
        let kind = [EmbedderKind::Lookup, EmbedderKind::C2w, EmbedderKind::Combined][seed as usize % 3];
        let config = TaggerConfig {
            embedder: EmbedderConfig {
                kind,
                d: 4,
                d_c: 3,
                d_cs: 3,
                c2w_tanh: seed % 2 == 0,
            },
            d_ws_f: 3,
            d_ws_b: 2,
            d_ws: 4,
            cache_capacity: 0,
            train: TrainConfig { seed, ..TrainConfig::default() },
        };
        let mut model = TaggerModel::new(config, &train)?;
        scalar::spread(&mut model.store, seed);
        let tokens: Vec<String> = (0..rng.gen_range(1..5)).map(|_| words[rng.gen_range(0..5)].to_string()).collect();
        for (g, w) in model.tag_forward(&tokens)?.iter().zip(scalar::scalar_tag_forward(&model, &tokens)) {
            worst[2] = worst[2].max(scalar::max_diff(g.data(), &w));
        }
    }
    outcome(
        worst.iter().all(|&e| e <= scalar::TOL),
        format!(
            "{instances} instances each; max |diff| lstm_step {:.1e}, compose_word {:.1e}, tag_forward {:.1e} (<= 1e-12)",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn cache_transparency() -> Result<Outcome> {
    let lines = [
        "the cat sat on the mat",
        "the dog sat on the log",
        "a cat and a dog",
        "the cat ran",
        "dogs and cats ran",
    ];
    let batch_sentences: Vec<Sentence> = (0..20).map(|i| Sentence::parse(lines[i % lines.len()]).unwrap()).collect();
    let config = LmConfig {
        embedder: EmbedderConfig {
            kind: EmbedderKind::Combined,
            d: 8,
            d_c: 5,
            d_cs: 8,
            c2w_tanh: true,
        },
        d_lm: 10,
        out_vocab_size: 50,
        cache_capacity: 50,
        train: TrainConfig::default(),
    };
    let model = LmModel::new(config, &batch_sentences)?;
    let batch: Vec<&Sentence> = batch_sentences.iter().collect();

    // Training mode: same replacement draws on both sides.
    let graph = |memoize: bool| {
        let mut rng = seeded_rng(11);
        let mut replace = Replacement {
            rng: &mut rng,
            prob: model.config.train.singleton_unk_prob,
        };
        model.batch_graph(&batch, Some(&mut replace), memoize)
    };
    let (fast, slow) = (graph(true)?, graph(false)?);
    let (lf, ls) = (fast.tape.value(fast.loss).data()[0], slow.tape.value(slow.loss).data()[0]);
    let loss_equal = lf.to_bits() == ls.to_bits();

    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in &batch_sentences {
        for t in s.tokens() {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let repeated = counts.values().filter(|&&c| c > 1).count();
    let avoided = slow.compositions - fast.compositions;

    // The cross-batch cache used at evaluation time is transparent too.
    let cache = EmbeddingCache::new(50, &model.embedder.words);
    let mut cached_equal = true;
    for _ in 0..2 {
        for word in counts.keys() {
            let mut tape = Tape::new();
            let a = model.embedder.embed_cached(&mut tape, &model.store, word, &cache)?;
            let b = model.embedder.embed(&mut tape, &model.store, word)?;
            cached_equal &= tape.value(a) == tape.value(b);
        }
    }
    let stats = cache.stats();

    outcome(
        loss_equal && avoided >= repeated && cached_equal,
        format!(
            "loss {lf} vs {ls} (bit-equal: {loss_equal}); compositions {} memoized vs {} naive, {avoided} avoided for {repeated} repeated types; eval cache hits {}",
            fast.compositions, slow.compositions, stats.hits
        ),
    )
}

fn suffix_tagger(kind: EmbedderKind, lang: &SuffixLanguage) -> Result<(TaggerModel, c2w::training::TrainLog)> {
    let config = TaggerConfig {
        embedder: EmbedderConfig {
            kind,
            d: 50,
            d_c: 16,
            d_cs: 64,
            c2w_tanh: false,
        },
        d_ws_f: 50,
        d_ws_b: 50,
        d_ws: 50,
        train: TrainConfig {
            max_epochs: 30,
            seed: 1,
            ..TaggerConfig::default().train
        },
        ..TaggerConfig::default()
    };
    Ok(train_tagger(config, &lang.train, &lang.dev)?)
}

fn synthetic_morphology(lang: &SuffixLanguage) -> Result<(Outcome, TaggerModel)> {
    let start = Instant::now();
    let train_forms: BTreeSet<&str> = lang.train.iter().flat_map(|s| s.tokens().iter().map(String::as_str)).collect();
    let all_oov = lang.test.iter().flat_map(|s| s.tokens()).all(|t| !train_forms.contains(t.as_str()));

    let (c2w, log) = suffix_tagger(EmbedderKind::C2w, lang)?;
    let c2w_acc = c2w.tagging_accuracy(&lang.test)?;
    let dev_epoch = log.epochs.iter().find(|e| e.dev_metric >= 0.95).map(|e| e.epoch);
    let (lookup, _) = suffix_tagger(EmbedderKind::Lookup, lang)?;
    let lookup_acc = lookup.tagging_accuracy(&lang.test)?;
    let secs = start.elapsed().as_secs_f64();

    let pass = all_oov && c2w_acc >= 0.90 && lookup_acc <= 0.55 && dev_epoch.is_some() && secs < 600.0;
    let detail = format!(
        "{} train sentences, test all OOV: {all_oov}; C2W test acc {c2w_acc:.4} (>= 0.90), dev >= 0.95 at epoch {}; lookup test acc {lookup_acc:.4} (<= 0.55); {secs:.0}s",
        lang.train.len(),
        dev_epoch.map_or("never".to_string(), |e| e.to_string()),
    );
    Ok((outcome(pass, detail)?, c2w))
}

fn lm_learning() -> Result<Outcome> {
    let corpus = bigram_chain_corpus(50, 12, 4, 5);
    let config = LmConfig {
        train: TrainConfig {
            max_epochs: 50,
            seed: 1,
            ..TrainConfig::default()
        },
        ..LmConfig::default()
    };
    let (lr, momentum) = (config.train.lr, config.train.momentum);
    let (model, log) = train_lm(config, &corpus, &corpus)?;
    let first = log.epochs[0].train_loss.exp();
    let last = model.perplexity(&corpus)?;
    let ratio = last / first;

    let mut zeroed = model.clone();
    zeroed.store.value_mut(zeroed.out_proj).fill(0.0);
    zeroed.store.value_mut(zeroed.out_bias).fill(0.0);
    let v_out = zeroed.out_vocab.len() as f64;
    let uniform = zeroed.perplexity(&corpus)?;
    let uniform_ok = (uniform - v_out).abs() <= 1e-6 * v_out;

    outcome(
        lr == 0.2 && momentum == 0.95 && ratio < 0.2 && uniform_ok,
        format!(
            "lr {lr}, momentum {momentum}: epoch-1 train ppl {first:.3} -> {last:.3} after 50 epochs ({:.1}% < 20%); zeroed output ppl {uniform:.9} vs |V_out| = {v_out}",
            100.0 * ratio
        ),
    )
}

fn parameter_accounting() -> Result<Outcome> {
    let (vocab, chars, d, d_c, d_cs) = (80_000, 618, 50, 50, 150);
    let closed = ClosedFormCounts::new(vocab, chars, d, d_c, d_cs);

    let words: Vec<(String, usize)> = (0..vocab - Vocabulary::SENTINELS).map(|i| (format!("w{i}"), 1)).collect();
    let lookup = Vocabulary::from_entries(true, words)?;
    let charset = CharVocabulary::from_entries(
        (0..chars - CharVocabulary::SENTINELS)
            .map(|i| (char::from_u32(0x4E00 + i as u32).unwrap(), 1))
            .collect(),
    )?;
    let vocabs = EmbedderVocabs {
        words: lookup.clone(),
        lookup: Some(lookup),
        charset: Some(charset),
    };
    let config = EmbedderConfig {
        kind: EmbedderKind::Combined,
        d,
        d_c,
        d_cs,
        c2w_tanh: false,
    };
    let mut store = ParamStore::new();
    let embedder = Embedder::new(&mut store, config, vocabs, &mut seeded_rng(1))?;
    let counted = count_parameters(&store, &embedder);
    let lookup_n = counted.get("lookup").unwrap_or(0);
    let char_n = counted.get("c2w.char_table").unwrap_or(0);
    let composition = counted.sum_prefix("c2w.") - char_n;

    let note = closed.explain(d, d_c, d_cs).into_iter().find(|l| l.contains("150K")).unwrap_or_default();
    let pass = lookup_n == 4_000_000
        && closed.lookup_table == 4_000_000
        && char_n == 30_900
        && closed.char_table == 30_900
        && composition == closed.composition
        && 8 * composition <= lookup_n
        && !note.is_empty();
    outcome(
        pass,
        format!(
            "lookup {lookup_n}, char table {char_n}, composition {composition} enumerated = {} closed form, {:.1}x smaller than lookup; {note}",
            closed.composition,
            lookup_n as f64 / composition as f64
        ),
    )
}

fn determinism_and_persistence() -> Result<Outcome> {
    let text: Vec<Sentence> = ["the cat sat", "a dog ran far", "the dog sat down", "a cat ran"]
        .iter()
        .map(|l| Sentence::parse(l).unwrap())
        .collect();
    let tagged: Vec<TaggedSentence> = [("the cat runs", "D N V"), ("a dog sleeps", "D N V"), ("the dog runs fast", "D N V R")]
        .iter()
        .map(|(w, t)| {
            TaggedSentence::new(w.split(' ').map(String::from).collect(), t.split(' ').map(String::from).collect()).unwrap()
        })
        .collect();
    let embedder = EmbedderConfig {
        kind: EmbedderKind::Combined,
        d: 6,
        d_c: 4,
        d_cs: 6,
        c2w_tanh: true,
    };
    let train = TrainConfig {
        max_epochs: 4,
        seed: 13,
        ..TrainConfig::default()
    };
    let lm_config = LmConfig {
        embedder: embedder.clone(),
        d_lm: 8,
        out_vocab_size: 20,
        cache_capacity: 20,
        train: train.clone(),
    };
    let tagger_config = TaggerConfig {
        embedder,
        d_ws_f: 5,
        d_ws_b: 5,
        d_ws: 5,
        cache_capacity: 20,
        train: TrainConfig {
            clip_norm: TaggerConfig::default().train.clip_norm,
            ..train
        },
    };

    let dir = tempfile::tempdir()?;
    let mut problems = Vec::new();
    let mut check = |label: &str, runs: [(Model, f64); 2], reeval: &dyn Fn(&Model) -> Result<f64>| -> Result<()> {
        let [(a, metric), (b, _)] = runs;
        if encode_checkpoint(&a)? != encode_checkpoint(&b)? {
            problems.push(format!("{label}: runs differ"));
        }
        let (pa, pb) = (dir.path().join(format!("{label}-a")), dir.path().join(format!("{label}-b")));
        save_checkpoint(&a, &pa)?;
        save_checkpoint(&b, &pb)?;
        let (fa, fb) = (c2w::persist::checkpoint_paths(&pa), c2w::persist::checkpoint_paths(&pb));
        if std::fs::read(&fa.0)? != std::fs::read(&fb.0)? || std::fs::read(&fa.1)? != std::fs::read(&fb.1)? {
            problems.push(format!("{label}: checkpoint files differ"));
        }
        let loaded = load_checkpoint(&pa)?;
        if store_bits(loaded.store()) != store_bits(a.store()) || encode_checkpoint(&loaded)? != encode_checkpoint(&a)? {
            problems.push(format!("{label}: round trip not bit-exact"));
        }
        let again = reeval(&loaded)?;
        if again.to_bits() != metric.to_bits() {
            problems.push(format!("{label}: dev metric {again} after load vs {metric} logged"));
        }
        Ok(())
    };

    let lm_run = || -> Result<(Model, f64)> {
        let (m, log) = train_lm(lm_config.clone(), &text, &text[..2])?;
        Ok((m.into(), log.best_dev_metric))
    };
    check("lm", [lm_run()?, lm_run()?], &|m| match m {
        Model::Lm(m) => Ok(m.perplexity(&text[..2])?),
        _ => unreachable!(),
    })?;
    let tagger_run = || -> Result<(Model, f64)> {
        let (m, log) = train_tagger(tagger_config.clone(), &tagged, &tagged[..1])?;
        Ok((m.into(), log.best_dev_metric))
    };
    check("tagger", [tagger_run()?, tagger_run()?], &|m| match m {
        Model::Tagger(m) => Ok(m.tagging_accuracy(&tagged[..1])?),
        _ => unreachable!(),
    })?;

    let detail = if problems.is_empty() {
        "LM and tagger: identical bytes across runs and saves, bit-exact round trip, dev metric bits reproduced".to_string()
    } else {
        problems.join("; ")
    };
    outcome(problems.is_empty(), detail)
}

fn nonce_generalization(lang: &SuffixLanguage, model: TaggerModel) -> Result<Outcome> {
    let mut taken: BTreeSet<String> = lang
        .train_stems
        .iter()
        .chain(&lang.dev_stems)
        .chain(&lang.test_stems)
        .cloned()
        .collect();
    let stems = fresh_stems(SUFFIX_TAGS.len(), &mut taken, &mut seeded_rng(99));
    let model = Model::from(model);
    let mut pass = true;
    let mut parts = Vec::new();
    for ((suffix, _), stem) in SUFFIX_TAGS.iter().zip(&stems) {
        let nonce = format!("{stem}{suffix}");
        let n = neighbors_of(&model, &nonce, 5)?;
        let hits = n.ranked.iter().filter(|(w, _)| w.ends_with(suffix)).count();
        pass &= n.ranked.len() == 5 && hits >= 4;
        let top: Vec<&str> = n.ranked.iter().map(|(w, _)| w.as_str()).collect();
        parts.push(format!("{nonce}: {hits}/5 [{}]", top.join(" ")));
    }
    outcome(pass, parts.join("; "))
}

fn report(n: usize, name: &str, result: Result<Outcome>) -> bool {
    let (pass, detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e:#}")),
    };
    println!("{} criterion {n} ({name}): {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn main() -> ExitCode {
    let lang = suffix_language(&SuffixLanguageConfig::default());
    let mut ok = true;
    ok &= report(1, "gradient fidelity", gradient_fidelity());
    ok &= report(2, "scalar oracles", scalar_oracles());
    ok &= report(3, "cache transparency", cache_transparency());
    let c2w_tagger = match synthetic_morphology(&lang) {
        Ok((o, m)) => {
            ok &= report(4, "synthetic morphology", Ok(o));
            Some(m)
        }
        Err(e) => {
            ok &= report(4, "synthetic morphology", Err(e));
            None
        }
    };
    ok &= report(5, "LM learning", lm_learning());
    ok &= report(6, "parameter accounting", parameter_accounting());
    ok &= report(7, "determinism and persistence", determinism_and_persistence());
    let nonce = match c2w_tagger {
        Some(m) => nonce_generalization(&lang, m),
        None => Err(anyhow::anyhow!("criterion 4 model unavailable")),
    };
    ok &= report(8, "nonce-word generalization", nonce);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

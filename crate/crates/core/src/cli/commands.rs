use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{manifest_path, Manifest};
use super::*;
use crate::corpus::{
    aggregate_votes, alpha_from_votes, build_context_corpus, build_splits, build_vocabulary, collect_translation_sets,
    compute_clip_window, corpus_to_string, decisions_to_string, feature_path, flag_ambiguous_samples, load_decisions,
    load_votes, parse_corpus, select_ambiguous_sets, write_features, write_text, AmbiguitySelectionConfig,
    BaselineScorer, ClipStore, ClipWindow, MatrixScorer, ParseMode, Side, SimMatrix, Similarity, Splits,
    SubtitleRecord, Vocabulary,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    attention_dumps, beam_decode, corpus_bleu, export_attention, results_csv, results_report, run_ablation_suite,
    AblationData, DecodeConfig, Variant,
};
use crate::model::{check_params, gradient_check, init_params, ModelConfig, TextBatch, VideoFeatureBatch};
use crate::numerics::{checkpoint, ParamSet};
use crate::training::{
    examples_from_records, generate_synthetic_dataset, train, BumpPlacement, Example, MetricsRecord, TrainConfig,
    TrainObserver,
};

pub(super) fn dispatch(cli: &Cli, line: &str) -> Result<()> {
    let seed = cli.seed;
    match &cli.command {
        Command::Pipeline(p) => pipeline(p, line, seed),
        Command::Synth(a) => synth(a, line, seed),
        Command::Train(a) => train_cmd(a, line, seed),
        Command::Decode(a) => decode_cmd(a, line, seed),
        Command::Bleu(a) => bleu(a),
        Command::Ablate(a) => ablate(a, line, seed),
        Command::AttnDump(a) => attn_dump(a, line, seed),
        Command::GradCheck(a) => grad_check(a, seed),
    }
}

fn read_corpus(path: &Path) -> Result<Vec<SubtitleRecord>> {
    Ok(parse_corpus(path, ParseMode::Strict)?.records)
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut s = String::new();
    for item in items {
        s.push_str(&serde_json::to_string(&item).expect("plain data serializes"));
        s.push('\n');
    }
    s
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn pipeline(p: &Pipeline, line: &str, seed: u64) -> Result<()> {
    match p {
        Pipeline::Windows(a) => windows(a, line, seed),
        Pipeline::Transets(a) => {
            let records = read_corpus(&a.input)?;
            Manifest::new(line, seed).input(&a.input)?.write(&manifest_path(&a.out))?;
            let sets = collect_translation_sets(&records);
            write_text(&a.out, &jsonl(&sets))?;
            eprintln!("{} translation sets from {} records", sets.len(), records.len());
            Ok(())
        }
        Pipeline::Ambiguous(a) => ambiguous(a, line, seed),
        Pipeline::Votes(a) => {
            let votes = load_votes(&a.input)?;
            Manifest::new(line, seed).input(&a.input)?.write(&manifest_path(&a.out))?;
            let decisions = aggregate_votes(&votes)?;
            write_text(&a.out, &decisions_to_string(&decisions))?;
            eprintln!("{} tasks decided", decisions.len());
            Ok(())
        }
        Pipeline::Alpha(a) => {
            let alpha = alpha_from_votes(&load_votes(&a.input)?)?;
            println!("{alpha:.6}");
            Ok(())
        }
        Pipeline::Splits(a) => splits(a, line, seed),
        Pipeline::Vocab(a) => {
            let records = read_corpus(&a.input)?;
            let side = if a.side == "source" { Side::Source } else { Side::Target };
            Manifest::new(line, seed)
                .config("side", &a.side)
                .config("min_count", a.min_count)
                .input(&a.input)?
                .write(&manifest_path(&a.out))?;
            let vocab = build_vocabulary(&records, side, a.min_count);
            vocab.save(&a.out)?;
            eprintln!("{} tokens including reserved", vocab.len());
            Ok(())
        }
        Pipeline::Flags(a) => {
            let records = read_corpus(&a.input)?;
            Manifest::new(line, seed).input(&a.input)?.write(&manifest_path(&a.out))?;
            let flags = flag_ambiguous_samples(&records, &collect_translation_sets(&records));
            let lines = records.iter().zip(&flags).map(|(r, &ambiguous)| FlagLine {
                id: r.id.clone(),
                ambiguous,
            });
            write_text(&a.out, &jsonl(lines))
        }
        Pipeline::Context(a) => {
            let records = read_corpus(&a.input)?;
            Manifest::new(line, seed).input(&a.input)?.write(&manifest_path(&a.out))?;
            write_text(&a.out, &corpus_to_string(&build_context_corpus(&records)))
        }
    }
}

#[derive(Serialize)]
struct WindowLine<'a> {
    record_id: &'a str,
    #[serde(flatten)]
    window: ClipWindow,
}

#[derive(Deserialize)]
struct DurationRow {
    video_id: String,
    duration_ms: u64,
}

fn windows(a: &WindowsArgs, line: &str, seed: u64) -> Result<()> {
    let records = read_corpus(&a.input)?;
    let mut durations = HashMap::new();
    if let Some(p) = &a.durations {
        let mut rdr = csv::Reader::from_path(p).map_err(|e| Error::format(p, e.to_string()))?;
        for row in rdr.deserialize::<DurationRow>() {
            let row = row.map_err(|e| Error::format(p, e.to_string()))?;
            durations.insert(row.video_id, row.duration_ms);
        }
    }
    let mut m = Manifest::new(line, seed);
    m.config("skip_unusable", a.skip_unusable).input(&a.input)?;
    if let Some(p) = &a.durations {
        m.input(p)?;
    }
    m.write(&manifest_path(&a.out))?;
    let mut out = Vec::new();
    let mut skipped = 0;
    for r in &records {
        match compute_clip_window(r, durations.get(&r.video_id).copied()) {
            Ok(window) => out.push(WindowLine {
                record_id: &r.id,
                window,
            }),
            Err(Error::UnusableClip { .. }) if a.skip_unusable => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    write_text(&a.out, &jsonl(&out))?;
    eprintln!("{} windows, {skipped} records skipped", out.len());
    Ok(())
}

fn ambiguous(a: &AmbiguousArgs, line: &str, seed: u64) -> Result<()> {
    let records = read_corpus(&a.input)?;
    let config = AmbiguitySelectionConfig {
        target_threshold: a.target_threshold,
        schedule: a.schedule.clone(),
    };
    config.validate()?;
    let schedule: Vec<String> = a.schedule.iter().map(|v| v.to_string()).collect();
    let mut m = Manifest::new(line, seed);
    m.config("target_threshold", a.target_threshold)
        .config("schedule", schedule.join(","))
        .input(&a.input)?;
    let matrices = match (&a.cross_sim, &a.target_sim) {
        (Some(c), Some(t)) => {
            m.config("scorer", "matrix").input(c)?.input(t)?;
            Some(MatrixScorer::new(SimMatrix::load(c)?, SimMatrix::load(t)?, records.len())?)
        }
        _ => {
            m.config("scorer", &a.scorer);
            None
        }
    };
    m.write(&manifest_path(&a.out))?;
    let baseline = BaselineScorer { records: &records };
    let scorer: &dyn Similarity = match &matrices {
        Some(s) => s,
        None => &baseline,
    };
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let sets = collect_translation_sets(&records);
    let chosen = select_ambiguous_sets(&sets, &ids, scorer, &config)?;
    write_text(&a.out, &jsonl(&chosen))?;
    eprintln!("{} ambiguous sets out of {} translation sets", chosen.len(), sets.len());
    Ok(())
}

fn splits(a: &SplitsArgs, line: &str, seed: u64) -> Result<()> {
    let records = read_corpus(&a.input)?;
    let decisions = load_decisions(&a.decisions)?;
    create_dir(&a.out_dir)?;
    let mut m = Manifest::new(line, seed);
    if let Some(c) = a.cap {
        m.config("cap", c);
    }
    m.input(&a.input)?.input(&a.decisions)?;
    m.write(&a.out_dir.join("splits.manifest"))?;
    let s = build_splits(&records, &decisions, seed, a.cap);
    for (name, idx) in [("train", &s.train), ("valid", &s.validation), ("test", &s.test)] {
        write_text(
            &a.out_dir.join(format!("{name}.jsonl")),
            &corpus_to_string(&Splits::records(&records, idx)),
        )?;
    }
    eprintln!("train {}, valid {}, test {}", s.train.len(), s.validation.len(), s.test.len());
    Ok(())
}

fn synth(a: &SynthArgs, line: &str, seed: u64) -> Result<()> {
    let placement = if a.placement == "edge" {
        BumpPlacement::Edge
    } else {
        BumpPlacement::Central
    };
    if a.splits.len() != 3 {
        return Err(Error::Config("--splits takes three sizes".into()));
    }
    let sizes: Vec<String> = a.splits.iter().map(|v| v.to_string()).collect();
    create_dir(&a.out_dir)?;
    Manifest::new(line, seed)
        .config("n", a.n)
        .config("frames", a.frames)
        .config("dim", a.dim)
        .config("placement", &a.placement)
        .config("splits", sizes.join(","))
        .write(&a.out_dir.join("synth.manifest"))?;
    let data = generate_synthetic_dataset(a.n, a.frames, a.dim, seed, placement)?;
    let parts = data.split(&a.splits)?;
    let features = a.out_dir.join("features");
    create_dir(&features)?;
    for (name, part) in ["train", "valid", "test"].iter().zip(&parts) {
        write_text(&a.out_dir.join(format!("{name}.jsonl")), &corpus_to_string(&part.records))?;
        for (i, r) in part.records.iter().enumerate() {
            write_features(&feature_path(&features, &r.id), a.frames, a.dim, part.clips.clip(i))?;
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct FlagLine {
    id: String,
    ambiguous: bool,
}

fn resolve_config(opts: &ModelOpts, seed: u64) -> Result<(ModelConfig, TrainConfig)> {
    let mut model = ModelConfig::default();
    let mut tc = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let mut apply = |k: &str, v: &str| {
        if ModelConfig::keys().contains(&k) {
            model.set(k, v)
        } else if TrainConfig::keys().contains(&k) {
            tc.set(k, v)
        } else {
            Err(Error::Config(format!("unknown configuration key `{k}`")))
        }
    };
    if let Some(path) = &opts.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (n, l) in text.lines().enumerate() {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| Error::format(path, format!("line {}: expected `key = value`", n + 1)))?;
            apply(k.trim(), v.trim())?;
        }
    }
    for s in &opts.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
        apply(k.trim(), v.trim())?;
    }
    Ok((model, tc))
}

/// Corpus parts mapped to examples over one shared clip store. Vocabularies
/// come from the first part.
struct Prepared {
    records: Vec<Vec<SubtitleRecord>>,
    examples: Vec<Vec<Example>>,
    store: ClipStore,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
}

fn prepare(parts: &[&Path], features: &Path, opts: &ModelOpts) -> Result<Prepared> {
    let records: Vec<Vec<SubtitleRecord>> = parts.iter().map(|p| read_corpus(p)).collect::<Result<_>>()?;
    let all: Vec<SubtitleRecord> = records.concat();
    let flags = match &opts.flags {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut map = HashMap::new();
            for (n, l) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let f: FlagLine =
                    serde_json::from_str(l).map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
                map.insert(f.id, f.ambiguous);
            }
            all.iter()
                .map(|r| {
                    map.get(&r.id)
                        .copied()
                        .ok_or_else(|| Error::format(path, format!("no flag for record `{}`", r.id)))
                })
                .collect::<Result<Vec<bool>>>()?
        }
        None => flag_ambiguous_samples(&all, &collect_translation_sets(&all)),
    };
    let src_vocab = build_vocabulary(&records[0], Side::Source, opts.min_count);
    let tgt_vocab = build_vocabulary(&records[0], Side::Target, opts.min_count);
    let store = ClipStore::load_dir(features, all.iter().map(|r| r.id.as_str()))?;
    let mut examples = Vec::new();
    let mut offset = 0;
    for part in &records {
        let mut ex = examples_from_records(part, &src_vocab, &tgt_vocab, &flags[offset..offset + part.len()]);
        ex.iter_mut().for_each(|e| e.clip += offset);
        offset += part.len();
        examples.push(ex);
    }
    Ok(Prepared {
        records,
        examples,
        store,
        src_vocab,
        tgt_vocab,
    })
}

fn fit_to_data(model: &mut ModelConfig, p: &Prepared) {
    model.src_vocab_size = p.src_vocab.len();
    model.tgt_vocab_size = p.tgt_vocab.len();
    model.frames_per_clip = p.store.frames;
    model.video_feature_dim = p.store.dim;
}

fn config_manifest(m: &mut Manifest, model: &ModelConfig, tc: &TrainConfig, opts: &ModelOpts) {
    for k in ModelConfig::keys() {
        m.config(k, model.get(k).unwrap());
    }
    for k in TrainConfig::keys() {
        m.config(k, tc.get(k).unwrap());
    }
    m.config("min_count", opts.min_count);
}

struct Progress {
    metrics: BufWriter<File>,
    path: PathBuf,
    out: PathBuf,
}

impl TrainObserver for Progress {
    fn metrics(&mut self, r: &MetricsRecord) -> Result<()> {
        let line = serde_json::to_string(r).expect("metrics serialize");
        writeln!(self.metrics, "{line}").map_err(|e| Error::io(&self.path, e))?;
        if let Some(v) = r.val_loss {
            eprintln!("step {:>6}  train {:.4}  valid {:.4}", r.step, r.train_loss, v);
        }
        Ok(())
    }

    fn checkpoint(&mut self, step: usize, params: &ParamSet) -> Result<()> {
        checkpoint::save(params, &sidecar(&self.out, &format!(".step{step}")))
    }
}

fn train_cmd(a: &TrainArgs, line: &str, seed: u64) -> Result<()> {
    let (mut model, tc) = resolve_config(&a.model, seed)?;
    let p = prepare(&[&a.train, &a.valid], &a.features, &a.model)?;
    fit_to_data(&mut model, &p);
    model.validate()?;
    let mut m = Manifest::new(line, seed);
    config_manifest(&mut m, &model, &tc, &a.model);
    m.input(&a.train)?.input(&a.valid)?.input(&a.features)?;
    if let Some(f) = &a.model.flags {
        m.input(f)?;
    }
    m.write(&manifest_path(&a.out))?;

    let metrics_path = sidecar(&a.out, ".metrics.jsonl");
    let file = File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let mut progress = Progress {
        metrics: BufWriter::new(file),
        path: metrics_path.clone(),
        out: a.out.clone(),
    };
    let init = init_params(&model, seed)?;
    let outcome = train(&model, init, &p.examples[0], &p.examples[1], &p.store, &tc, &mut progress)?;
    progress.metrics.flush().map_err(|e| Error::io(&metrics_path, e))?;

    checkpoint::save(&outcome.params, &a.out)?;
    model.save(&sidecar(&a.out, ".config"))?;
    p.src_vocab.save(&sidecar(&a.out, ".src.vocab"))?;
    p.tgt_vocab.save(&sidecar(&a.out, ".tgt.vocab"))?;
    println!(
        "stopped: {:?} after {} steps ({} epochs); best validation loss {:.4} at step {}",
        outcome.stop, outcome.steps, outcome.epochs, outcome.best_val_loss, outcome.best_step
    );
    Ok(())
}

struct Loaded {
    params: ParamSet,
    config: ModelConfig,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
}

fn load_model(ckpt: &Path) -> Result<Loaded> {
    let params = checkpoint::load(ckpt)?;
    let config = ModelConfig::load(&sidecar(ckpt, ".config"))?;
    check_params(&config, &params)?;
    Ok(Loaded {
        params,
        config,
        src_vocab: Vocabulary::load(&sidecar(ckpt, ".src.vocab"))?,
        tgt_vocab: Vocabulary::load(&sidecar(ckpt, ".tgt.vocab"))?,
    })
}

fn load_clips(features: &Path, records: &[SubtitleRecord], config: &ModelConfig) -> Result<ClipStore> {
    let store = ClipStore::load_dir(features, records.iter().map(|r| r.id.as_str()))?;
    if (store.frames, store.dim) != (config.frames_per_clip, config.video_feature_dim) {
        return Err(Error::Input(format!(
            "clips are {}x{}, the model expects {}x{}",
            store.frames, store.dim, config.frames_per_clip, config.video_feature_dim
        )));
    }
    Ok(store)
}

fn decode_config(d: &DecodeOpts) -> DecodeConfig {
    DecodeConfig {
        beam_size: d.beam,
        max_length: d.max_length,
        length_penalty: d.length_penalty,
    }
}

fn decode_cmd(a: &DecodeArgs, line: &str, seed: u64) -> Result<()> {
    let model = load_model(&a.ckpt)?;
    let records = read_corpus(&a.input)?;
    let store = load_clips(&a.features, &records, &model.config)?;
    Manifest::new(line, seed)
        .config("beam", a.decode.beam)
        .config("max_length", a.decode.max_length)
        .config("length_penalty", a.decode.length_penalty)
        .input(&a.ckpt)?
        .input(&a.input)?
        .input(&a.features)?
        .write(&manifest_path(&a.out))?;
    let sources: Vec<Vec<usize>> = records.iter().map(|r| model.src_vocab.encode(&r.source_text)).collect();
    let clips: Vec<usize> = (0..records.len()).collect();
    let hyps = beam_decode(&model.params, &model.config, &sources, &store, &clips, &decode_config(&a.decode))?;
    let mut text = String::new();
    for h in &hyps {
        text.push_str(&model.tgt_vocab.decode(&h.tokens));
        text.push('\n');
    }
    write_text(&a.out, &text)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn bleu(a: &BleuArgs) -> Result<()> {
    let b = corpus_bleu(&read_lines(&a.hyp)?, &read_lines(&a.reference)?)?;
    println!("{:.2}", b.score);
    Ok(())
}

fn ablate(a: &AblateArgs, line: &str, seed: u64) -> Result<()> {
    let (mut model, tc) = resolve_config(&a.model, seed)?;
    let variants = if a.variants.is_empty() {
        Variant::ALL.to_vec()
    } else {
        a.variants
            .iter()
            .map(|s| Variant::parse(s).ok_or_else(|| Error::Config(format!("unknown variant `{s}`"))))
            .collect::<Result<_>>()?
    };
    let p = prepare(&[&a.train, &a.valid, &a.test], &a.features, &a.model)?;
    fit_to_data(&mut model, &p);
    model.validate()?;
    let mut m = Manifest::new(line, seed);
    config_manifest(&mut m, &model, &tc, &a.model);
    let names: Vec<&str> = variants.iter().map(|v| v.slug()).collect();
    m.config("variants", names.join(","))
        .config("beam", a.decode.beam)
        .config("max_length", a.decode.max_length)
        .config("length_penalty", a.decode.length_penalty);
    m.input(&a.train)?.input(&a.valid)?.input(&a.test)?.input(&a.features)?;
    if let Some(f) = &a.model.flags {
        m.input(f)?;
    }
    m.write(&manifest_path(&a.out))?;
    let references: Vec<String> = p.records[2].iter().map(|r| r.target_text.clone()).collect();
    let data = AblationData {
        train: &p.examples[0],
        valid: &p.examples[1],
        test: &p.examples[2],
        test_references: &references,
        clips: &p.store,
        tgt_vocab: &p.tgt_vocab,
    };
    let rows = run_ablation_suite(&data, &model, &tc, &decode_config(&a.decode), &variants, seed)?;
    write_text(&a.out, &results_csv(&rows))?;
    print!("{}", results_report(&rows));
    Ok(())
}

fn attn_dump(a: &AttnDumpArgs, line: &str, seed: u64) -> Result<()> {
    let model = load_model(&a.ckpt)?;
    let records = read_corpus(&a.input)?;
    let store = load_clips(&a.features, &records, &model.config)?;
    Manifest::new(line, seed)
        .input(&a.ckpt)?
        .input(&a.input)?
        .input(&a.features)?
        .write(&manifest_path(&a.out))?;
    let mut dumps = Vec::with_capacity(records.len());
    let indices: Vec<usize> = (0..records.len()).collect();
    for chunk in indices.chunks(32) {
        let src: Vec<Vec<usize>> = chunk.iter().map(|&i| model.src_vocab.encode(&records[i].source_text)).collect();
        if let Some(&i) = chunk.iter().zip(&src).find(|(_, s)| s.is_empty()).map(|(i, _)| i) {
            return Err(Error::Input(format!("record `{}` has an empty source", records[i].id)));
        }
        let tgt: Vec<Vec<usize>> = chunk.iter().map(|&i| model.tgt_vocab.encode(&records[i].target_text)).collect();
        let batch = TextBatch::from_pairs(&src, &tgt, &vec![false; chunk.len()])?;
        let clips: Vec<&[f64]> = chunk.iter().map(|&i| store.clip(i)).collect();
        let feats = VideoFeatureBatch::stack(&clips, store.frames, store.dim)?;
        let ids: Vec<String> = chunk.iter().map(|&i| records[i].id.clone()).collect();
        let tokens: Vec<Vec<String>> = chunk
            .iter()
            .map(|&i| records[i].source_text.split_whitespace().map(str::to_string).collect())
            .collect();
        dumps.extend(attention_dumps(&model.params, &model.config, &batch, &feats, &ids, &tokens)?);
    }
    export_attention(&dumps, &a.out)
}

fn grad_check(a: &GradCheckArgs, seed: u64) -> Result<()> {
    let mut worst: f64 = 0.0;
    let mut by_seed = BTreeMap::new();
    for s in seed..seed + a.seeds.max(1) {
        let r = gradient_check(s, a.d_model, a.frames)?;
        by_seed.insert(s, r.max_relative_error);
        worst = worst.max(r.max_relative_error);
    }
    if by_seed.len() > 1 {
        for (s, e) in &by_seed {
            println!("seed {s}: {e:.3e}");
        }
    }
    println!("max relative error: {worst:.3e}");
    if worst < 1e-3 {
        Ok(())
    } else {
        Err(Error::State(format!("gradient check failed: {worst:.3e} >= 1e-3")))
    }
}

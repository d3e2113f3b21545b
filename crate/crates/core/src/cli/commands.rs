use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{emit, eval_table, json_document, render_eval, Provenance};
use super::*;
use crate::dataset::{render_training_lines, TemplateBank};
use crate::error::{Error, Result};
use crate::eval::{compare_rankings, human_to_human, pairwise_eval, pointwise_eval, rank_models, PairwiseSample, PointwiseSample};
use crate::multiturn::{expand_pair, sample_pairs};
use crate::probe::{featurize, forward, train, FeatureMode, FeatureRefs, ProbeConfig, ProbeParams};
use crate::remote::{RemoteOptions, RemoteProvider};
use crate::store::{read_store, Embeddings};
use crate::synthetic::{compute_thresholds, label_dataset, LabelerConfig};
use crate::types::{EditSequence, EvalReport, Method, RankedModel, ScoredRecord, SyntheticSample};
use crate::{jsonl, seed};

/// Executes a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Thresholds(a) => thresholds(&a),
        Command::LabelSynthetic(a) => with_jobs(a.run.jobs, || label_synthetic(&a)),
        Command::LabelMultiturn(a) => with_jobs(a.run.jobs, || label_multiturn(&a)),
        Command::Build(a) => build(&a),
        Command::TrainProbe(a) => train_probe(&a),
        Command::Score(a) => with_jobs(a.run.jobs, || score(&a)),
        Command::EvalPointwise(a) => eval_pointwise(&a),
        Command::EvalPairwise(a) => eval_pairwise(&a),
        Command::Rank(a) => rank(&a),
    }
}

fn with_jobs(jobs: Option<usize>, f: impl FnOnce() -> Result<()> + Send) -> Result<()> {
    match jobs {
        None => f(),
        Some(0) => Err(Error::Config("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(f),
    }
}

enum Provider {
    Stores(Embeddings),
    Remote(RemoteProvider),
}

fn load_stores(store_args: &[String]) -> Result<Embeddings> {
    let (mut clip, mut dino, mut shared) = (None, None, None);
    for arg in store_args {
        let (slot, path) = match arg.split_once('=') {
            Some(("clip", p)) => (&mut clip, p),
            Some(("dino", p)) => (&mut dino, p),
            Some((space, _)) => return Err(Error::Config(format!("unknown embedding space `{space}` in --store"))),
            None => (&mut shared, arg.as_str()),
        };
        if slot.is_some() {
            return Err(Error::Config(format!("embedding store given twice: {arg}")));
        }
        *slot = Some(PathBuf::from(path));
    }
    match (shared, clip, dino) {
        (Some(p), None, None) => Ok(Embeddings::shared(read_store(p)?)),
        (None, Some(c), Some(d)) => Ok(Embeddings::new(read_store(c)?, read_store(d)?)),
        _ => Err(Error::Config(
            "use either one --store PATH or both --store clip=PATH and --store dino=PATH".into(),
        )),
    }
}

impl ProviderArgs {
    fn resolve(&self) -> Result<Provider> {
        if !self.stores.is_empty() {
            if self.endpoint.is_some() {
                return Err(Error::Config("--store and --endpoint are mutually exclusive".into()));
            }
            return load_stores(&self.stores).map(Provider::Stores);
        }
        let endpoint = self
            .endpoint
            .clone()
            .or_else(|| std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.is_empty()))
            .ok_or_else(|| Error::Config(format!("no embedding store: pass --store or --endpoint, or set {ENDPOINT_ENV}")))?;
        let options = RemoteOptions {
            retries: self.retries,
            ..RemoteOptions::default()
        };
        Ok(Provider::Remote(RemoteProvider::new(endpoint, options)))
    }

    fn stores_only(&self, command: &str) -> Result<Embeddings> {
        match self.resolve()? {
            Provider::Stores(e) => Ok(e),
            Provider::Remote(_) => Err(Error::Config(format!("{command} needs precomputed embeddings (--store)"))),
        }
    }

    fn for_samples(&self, samples: &[SyntheticSample], manifest: &Path) -> Result<Embeddings> {
        match self.resolve()? {
            Provider::Stores(e) => Ok(e),
            Provider::Remote(r) => r.materialize_synthetic(samples, manifest.parent().unwrap_or(Path::new("."))),
        }
    }

    fn store_paths(&self) -> Vec<PathBuf> {
        self.stores
            .iter()
            .map(|s| PathBuf::from(s.split_once('=').map_or(s.as_str(), |(_, p)| p)))
            .collect()
    }
}

fn parse_methods(names: &[String]) -> Result<std::collections::BTreeSet<Method>> {
    names
        .iter()
        .map(|n| n.trim().parse::<Method>())
        .collect()
}

impl LabelerArgs {
    fn config(&self) -> Result<LabelerConfig> {
        let mut c = LabelerConfig {
            tau_clip_d: self.tau_clip_d,
            threshold_percentile: self.percentile,
            ..LabelerConfig::default()
        };
        if let Some(n) = &self.negative_methods {
            c.negative_methods = parse_methods(n)?;
        }
        if let Some(p) = &self.positive_methods {
            c.positive_methods = parse_methods(p)?;
        }
        c.validate()?;
        Ok(c)
    }
}

fn inputs<'a>(main: impl IntoIterator<Item = &'a Path>, provider: &'a [PathBuf]) -> Vec<&'a Path> {
    main.into_iter().chain(provider.iter().map(PathBuf::as_path)).collect()
}

#[derive(Serialize)]
struct ThresholdsOut {
    tau_clip_i: f64,
    tau_dino_i: f64,
    tau_clip_d: f64,
    percentile: f64,
    n_pairs: usize,
}

fn read_manifest(path: &Path) -> Result<Vec<SyntheticSample>> {
    let samples: Vec<SyntheticSample> = jsonl::read(path)?;
    if samples.is_empty() {
        return Err(Error::EmptyInput(format!("{}: manifest has no samples", path.display())));
    }
    Ok(samples)
}

fn thresholds(a: &ThresholdsArgs) -> Result<()> {
    let config = a.labeler.config()?;
    let samples = read_manifest(&a.manifest)?;
    let emb = a.provider.for_samples(&samples, &a.manifest)?;
    let stats = compute_thresholds(&samples, &emb, &config)?;
    let store_paths = a.provider.store_paths();
    let prov = Provenance::new(&inputs([a.manifest.as_path()], &store_paths), a)?;
    let t = stats.thresholds;
    let body = ThresholdsOut {
        tau_clip_i: t.tau_clip_i,
        tau_dino_i: t.tau_dino_i,
        tau_clip_d: t.tau_clip_d,
        percentile: stats.percentile,
        n_pairs: stats.n_pairs,
    };
    eprintln!(
        "thresholds over {} pairs at p{}: clip_i {:.4}, dino_i {:.4}",
        stats.n_pairs, stats.percentile, t.tau_clip_i, t.tau_dino_i
    );
    emit(a.out.as_ref(), &json_document(&body, &prov)?)
}

fn label_synthetic(a: &LabelSyntheticArgs) -> Result<()> {
    let config = a.labeler.config()?;
    let samples = read_manifest(&a.manifest)?;
    let emb = a.provider.for_samples(&samples, &a.manifest)?;
    let labeled = label_dataset(&samples, &emb, &config, a.strict)?;

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &labeled.records {
        *counts.entry(r.source.as_str()).or_default() += 1;
    }
    let t = labeled.thresholds.thresholds;
    eprintln!(
        "labeled {} of {} samples (tau_clip_i {:.4}, tau_dino_i {:.4}, {} pairs)",
        labeled.records.len(),
        samples.len(),
        t.tau_clip_i,
        t.tau_dino_i,
        labeled.thresholds.n_pairs
    );
    for (source, n) in &counts {
        eprintln!("  {source:<14} {n}");
    }
    if !labeled.errors.is_empty() {
        match &a.errors {
            Some(path) => jsonl::write(path, &labeled.errors)?,
            None => {
                for e in &labeled.errors {
                    eprintln!("  error at line {} ({}): {}", e.index + 1, e.sample_id, e.message);
                }
            }
        }
        eprintln!("  {} sample(s) failed", labeled.errors.len());
    }
    emit(a.out.as_ref(), &jsonl::to_string(&labeled.records))
}

fn label_multiturn(a: &LabelMultiturnArgs) -> Result<()> {
    let sequences: Vec<EditSequence> = jsonl::read(&a.manifest)?;
    if sequences.is_empty() {
        return Err(Error::EmptyInput(format!("{}: manifest has no sequences", a.manifest.display())));
    }
    if a.pairs == 0 {
        return Err(Error::Config("--pairs must be at least 1".into()));
    }
    let per_sequence: Vec<Vec<ScoredRecord>> = sequences
        .par_iter()
        .map(|s| {
            let pairs = sample_pairs(s, a.pairs, seed::substream(a.run.seed, &format!("multiturn/{}", s.sequence_id)))?;
            let mut out = Vec::new();
            for p in pairs {
                out.extend(expand_pair(s, p)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let records: Vec<ScoredRecord> = per_sequence.into_iter().flatten().collect();
    eprintln!("{} records from {} sequences", records.len(), sequences.len());
    emit(a.out.as_ref(), &jsonl::to_string(&records))
}

fn read_records(paths: &[PathBuf]) -> Result<Vec<ScoredRecord>> {
    let mut records = Vec::new();
    for p in paths {
        records.extend(jsonl::read::<ScoredRecord>(p)?);
    }
    if records.is_empty() {
        return Err(Error::EmptyInput("no labeled records".into()));
    }
    Ok(records)
}

fn build(a: &BuildArgs) -> Result<()> {
    let bank = match &a.templates {
        Some(p) => TemplateBank::load(p)?,
        None => TemplateBank::default(),
    };
    let records = read_records(&a.records)?;
    let mut rng = seed::rng(a.seed, "build");
    let (lines, summary) = render_training_lines(&records, &bank, &mut rng)?;
    eprintln!(
        "{}",
        serde_json::to_string(&summary).map_err(|e| Error::Format(e.to_string()))?
    );
    emit(a.out.as_ref(), &jsonl::to_string(&lines))
}

fn train_probe(a: &TrainProbeArgs) -> Result<()> {
    let config = ProbeConfig {
        feature_mode: a.feature_mode.into(),
        hidden_width: a.hidden_width,
        learning_rate: a.learning_rate,
        batch_size: a.batch_size,
        epochs: a.epochs,
        seed: a.seed,
        lambda_score: a.lambda_score,
    };
    config.validate()?;
    let emb = a.provider.stores_only("train-probe")?;
    let records = read_records(&a.records)?;
    let (params, log) = train(&records, &emb, &config)?;
    if let Some(last) = log.epochs.last() {
        eprintln!(
            "trained on {} examples ({} features): epoch {} loss {:.6}",
            log.n_train, log.feature_dim, last.epoch, last.train_loss
        );
    }
    if let Some(path) = &a.log {
        jsonl::write(path, &log.epochs)?;
    }
    params.save(&a.out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct ScoreLine {
    pub record_id: String,
    pub score: f64,
}

fn mode_for(params: &ProbeParams, clip_dim: usize) -> Result<FeatureMode> {
    [FeatureMode::SimsOnly, FeatureMode::SimsPlusDiffs]
        .into_iter()
        .find(|m| m.feature_dim(clip_dim) == params.feature_dim)
        .ok_or(Error::DimensionMismatch {
            expected: params.feature_dim,
            actual: FeatureMode::SimsOnly.feature_dim(clip_dim),
        })
}

fn score(a: &ScoreArgs) -> Result<()> {
    let params = ProbeParams::load(&a.params)?;
    let mut input_paths = vec![a.params.as_path()];
    let items: Vec<(String, Result<Vec<f64>>)>;
    let emb;
    let mode;
    match (&a.records, &a.manifest) {
        (Some(path), _) => {
            input_paths.push(path);
            let records = read_records(std::slice::from_ref(path))?;
            emb = a.provider.stores_only("score --records")?;
            mode = mode_for(&params, emb.clip_store().dim())?;
            items = records
                .par_iter()
                .map(|r| {
                    let x = FeatureRefs::try_from(r).and_then(|refs| featurize(refs, &emb, mode));
                    (r.record_id.clone(), x)
                })
                .collect();
        }
        (None, Some(path)) => {
            input_paths.push(path);
            let samples = read_manifest(path)?;
            emb = a.provider.for_samples(&samples, path)?;
            mode = mode_for(&params, emb.clip_store().dim())?;
            items = samples
                .par_iter()
                .map(|s| (s.sample_id.clone(), featurize(FeatureRefs::from(s), &emb, mode)))
                .collect();
        }
        (None, None) => return Err(Error::Config("score needs --records or --manifest".into())),
    }
    let lines = items
        .into_iter()
        .map(|(record_id, x)| {
            let score = forward(&params, &x?)?;
            Ok(ScoreLine { record_id, score })
        })
        .collect::<Result<Vec<_>>>()?;
    eprintln!("scored {} items", lines.len());
    let text = match a.format {
        ReportFormat::Jsonl => jsonl::to_string(&lines),
        ReportFormat::Csv => {
            let mut s = String::from("record_id,score\n");
            for l in &lines {
                s += &format!("{},{}\n", l.record_id, l.score);
            }
            s
        }
    };
    emit(a.out.as_ref(), &text)
}

fn eval_pointwise(a: &EvalPointwiseArgs) -> Result<()> {
    let mut samples: Vec<PointwiseSample> = jsonl::read(&a.input)?;
    let mut paths = vec![a.input.as_path()];
    if let Some(path) = &a.scores {
        paths.push(path);
        let scores: BTreeMap<String, f64> = jsonl::read::<ScoreLine>(path)?
            .into_iter()
            .map(|l| (l.record_id, l.score))
            .collect();
        for s in &mut samples {
            s.model_score = *scores
                .get(&s.id)
                .ok_or_else(|| Error::InvalidRecord(format!("no score for sample `{}`", s.id)))?;
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput(format!("{}: no samples", a.input.display())));
    }
    let pw = pointwise_eval(&samples)?;
    let report = EvalReport {
        per_method_spearman: pw.per_method_spearman,
        undefined_methods: pw.undefined_methods,
        fisher_average: Some(pw.fisher_average),
        human_to_human: match human_to_human(&samples) {
            Ok(h) => Some(h),
            Err(Error::EmptyInput(_) | Error::Undefined(_)) => None,
            Err(e) => return Err(e),
        },
        ..EvalReport::default()
    };
    eprint!("{}", eval_table(&report));
    emit(a.out.as_ref(), &render_eval(&report, &Provenance::new(&paths, a)?, a.format)?)
}

fn eval_pairwise(a: &EvalPairwiseArgs) -> Result<()> {
    let samples: Vec<PairwiseSample> = jsonl::read(&a.input)?;
    let report = EvalReport {
        pairwise_accuracy: Some(pairwise_eval(&samples, a.tie_epsilon)?),
        ..EvalReport::default()
    };
    eprint!("{}", eval_table(&report));
    emit(
        a.out.as_ref(),
        &render_eval(&report, &Provenance::new(&[a.input.as_path()], a)?, a.format)?,
    )
}

#[derive(Deserialize)]
struct MethodScore {
    method: String,
    score: f64,
}

#[derive(Deserialize)]
struct ReferenceRank {
    method: String,
    rank: usize,
}

fn rank(a: &RankArgs) -> Result<()> {
    let rows: Vec<MethodScore> = jsonl::read(&a.input)?;
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in rows {
        if !r.score.is_finite() {
            return Err(Error::InvalidRecord(format!("non-finite score for `{}`", r.method)));
        }
        let e = sums.entry(r.method).or_default();
        e.0 += r.score;
        e.1 += 1;
    }
    let averages: BTreeMap<String, f64> = sums.into_iter().map(|(m, (s, n))| (m, s / n as f64)).collect();
    let ranking = rank_models(&averages)?;
    let mut paths = vec![a.input.as_path()];
    let ranking_agreement = match &a.reference {
        Some(path) => {
            paths.push(path);
            let reference: Vec<RankedModel> = jsonl::read::<ReferenceRank>(path)?
                .into_iter()
                .map(|r| RankedModel {
                    method: r.method,
                    score: 0.0,
                    rank: r.rank,
                })
                .collect();
            Some(compare_rankings(&ranking, &reference)?)
        }
        None => None,
    };
    let report = EvalReport {
        ranking,
        ranking_agreement,
        ..EvalReport::default()
    };
    eprint!("{}", eval_table(&report));
    emit(a.out.as_ref(), &render_eval(&report, &Provenance::new(&paths, a)?, a.format)?)
}

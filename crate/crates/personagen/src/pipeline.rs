//! Stage orchestration: compose persona sampling, scenario conditioning,
//! text generation, judging, embedding, metric evaluation, and
//! classification into file-to-file runs.
//!
//! Every run function is deterministic from `(config, seed)` when both
//! backends are mock: per-slot RNG streams are derived with
//! [`child_seed`], ids are pre-assigned by slot, timestamps come from the
//! fixed clock, and summaries contain only counts — so repeated runs
//! produce byte-identical artifacts.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::classify::{evaluate, split, substitution_experiment, train, EvalReport};
use crate::embedding::{
    embed_batch, EmbeddedCorpus, EmbeddedSample, EmbeddingProvider, MockEmbedder, RemoteEmbedder,
};
use crate::error::{Error, Result};
use crate::exec::run_bounded;
use crate::gateway::{
    generate_text, judge_plausibility, judge_rubric, EmotionCategory, EmotionSample, GenContext,
    GenerationRequest, JudgeSubject, LlmBackend, MockBackend, PlausibilityLabel, RemoteBackend,
    RetryPolicy, RUBRIC_CRITERIA,
};
use crate::metrics::{
    diversity_report, pca_table, similarity_report, DiversityReport, PcaPoint, SimilarityReport,
};
use crate::persona::{assemble_persona, sample_background, sample_base_persona, Persona};
use crate::rng::{child_seed, seeded, Clock, IdGen};
use crate::scenario::sample_scenario;
use crate::store::{
    ingest_golden, read_records, write_records, BackendKind, GoldenIngestSpec, GoldenRecord,
    IngestSummary, RunConfig,
};

/// The concrete backends a run talks to, plus the timestamp source.
pub struct Backends {
    pub llm: Box<dyn LlmBackend>,
    pub embedder: Box<dyn EmbeddingProvider>,
    pub clock: Clock,
}

impl Backends {
    /// Gateway call context using this run's retry policy.
    pub fn gen_context(&self, retry: RetryPolicy) -> GenContext<'_> {
        GenContext {
            backend: self.llm.as_ref(),
            retry,
            clock: self.clock,
        }
    }
}

/// Instantiate backends from configuration. `override_kind` (the
/// `--backend` flag) forces both the chat backend and the embedding
/// provider; otherwise each follows its own config section. The clock is
/// fixed at the epoch exactly when everything is mock, keeping offline
/// artifacts byte-stable.
pub fn make_backends(config: &RunConfig, override_kind: Option<BackendKind>) -> Result<Backends> {
    let chat_kind = override_kind.unwrap_or(config.backend.kind);
    let embed_kind = override_kind.unwrap_or(config.embedding.provider);
    let llm: Box<dyn LlmBackend> = match chat_kind {
        BackendKind::Mock => Box::new(MockBackend::new(config.seed)),
        BackendKind::Remote => Box::new(RemoteBackend::new(
            &config.backend.base_url,
            &config.backend.api_key_env,
            config.backend.timeout_ms,
        )?),
    };
    let embedder: Box<dyn EmbeddingProvider> = match embed_kind {
        BackendKind::Mock => Box::new(MockEmbedder::new(
            child_seed(config.seed, "embed", 0),
            config.embedding.dim,
        )),
        BackendKind::Remote => Box::new(RemoteEmbedder::new(
            config.embedding.base_url(&config.backend),
            &config.embedding.model,
            config.embedding.dim,
            &config.backend.api_key_env,
            config.backend.timeout_ms,
        )?),
    };
    let clock = if chat_kind == BackendKind::Mock && embed_kind == BackendKind::Mock {
        Clock::Fixed
    } else {
        Clock::System
    };
    Ok(Backends {
        llm,
        embedder,
        clock,
    })
}

/// Counts from a persona-construction run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PersonasSummary {
    pub requested: usize,
    pub written: usize,
    pub natural: usize,
    pub rare_but_plausible: usize,
    /// Candidates the judge rejected and the sampler replaced.
    pub implausible_rejected: usize,
}

/// Build `count` validated personas and write them to `out`.
///
/// Each slot draws from its own seeded stream and resamples judged-
/// implausible candidates up to `generation.resample_cap`. Rejected
/// candidates consume ids, so retained id sequences are deterministic but
/// may have gaps.
pub fn run_personas(
    config: &RunConfig,
    backends: &Backends,
    count: usize,
    out: &Path,
) -> Result<PersonasSummary> {
    let ctx = backends.gen_context(config.generation.retry);
    let judge_model = config.judge.model(&config.generation);
    let mut ids = IdGen::new("p");
    let mut personas = Vec::with_capacity(count);
    let mut summary = PersonasSummary {
        requested: count,
        written: 0,
        natural: 0,
        rare_but_plausible: 0,
        implausible_rejected: 0,
    };
    for slot in 0..count {
        let mut rng = seeded(child_seed(config.seed, "persona", slot as u64));
        let mut accepted = None;
        for _attempt in 0..config.generation.resample_cap {
            let base = sample_base_persona(&config.persona.base, &config.persona.filter, &mut rng)?;
            let background = sample_background(&base, &config.persona.background, &mut rng)?;
            let mut candidate = assemble_persona(base, background, &mut ids);
            let label = judge_plausibility(&JudgeSubject::Persona(&candidate), judge_model, &ctx)?;
            if label.is_keep() {
                candidate.validation = label.into();
                match label {
                    PlausibilityLabel::Natural => summary.natural += 1,
                    PlausibilityLabel::RareButPlausible => summary.rare_but_plausible += 1,
                    PlausibilityLabel::Implausible => unreachable!("is_keep filtered"),
                }
                accepted = Some(candidate);
                break;
            }
            summary.implausible_rejected += 1;
        }
        match accepted {
            Some(persona) => personas.push(persona),
            None => {
                return Err(Error::ResampleCapExceeded {
                    slot: format!("persona slot {slot}"),
                    cap: config.generation.resample_cap,
                })
            }
        }
    }
    write_records(out, &personas)?;
    summary.written = personas.len();
    Ok(summary)
}

/// Counts from a generation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerateSummary {
    pub emotions: Vec<String>,
    pub samples_per_emotion: usize,
    pub personas_used: usize,
    pub written: usize,
    /// Samples whose constrained retry still ran over the sentence budget.
    pub truncated: usize,
    /// Scenes the judge rejected and the sampler replaced.
    pub scene_rejected: usize,
}

/// Generate `samples_per_emotion` texts for every configured emotion.
///
/// Slot `e * samples_per_emotion + i` produces sample `s-{slot+1:06}` for
/// emotion index `e`, conditioned on persona `slot % personas.len()` and a
/// freshly sampled scenario. Slots are independent (each has its own
/// seeded stream), so bounded parallelism cannot change the output.
pub fn run_generate(
    config: &RunConfig,
    backends: &Backends,
    personas_path: &Path,
    out: &Path,
) -> Result<GenerateSummary> {
    let personas = read_records::<Persona>(personas_path, true)?.records;
    if personas.is_empty() {
        return Err(Error::InsufficientSamples {
            context: "generation personas".into(),
            needed: 1,
            found: 0,
        });
    }
    let ctx = backends.gen_context(config.generation.retry);
    let judge_model = config.judge.model(&config.generation);
    let spe = config.samples_per_emotion;
    let slots: Vec<usize> = (0..config.emotion_set.len() * spe).collect();
    let results = run_bounded(&slots, config.generation.parallelism, |&slot| {
        generate_slot(config, &ctx, judge_model, &personas, slot)
    });

    let mut samples = Vec::with_capacity(slots.len());
    let mut truncated = 0usize;
    let mut scene_rejected = 0usize;
    for result in results {
        let (sample, rejections) = result?;
        truncated += usize::from(sample.truncated);
        scene_rejected += rejections;
        samples.push(sample);
    }
    write_records(out, &samples)?;
    Ok(GenerateSummary {
        emotions: config.emotion_set.clone(),
        samples_per_emotion: spe,
        personas_used: personas.len(),
        written: samples.len(),
        truncated,
        scene_rejected,
    })
}

fn generate_slot(
    config: &RunConfig,
    ctx: &GenContext,
    judge_model: &str,
    personas: &[Persona],
    slot: usize,
) -> Result<(EmotionSample, usize)> {
    let emotion =
        EmotionCategory::new(config.emotion_set[slot / config.samples_per_emotion].clone());
    let persona = &personas[slot % personas.len()];
    let mut rng = seeded(child_seed(config.seed, "generate", slot as u64));

    let mut rejections = 0usize;
    let mut accepted = None;
    for _attempt in 0..config.generation.resample_cap {
        let scenario = sample_scenario(
            persona,
            &config.scenario.elements,
            &config.scenario.constraint,
            &mut rng,
        )?;
        if !config.judge.validate_scenes {
            accepted = Some((scenario, None));
            break;
        }
        let label = judge_plausibility(
            &JudgeSubject::PersonaInScene(persona, &scenario),
            judge_model,
            ctx,
        )?;
        if label.is_keep() {
            accepted = Some((scenario, Some(label)));
            break;
        }
        rejections += 1;
    }
    let Some((scenario, scene_label)) = accepted else {
        return Err(Error::ResampleCapExceeded {
            slot: format!("sample slot {slot} (emotion `{emotion}`)"),
            cap: config.generation.resample_cap,
        });
    };

    let req = GenerationRequest {
        persona: persona.clone(),
        scenario,
        emotion,
        model: config.generation.model.clone(),
        temperature: config.generation.temperature,
        max_sentences: config.generation.max_sentences,
    };
    let mut sample = generate_text(&req, &format!("s-{:06}", slot + 1), ctx)?;
    sample.plausibility = scene_label;
    Ok((sample, rejections))
}

/// What kind of records an embedding run reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbedInput {
    /// Generated `EmotionSample` records; the label is the emotion.
    Samples,
    /// Ingested golden records; the label is the mapped golden label.
    Golden,
}

/// Counts from an embedding run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EmbedSummary {
    pub records: usize,
    pub dim: usize,
    pub provider_tag: String,
}

/// Embed a corpus file and write the embedded records to `out`.
pub fn run_embed(
    config: &RunConfig,
    backends: &Backends,
    input: EmbedInput,
    in_path: &Path,
    out: &Path,
) -> Result<EmbedSummary> {
    let (ids, labels, texts): (Vec<String>, Vec<String>, Vec<String>) = match input {
        EmbedInput::Samples => {
            let records = read_records::<EmotionSample>(in_path, true)?.records;
            itertools_unzip3(records.into_iter().map(|r| (r.id, r.emotion.0, r.text)))
        }
        EmbedInput::Golden => {
            let records = read_records::<GoldenRecord>(in_path, true)?.records;
            itertools_unzip3(records.into_iter().map(|r| (r.id, r.label, r.text)))
        }
    };
    if texts.is_empty() {
        return Err(Error::InsufficientSamples {
            context: "embedding input".into(),
            needed: 1,
            found: 0,
        });
    }
    let vectors = embed_batch(
        &texts,
        backends.embedder.as_ref(),
        config.embedding.batch_size,
        config.embedding.parallelism,
    )?;
    let tag = backends.embedder.tag();
    let samples: Vec<EmbeddedSample> = ids
        .into_iter()
        .zip(labels)
        .zip(vectors)
        .map(|((sample_id, label), vector)| EmbeddedSample {
            sample_id,
            label: EmotionCategory::new(label),
            provider_tag: tag.clone(),
            vector: vector.values,
            extra: serde_json::Map::new(),
        })
        .collect();
    let corpus = EmbeddedCorpus::from_samples(samples)?;
    write_records(out, &corpus.samples)?;
    Ok(EmbedSummary {
        records: corpus.len(),
        dim: corpus.dim,
        provider_tag: corpus.provider_tag,
    })
}

fn itertools_unzip3<I: Iterator<Item = (String, String, String)>>(
    iter: I,
) -> (Vec<String>, Vec<String>, Vec<String>) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut c = Vec::new();
    for (x, y, z) in iter {
        a.push(x);
        b.push(y);
        c.push(z);
    }
    (a, b, c)
}

/// Read an embedded corpus file strictly.
pub fn read_embedded(path: &Path) -> Result<EmbeddedCorpus> {
    let records = read_records::<EmbeddedSample>(path, true)?.records;
    EmbeddedCorpus::from_samples(records)
}

/// Diversity metrics plus the 2-D projection table for one corpus.
pub fn run_eval_diversity(
    config: &RunConfig,
    corpus_path: &Path,
) -> Result<(DiversityReport, Vec<PcaPoint>)> {
    let corpus = read_embedded(corpus_path)?;
    let report = diversity_report(
        &corpus,
        config.metrics.k_clusters,
        child_seed(config.seed, "kmeans-diversity", 0),
        config.metrics.kmeans_max_iters,
        config.metrics.kmeans_tol,
    )?;
    let pca = pca_table(&corpus)?;
    Ok((report, pca))
}

/// Similarity metrics between a real and a synthetic corpus.
pub fn run_eval_similarity(
    config: &RunConfig,
    real_path: &Path,
    synthetic_path: &Path,
) -> Result<SimilarityReport> {
    let real = read_embedded(real_path)?;
    let synthetic = read_embedded(synthetic_path)?;
    similarity_report(
        &real,
        &synthetic,
        config.metrics.k_bins,
        config.metrics.beta,
        config.metrics.epsilon,
        child_seed(config.seed, "kmeans-bins", 0),
        config.metrics.kmeans_max_iters,
        config.metrics.kmeans_tol,
    )
}

/// Split/train/evaluate one corpus.
pub fn run_eval_classify_single(config: &RunConfig, corpus_path: &Path) -> Result<EvalReport> {
    let corpus = read_embedded(corpus_path)?;
    let seed = child_seed(config.seed, "classify", 0);
    let (train_set, test_set) = split(&corpus, &config.classify.split_spec(seed))?;
    let model = train(&train_set, &config.classify.hyperparams(seed))?;
    evaluate(&model, &test_set)
}

/// Substitution experiment: train-on-golden vs train-on-synthetic, both
/// evaluated on the identical golden test split.
pub fn run_eval_classify_pair(
    config: &RunConfig,
    golden_path: &Path,
    synthetic_path: &Path,
) -> Result<(EvalReport, EvalReport)> {
    let golden = read_embedded(golden_path)?;
    let synthetic = read_embedded(synthetic_path)?;
    let seed = child_seed(config.seed, "classify", 0);
    substitution_experiment(
        &golden,
        &synthetic,
        &config.classify.split_spec(seed),
        &config.classify.hyperparams(seed),
    )
}

/// Aggregates from a rubric-judging run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JudgeSummary {
    pub judged: usize,
    /// Judgments still unparsable after the reprompt; counted, not fatal,
    /// while the failure rate stays at or below the threshold.
    pub unparsable: usize,
    pub failure_rate: f64,
    pub threshold: f64,
    pub per_criterion_mean: BTreeMap<String, f64>,
    /// Per criterion: counts of scores 1 through 5.
    pub score_distribution: BTreeMap<String, [usize; 5]>,
}

/// Attach rubric scores to every sample in `samples_path` and write the
/// scored records to `out`.
pub fn run_judge(
    config: &RunConfig,
    backends: &Backends,
    samples_path: &Path,
    out: &Path,
) -> Result<JudgeSummary> {
    let mut samples = read_records::<EmotionSample>(samples_path, true)?.records;
    if samples.is_empty() {
        return Err(Error::InsufficientSamples {
            context: "rubric judging".into(),
            needed: 1,
            found: 0,
        });
    }
    let ctx = backends.gen_context(config.generation.retry);
    let model = config.judge.model(&config.generation);

    let mut unparsable = 0usize;
    for sample in &mut samples {
        match judge_rubric(sample, model, &ctx) {
            Ok(score) => sample.rubric = Some(score),
            Err(Error::UnparsableJudgment(_)) => unparsable += 1,
            Err(other) => return Err(other),
        }
    }
    let total = samples.len();
    let failure_rate = unparsable as f64 / total as f64;
    if failure_rate > config.judge.failure_rate_threshold {
        return Err(Error::JudgeFailureRate {
            failed: unparsable,
            total,
            threshold: config.judge.failure_rate_threshold,
        });
    }

    let mut sums = [0f64; 4];
    let mut dist = [[0usize; 5]; 4];
    let mut judged = 0usize;
    for sample in &samples {
        if let Some(score) = sample.rubric {
            judged += 1;
            for (criterion, value) in score.values().into_iter().enumerate() {
                sums[criterion] += f64::from(value);
                dist[criterion][usize::from(value) - 1] += 1;
            }
        }
    }
    let denominator = judged.max(1) as f64;
    let per_criterion_mean = RUBRIC_CRITERIA
        .iter()
        .zip(sums)
        .map(|(name, sum)| (name.to_string(), sum / denominator))
        .collect();
    let score_distribution = RUBRIC_CRITERIA
        .iter()
        .zip(dist)
        .map(|(name, counts)| (name.to_string(), counts))
        .collect();

    write_records(out, &samples)?;
    Ok(JudgeSummary {
        judged,
        unparsable,
        failure_rate,
        threshold: config.judge.failure_rate_threshold,
        per_criterion_mean,
        score_distribution,
    })
}

/// Ingest a golden CSV into a line-delimited record file.
pub fn run_ingest_golden(config: &RunConfig, csv_path: &Path, out: &Path) -> Result<IngestSummary> {
    let spec = GoldenIngestSpec::from_config(&config.golden, csv_path)?;
    let outcome = ingest_golden(&spec)?;
    write_records(out, &outcome.records)?;
    Ok(outcome.summary)
}

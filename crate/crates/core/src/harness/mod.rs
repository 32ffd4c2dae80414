//! End-to-end evaluation: corpus ingestion, per-sample dispatch, and
//! aggregation under both conventions (per-sample average and pooled
//! corpus level).
//!
//! Ground truth is parsed strictly and must validate; prediction lines are
//! parsed leniently and evaluated whenever a record could be recovered,
//! with parse/validation failures feeding the reliability metric. Samples
//! are paired by an explicit `sample_id` field, evaluated independently
//! (optionally in parallel), and reduced in sample-id order so reports are
//! byte-identical across runs and parallelism degrees.

pub mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::entity::{
    eval_humans, eval_logos, eval_objects, HumanScores, LogoScores, Matcher, MatcherConfig,
    ObjectScores,
};
use crate::judge::cache::CachedJudge;
use crate::judge::http::{HttpJudge, HttpJudgeConfig};
use crate::judge::stub::StubJudge;
use crate::judge::Judge;
use crate::kiu::{eval_media, KiuUnits, MediaScores};
use crate::ocr::{sample_metrics, OcrSampleMetrics};
use crate::schema::{
    parse_record, reliability, validate_record, AnnotationRecord, ParseMode, ParseOutcome, Role,
    Severity,
};
use crate::textmatch::MatchConfig;
use crate::EvalError;

pub use report::{render_report, EvalReport, ReportFormat};

/// Evaluation tasks, in their canonical (and report) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Objects,
    Humans,
    Logos,
    Ocr,
    Media,
    Nsfw,
    Reliability,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::Objects,
        Task::Humans,
        Task::Logos,
        Task::Ocr,
        Task::Media,
        Task::Nsfw,
        Task::Reliability,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Task::Objects => "objects",
            Task::Humans => "humans",
            Task::Logos => "logos",
            Task::Ocr => "ocr",
            Task::Media => "media",
            Task::Nsfw => "nsfw",
            Task::Reliability => "reliability",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .iter()
            .find(|t| t.name() == s.trim().to_lowercase())
            .copied()
            .ok_or_else(|| format!("unknown task {s:?}"))
    }
}

/// Which judge backend to use, if any.
#[derive(Debug, Clone, PartialEq)]
pub enum JudgeKind {
    None,
    Stub,
    Http {
        url: String,
        api_key: Option<String>,
        model: String,
    },
}

/// Judge transport settings.
#[derive(Debug, Clone)]
pub struct JudgeSettings {
    pub kind: JudgeKind,
    pub batch_size: usize,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub cache_dir: Option<PathBuf>,
}

impl Default for JudgeSettings {
    fn default() -> Self {
        JudgeSettings {
            kind: JudgeKind::Stub,
            batch_size: 16,
            max_retries: 3,
            backoff_ms: 100,
            cache_dir: None,
        }
    }
}

/// Full evaluation configuration.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub tasks: BTreeSet<Task>,
    pub matcher: MatcherConfig,
    pub match_config: MatchConfig,
    pub judge: JudgeSettings,
    pub parallelism: usize,
    pub kiu_sidecar: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            tasks: Task::ALL.into_iter().collect(),
            matcher: MatcherConfig::default(),
            match_config: MatchConfig::default(),
            judge: JudgeSettings::default(),
            parallelism: 1,
            kiu_sidecar: None,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.tasks.is_empty() {
            return Err(EvalError::Config("at least one task is required".into()));
        }
        self.match_config.validate()?;
        if self.parallelism == 0 {
            return Err(EvalError::Config("parallelism must be >= 1".into()));
        }
        if self.judge.batch_size == 0 {
            return Err(EvalError::Config("judge batch size must be >= 1".into()));
        }
        Ok(())
    }

    /// Builds the judge backend, wrapped in the on-disk cache when a cache
    /// directory is configured.
    pub fn build_judge(&self) -> Result<Option<Arc<dyn Judge>>, EvalError> {
        let base: Box<dyn Judge> = match &self.judge.kind {
            JudgeKind::None => return Ok(None),
            JudgeKind::Stub => Box::new(StubJudge::new()),
            JudgeKind::Http { url, api_key, model } => Box::new(HttpJudge::new(HttpJudgeConfig {
                url: url.clone(),
                api_key: api_key.clone(),
                model: model.clone(),
                batch_size: self.judge.batch_size,
                max_retries: self.judge.max_retries,
                initial_backoff: std::time::Duration::from_millis(self.judge.backoff_ms),
                timeout: std::time::Duration::from_secs(60),
            })?),
        };
        let judge: Arc<dyn Judge> = match &self.judge.cache_dir {
            Some(dir) => Arc::new(CachedJudge::new(base, dir)?),
            None => Arc::from(base),
        };
        Ok(Some(judge))
    }

    /// Digest of every setting that can change metric values. Parallelism,
    /// cache location and output format are excluded: they must not affect
    /// results.
    pub fn digest(&self) -> String {
        let tasks: Vec<&str> = self.tasks.iter().map(|t| t.name()).collect();
        let judge = match &self.judge.kind {
            JudgeKind::None => "none".to_string(),
            JudgeKind::Stub => "stub".to_string(),
            JudgeKind::Http { url, model, .. } => format!("http:{url}:{model}"),
        };
        let alias = self
            .matcher
            .alias_path
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "none".into());
        let sidecar = self
            .kiu_sidecar
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "none".into());
        let canonical = format!(
            "tasks={};matcher={};theta={};tau={};min_block_len={};case_sensitive={};judge={};alias={};sidecar={}",
            tasks.join(","),
            self.matcher.kind.name(),
            self.matcher.threshold,
            self.match_config.tau,
            self.match_config.min_block_len,
            self.match_config.case_sensitive,
            judge,
            alias,
            sidecar,
        );
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// One prediction line as read from the corpus, before pairing.
#[derive(Debug, Clone)]
pub struct PredLine {
    pub line_number: usize,
    pub sample_id: Option<String>,
    pub outcome: ParseOutcome,
    pub validation_errors: Vec<String>,
}

impl PredLine {
    /// Parse outcome with validation errors folded in: a prediction that
    /// parses but violates the schema invariants counts as invalid for the
    /// reliability metric.
    pub fn folded_outcome(&self) -> ParseOutcome {
        if self.validation_errors.is_empty() {
            self.outcome.clone()
        } else {
            self.outcome.clone().downgrade_invalid(self.validation_errors.clone())
        }
    }
}

/// One evaluable pair of records.
#[derive(Debug, Clone)]
pub struct PairedSample {
    pub sample_id: String,
    pub gt: AnnotationRecord,
    pub pred: AnnotationRecord,
    pub pred_strict_ok: bool,
    pub pred_lenient_ok: bool,
}

/// Ingestion output: paired samples in id order, every prediction line for
/// reliability, and human-readable warnings.
#[derive(Debug, Clone, Default)]
pub struct IngestResult {
    pub samples: Vec<PairedSample>,
    pub pred_lines: Vec<PredLine>,
    pub warnings: Vec<String>,
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.to_string()))
        .filter(|(_, line)| !line.trim().is_empty())
        .collect())
}

/// Reads and pairs the two JSONL corpora. Ground truth must parse strictly
/// and validate; both files must be free of duplicate sample ids.
pub fn ingest(gt_path: &Path, pred_path: &Path) -> Result<IngestResult, EvalError> {
    let mut warnings = Vec::new();

    let mut gt_records: BTreeMap<String, AnnotationRecord> = BTreeMap::new();
    for (lineno, line) in read_lines(gt_path)? {
        let outcome = parse_record(&line, ParseMode::Strict);
        let Some(record) = outcome.record() else {
            return Err(EvalError::Corpus(format!(
                "{}:{lineno}: ground truth does not parse strictly: {}",
                gt_path.display(),
                outcome.diagnostics().join("; ")
            )));
        };
        let errors: Vec<String> = validate_record(record, Role::GroundTruth)
            .into_iter()
            .filter(|v| v.severity == Severity::Error)
            .map(|v| v.to_string())
            .collect();
        if !errors.is_empty() {
            return Err(EvalError::Corpus(format!(
                "{}:{lineno}: ground truth fails validation: {}",
                gt_path.display(),
                errors.join("; ")
            )));
        }
        let Some(id) = record.sample_id.clone().filter(|s| !s.is_empty()) else {
            return Err(EvalError::Corpus(format!(
                "{}:{lineno}: ground truth record is missing sample_id",
                gt_path.display()
            )));
        };
        if gt_records.insert(id.clone(), record.clone()).is_some() {
            return Err(EvalError::Corpus(format!(
                "{}:{lineno}: duplicate sample_id {id:?}",
                gt_path.display()
            )));
        }
    }

    let mut pred_lines = Vec::new();
    let mut pred_by_id: BTreeMap<String, usize> = BTreeMap::new();
    for (lineno, line) in read_lines(pred_path)? {
        let outcome = parse_record(&line, ParseMode::Lenient);
        let sample_id = outcome
            .record()
            .and_then(|r| r.sample_id.clone())
            .filter(|s| !s.is_empty());
        let validation_errors = match outcome.record() {
            Some(record) => validate_record(record, Role::Prediction)
                .into_iter()
                .filter(|v| v.severity == Severity::Error)
                .map(|v| v.to_string())
                .collect(),
            None => Vec::new(),
        };
        match &sample_id {
            Some(id) => {
                if pred_by_id.insert(id.clone(), pred_lines.len()).is_some() {
                    return Err(EvalError::Corpus(format!(
                        "{}:{lineno}: duplicate sample_id {id:?}",
                        pred_path.display()
                    )));
                }
            }
            None => {
                if outcome.record().is_some() {
                    warnings.push(format!(
                        "{}:{lineno}: prediction record has no sample_id; counted for reliability only",
                        pred_path.display()
                    ));
                } else {
                    warnings.push(format!(
                        "{}:{lineno}: prediction line is unparseable; counted for reliability only",
                        pred_path.display()
                    ));
                }
            }
        }
        pred_lines.push(PredLine {
            line_number: lineno,
            sample_id,
            outcome,
            validation_errors,
        });
    }

    let mut samples = Vec::new();
    for (id, gt) in &gt_records {
        match pred_by_id.get(id) {
            Some(&idx) => {
                let line = &pred_lines[idx];
                let folded = line.folded_outcome();
                let pred = line.outcome.record().expect("paired line has a record").clone();
                if pred.media_kind != gt.media_kind {
                    warnings.push(format!(
                        "sample {id:?}: media_kind mismatch (prediction says {:?}); using ground truth",
                        pred.media_kind
                    ));
                }
                samples.push(PairedSample {
                    sample_id: id.clone(),
                    gt: gt.clone(),
                    pred,
                    pred_strict_ok: folded.status() == crate::schema::ParseStatus::Valid,
                    pred_lenient_ok: folded.is_usable(),
                });
            }
            None => warnings.push(format!("sample {id:?} has no prediction; skipped")),
        }
    }
    let paired_ids: BTreeSet<&String> = samples.iter().map(|s| &s.sample_id).collect();
    for id in pred_by_id.keys() {
        if !paired_ids.contains(id) {
            warnings.push(format!("prediction {id:?} has no ground truth; skipped"));
        }
    }

    Ok(IngestResult {
        samples,
        pred_lines,
        warnings,
    })
}

/// Loads the optional pre-extracted description units sidecar.
pub fn load_kiu_sidecar(path: &Path) -> Result<BTreeMap<String, KiuUnits>, EvalError> {
    #[derive(Deserialize)]
    struct Line {
        sample_id: String,
        #[serde(default)]
        pred_units: Vec<String>,
        #[serde(default)]
        gt_units: Vec<String>,
    }
    let mut map = BTreeMap::new();
    for (lineno, line) in read_lines(path)? {
        let parsed: Line = serde_json::from_str(&line).map_err(|e| {
            EvalError::Corpus(format!("{}:{lineno}: bad sidecar line: {e}", path.display()))
        })?;
        if map
            .insert(
                parsed.sample_id.clone(),
                KiuUnits {
                    pred_units: parsed.pred_units,
                    gt_units: parsed.gt_units,
                },
            )
            .is_some()
        {
            return Err(EvalError::Corpus(format!(
                "{}:{lineno}: duplicate sidecar sample_id {:?}",
                path.display(),
                parsed.sample_id
            )));
        }
    }
    Ok(map)
}

/// Reliability booleans for one paired sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReliabilityRow {
    pub strict_ok: bool,
    pub lenient_ok: bool,
}

/// Per-sample task metrics; tasks not configured (or not applicable) stay
/// absent. `judge_failed` marks samples excluded from aggregates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleMetrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objects: Option<ObjectScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub humans: Option<HumanScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logos: Option<LogoScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ocr: Option<OcrSampleMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub media: Option<MediaScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nsfw_agreement: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reliability: Option<ReliabilityRow>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub judge_failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_failure: Option<String>,
}

fn eval_one(
    sample: &PairedSample,
    config: &EvalConfig,
    matcher: &Matcher,
    judge: Option<&dyn Judge>,
    units: Option<&KiuUnits>,
) -> Result<SampleMetrics, EvalError> {
    let mut metrics = SampleMetrics::default();
    for task in &config.tasks {
        match task {
            Task::Objects => {
                metrics.objects = Some(eval_objects(&sample.pred, &sample.gt, matcher)?);
            }
            Task::Humans => {
                metrics.humans = Some(eval_humans(&sample.pred, &sample.gt, matcher, judge)?);
            }
            Task::Logos => {
                metrics.logos = Some(eval_logos(&sample.pred, &sample.gt, matcher)?);
            }
            Task::Ocr => {
                let pred_texts: Vec<String> =
                    sample.pred.ocr.iter().map(|b| b.text.clone()).collect();
                let gt_texts: Vec<String> = sample.gt.ocr.iter().map(|b| b.text.clone()).collect();
                let weave = crate::blockweaver::weave(&pred_texts, &gt_texts, &config.match_config);
                metrics.ocr = Some(sample_metrics(&weave, &config.match_config));
            }
            Task::Media => {
                metrics.media = Some(eval_media(
                    &sample.pred.media,
                    &sample.gt.media,
                    matcher,
                    judge,
                    units,
                )?);
            }
            Task::Nsfw => {
                if let (Some(p), Some(g)) = (sample.pred.media.nsfw, sample.gt.media.nsfw) {
                    metrics.nsfw_agreement = Some(p == g);
                }
            }
            Task::Reliability => {
                metrics.reliability = Some(ReliabilityRow {
                    strict_ok: sample.pred_strict_ok,
                    lenient_ok: sample.pred_lenient_ok,
                });
            }
        }
    }
    Ok(metrics)
}

/// Runs every configured task over the ingested samples and aggregates.
///
/// Samples hit by judge errors are excluded from aggregates, listed in the
/// report, and — above a 10% failure share — mark the whole run failed
/// (the report is still produced).
pub fn run_eval(config: &EvalConfig, ingested: &IngestResult) -> Result<EvalReport, EvalError> {
    config.validate()?;
    if ingested.samples.is_empty() {
        return Err(EvalError::NoSamples("no samples".into()));
    }
    let judge = config.build_judge()?;
    let matcher = Matcher::build(&config.matcher, judge.clone())?;
    let sidecar = match &config.kiu_sidecar {
        Some(path) => load_kiu_sidecar(path)?,
        None => BTreeMap::new(),
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| EvalError::Config(format!("cannot build thread pool: {e}")))?;

    let results: Vec<(String, SampleMetrics)> = pool.install(|| {
        use rayon::prelude::*;
        ingested
            .samples
            .par_iter()
            .map(|sample| {
                let units = sidecar.get(&sample.sample_id);
                let metrics = match eval_one(sample, config, &matcher, judge.as_deref(), units) {
                    Ok(metrics) => metrics,
                    // Judge trouble fails this sample only; anything else is
                    // a run-level defect.
                    Err(EvalError::Judge(e)) => SampleMetrics {
                        judge_failed: true,
                        judge_failure: Some(e.to_string()),
                        ..SampleMetrics::default()
                    },
                    Err(other) => return Err(other),
                };
                Ok((sample.sample_id.clone(), metrics))
            })
            .collect::<Result<Vec<_>, EvalError>>()
    })?;

    let folded: Vec<ParseOutcome> = ingested.pred_lines.iter().map(|l| l.folded_outcome()).collect();
    let corpus_reliability = if config.tasks.contains(&Task::Reliability) {
        Some(reliability(&folded)?)
    } else {
        None
    };

    let judge_failed_samples: Vec<String> = results
        .iter()
        .filter(|(_, m)| m.judge_failed)
        .map(|(id, _)| id.clone())
        .collect();
    let run_failed =
        judge_failed_samples.len() as f64 > 0.10 * ingested.samples.len() as f64;

    Ok(report::build_report(
        config,
        judge.as_deref(),
        results,
        corpus_reliability,
        judge_failed_samples,
        ingested.warnings.clone(),
        run_failed,
    ))
}

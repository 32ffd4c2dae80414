//! Report assembly and rendering (JSON, CSV, Markdown).
//!
//! Every corpus metric is reported under two conventions side by side:
//! *Per-Sample Average* (arithmetic mean of per-sample values, vacuous
//! samples excluded) and *Corpus-Level* (recomputed from pooled counts).
//! Rendering is deterministic: identical inputs and config produce
//! byte-identical output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EvalConfig, SampleMetrics, Task};
use crate::entity::{detection_from_counts, DetectionScores};
use crate::judge::Judge;
use crate::ocr::OcrCorpusMetrics;
use crate::schema::ReliabilityScore;
use crate::EvalError;

/// Output encodings for a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

/// Where the numbers came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_digest: String,
    pub judge_model: Option<String>,
    pub matcher: String,
    pub tasks: Vec<String>,
}

/// Detection metrics under one aggregation convention.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spatial_jaccard: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temporal_jaccard: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionAggregate {
    pub per_sample_average: DetectionSummary,
    pub corpus_level: DetectionSummary,
    pub sample_count: usize,
    pub vacuous_count: usize,
}

/// Human attribute means. Judge-scored fields stay absent without a judge.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HumanAttrSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activity_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description_score: Option<f64>,
    pub age_accuracy: f64,
    pub expression_accuracy: f64,
    pub face_accuracy: f64,
    pub spatial_jaccard: f64,
    pub temporal_jaccard: f64,
    pub pair_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HumanAggregate {
    pub detection: DetectionAggregate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attrs_per_sample_average: Option<HumanAttrSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attrs_corpus_level: Option<HumanAttrSummary>,
}

/// Media metrics under one convention.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MediaSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quality_match: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub colors_jaccard: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub camera_perspective_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completeness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub faithfulness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description_f1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MediaAggregate {
    pub per_sample_average: MediaSummary,
    pub corpus_level: MediaSummary,
    pub sample_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NsfwAggregate {
    pub accuracy: f64,
    pub agreements: usize,
    pub evaluated: usize,
}

/// Corpus-level sections, one per evaluated task.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorpusMetrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objects: Option<DetectionAggregate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub humans: Option<HumanAggregate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logos: Option<DetectionAggregate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ocr: Option<OcrCorpusMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub media: Option<MediaAggregate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nsfw: Option<NsfwAggregate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reliability: Option<ReliabilityScore>,
}

/// One row of the headline table.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reliability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub human_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logo_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ocr_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub media_f1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub per_sample_average: SummaryRow,
    pub corpus_level: SummaryRow,
}

/// The full evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub provenance: Provenance,
    pub summary: Summary,
    pub corpus: CorpusMetrics,
    pub per_sample: BTreeMap<String, SampleMetrics>,
    pub judge_failed_samples: Vec<String>,
    pub warnings: Vec<String>,
    pub run_failed: bool,
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn mean_of<T>(items: &[&T], get: impl Fn(&T) -> Option<f64>) -> Option<f64> {
    let values: Vec<f64> = items.iter().filter_map(|x| get(x)).collect();
    mean(&values)
}

struct DetectionInputs<'a> {
    // per-sample detection scores plus pair-weighted jaccard means
    detection: Vec<&'a DetectionScores>,
    spatial: Vec<(f64, usize)>,
    temporal: Vec<(f64, usize)>,
    // pooled counts: tp for precision, fp, tp for recall, fn
    counts: (usize, usize, usize, usize),
}

fn aggregate_detection(inputs: &DetectionInputs<'_>) -> DetectionAggregate {
    let non_vacuous: Vec<&&DetectionScores> =
        inputs.detection.iter().filter(|d| !d.vacuous).collect();
    let psa_precision = mean(&non_vacuous.iter().map(|d| d.precision).collect::<Vec<_>>());
    let psa_recall = mean(&non_vacuous.iter().map(|d| d.recall).collect::<Vec<_>>());
    let psa_f1 = mean(&non_vacuous.iter().map(|d| d.f1).collect::<Vec<_>>());
    let psa_spatial = mean(&inputs.spatial.iter().map(|(j, _)| *j).collect::<Vec<_>>());
    let psa_temporal = mean(&inputs.temporal.iter().map(|(j, _)| *j).collect::<Vec<_>>());

    let (tp_p, fp, tp_r, fn_) = inputs.counts;
    let pooled = detection_from_counts(tp_p, fp, tp_r, fn_);
    let weighted = |pairs: &[(f64, usize)]| {
        let total: usize = pairs.iter().map(|(_, n)| n).sum();
        (total > 0).then(|| {
            pairs.iter().map(|(j, n)| j * *n as f64).sum::<f64>() / total as f64
        })
    };

    DetectionAggregate {
        per_sample_average: DetectionSummary {
            precision: psa_precision.unwrap_or(0.0),
            recall: psa_recall.unwrap_or(0.0),
            f1: psa_f1.unwrap_or(0.0),
            spatial_jaccard: psa_spatial,
            temporal_jaccard: psa_temporal,
        },
        corpus_level: DetectionSummary {
            precision: pooled.precision,
            recall: pooled.recall,
            f1: pooled.f1,
            spatial_jaccard: weighted(&inputs.spatial),
            temporal_jaccard: weighted(&inputs.temporal),
        },
        sample_count: inputs.detection.len(),
        vacuous_count: inputs.detection.len() - non_vacuous.len(),
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn build_report(
    config: &EvalConfig,
    judge: Option<&dyn Judge>,
    results: Vec<(String, SampleMetrics)>,
    corpus_reliability: Option<ReliabilityScore>,
    judge_failed_samples: Vec<String>,
    warnings: Vec<String>,
    run_failed: bool,
) -> EvalReport {
    let ok: Vec<&SampleMetrics> = results
        .iter()
        .filter(|(_, m)| !m.judge_failed)
        .map(|(_, m)| m)
        .collect();

    let mut corpus = CorpusMetrics::default();

    if config.tasks.contains(&Task::Objects) {
        let scores: Vec<_> = ok.iter().filter_map(|m| m.objects.as_ref()).collect();
        if !scores.is_empty() && !scores.iter().all(|s| s.detection.vacuous) {
            let inputs = DetectionInputs {
                detection: scores.iter().map(|s| &s.detection).collect(),
                spatial: scores
                    .iter()
                    .filter_map(|s| {
                        s.localization
                            .spatial_jaccard
                            .map(|j| (j, s.localization.pair_count))
                    })
                    .collect(),
                temporal: scores
                    .iter()
                    .filter_map(|s| {
                        s.localization
                            .temporal_jaccard
                            .map(|j| (j, s.localization.pair_count))
                    })
                    .collect(),
                counts: scores.iter().fold((0, 0, 0, 0), |acc, s| {
                    (
                        acc.0 + s.matched + s.pred_activity_credit,
                        acc.1 + s.pred_total - s.matched - s.pred_activity_credit,
                        acc.2 + s.matched + s.gt_activity_credit,
                        acc.3 + s.gt_total - s.matched - s.gt_activity_credit,
                    )
                }),
            };
            corpus.objects = Some(aggregate_detection(&inputs));
        }
    }

    if config.tasks.contains(&Task::Humans) {
        let scores: Vec<_> = ok.iter().filter_map(|m| m.humans.as_ref()).collect();
        if !scores.is_empty() && !scores.iter().all(|s| s.detection.vacuous) {
            let inputs = DetectionInputs {
                detection: scores.iter().map(|s| &s.detection).collect(),
                spatial: scores
                    .iter()
                    .filter_map(|s| s.attrs.as_ref().map(|a| (a.spatial_jaccard, a.pair_count)))
                    .collect(),
                temporal: scores
                    .iter()
                    .filter_map(|s| s.attrs.as_ref().map(|a| (a.temporal_jaccard, a.pair_count)))
                    .collect(),
                counts: scores.iter().fold((0, 0, 0, 0), |acc, s| {
                    (
                        acc.0 + s.detection.tp,
                        acc.1 + s.detection.fp,
                        acc.2 + s.detection.tp,
                        acc.3 + s.detection.fn_,
                    )
                }),
            };
            let detection = aggregate_detection(&inputs);

            let attrs: Vec<_> = scores.iter().filter_map(|s| s.attrs.as_ref()).collect();
            let (attrs_psa, attrs_corpus) = if attrs.is_empty() {
                (None, None)
            } else {
                let psa = HumanAttrSummary {
                    activity_score: mean_of(&attrs, |a| a.activity_score),
                    description_score: mean_of(&attrs, |a| a.description_score),
                    age_accuracy: mean_of(&attrs, |a| Some(a.age_accuracy)).unwrap_or(0.0),
                    expression_accuracy: mean_of(&attrs, |a| Some(a.expression_accuracy))
                        .unwrap_or(0.0),
                    face_accuracy: mean_of(&attrs, |a| Some(a.face_accuracy)).unwrap_or(0.0),
                    spatial_jaccard: mean_of(&attrs, |a| Some(a.spatial_jaccard)).unwrap_or(0.0),
                    temporal_jaccard: mean_of(&attrs, |a| Some(a.temporal_jaccard)).unwrap_or(0.0),
                    pair_count: attrs.iter().map(|a| a.pair_count).sum(),
                };
                let total_pairs: usize = attrs.iter().map(|a| a.pair_count).sum();
                let wmean = |get: &dyn Fn(&crate::entity::HumanAttrScores) -> Option<f64>| {
                    let weighted: Vec<(f64, usize)> = attrs
                        .iter()
                        .filter_map(|a| get(a).map(|v| (v, a.pair_count)))
                        .collect();
                    let n: usize = weighted.iter().map(|(_, c)| c).sum();
                    (n > 0).then(|| weighted.iter().map(|(v, c)| v * *c as f64).sum::<f64>() / n as f64)
                };
                let pooled = HumanAttrSummary {
                    activity_score: wmean(&|a| a.activity_score),
                    description_score: wmean(&|a| a.description_score),
                    age_accuracy: wmean(&|a| Some(a.age_accuracy)).unwrap_or(0.0),
                    expression_accuracy: wmean(&|a| Some(a.expression_accuracy)).unwrap_or(0.0),
                    face_accuracy: wmean(&|a| Some(a.face_accuracy)).unwrap_or(0.0),
                    spatial_jaccard: wmean(&|a| Some(a.spatial_jaccard)).unwrap_or(0.0),
                    temporal_jaccard: wmean(&|a| Some(a.temporal_jaccard)).unwrap_or(0.0),
                    pair_count: total_pairs,
                };
                (Some(psa), Some(pooled))
            };
            corpus.humans = Some(HumanAggregate {
                detection,
                attrs_per_sample_average: attrs_psa,
                attrs_corpus_level: attrs_corpus,
            });
        }
    }

    if config.tasks.contains(&Task::Logos) {
        let scores: Vec<_> = ok.iter().filter_map(|m| m.logos.as_ref()).collect();
        if !scores.is_empty() && !scores.iter().all(|s| s.detection.vacuous) {
            let inputs = DetectionInputs {
                detection: scores.iter().map(|s| &s.detection).collect(),
                spatial: scores
                    .iter()
                    .filter_map(|s| {
                        s.localization
                            .spatial_jaccard
                            .map(|j| (j, s.localization.pair_count))
                    })
                    .collect(),
                temporal: scores
                    .iter()
                    .filter_map(|s| {
                        s.localization
                            .temporal_jaccard
                            .map(|j| (j, s.localization.pair_count))
                    })
                    .collect(),
                counts: scores.iter().fold((0, 0, 0, 0), |acc, s| {
                    (
                        acc.0 + s.detection.tp,
                        acc.1 + s.detection.fp,
                        acc.2 + s.detection.tp,
                        acc.3 + s.detection.fn_,
                    )
                }),
            };
            corpus.logos = Some(aggregate_detection(&inputs));
        }
    }

    if config.tasks.contains(&Task::Ocr) {
        let samples: Vec<_> = ok.iter().filter_map(|m| m.ocr.clone()).collect();
        if !samples.is_empty() {
            corpus.ocr = crate::ocr::corpus_aggregate(&samples).ok();
        }
    }

    if config.tasks.contains(&Task::Media) {
        let scores: Vec<_> = ok.iter().filter_map(|m| m.media.as_ref()).collect();
        if !scores.is_empty() {
            let psa = MediaSummary {
                quality_match: mean_of(&scores, |s| s.quality_match),
                colors_jaccard: mean_of(&scores, |s| s.colors_jaccard),
                scene_score: mean_of(&scores, |s| s.scene_score),
                camera_perspective_score: mean_of(&scores, |s| s.camera_perspective_score),
                completeness: mean_of(&scores, |s| s.description.map(|d| d.completeness)),
                faithfulness: mean_of(&scores, |s| s.description.map(|d| d.faithfulness)),
                description_f1: mean_of(&scores, |s| s.description_f1),
            };
            let kiu: Vec<_> = scores.iter().filter_map(|s| s.description).collect();
            let gt_total: usize = kiu.iter().map(|d| d.gt_total).sum();
            let gt_matched: usize = kiu.iter().map(|d| d.gt_matched).sum();
            let pred_total: usize = kiu.iter().map(|d| d.pred_total).sum();
            let pred_matched: usize = kiu.iter().map(|d| d.pred_matched).sum();
            let completeness = (gt_total > 0).then(|| gt_matched as f64 / gt_total as f64);
            let faithfulness = (pred_total > 0).then(|| pred_matched as f64 / pred_total as f64);
            let description_f1 = match (completeness, faithfulness) {
                (Some(c), Some(f)) if c + f > 0.0 => Some(2.0 * c * f / (c + f)),
                (Some(_), Some(_)) => Some(0.0),
                _ => None,
            };
            let corpus_level = MediaSummary {
                quality_match: psa.quality_match,
                colors_jaccard: psa.colors_jaccard,
                scene_score: psa.scene_score,
                camera_perspective_score: psa.camera_perspective_score,
                completeness,
                faithfulness,
                description_f1,
            };
            corpus.media = Some(MediaAggregate {
                per_sample_average: psa,
                corpus_level,
                sample_count: scores.len(),
            });
        }
    }

    if config.tasks.contains(&Task::Nsfw) {
        let flags: Vec<bool> = ok.iter().filter_map(|m| m.nsfw_agreement).collect();
        if !flags.is_empty() {
            let agreements = flags.iter().filter(|&&b| b).count();
            corpus.nsfw = Some(NsfwAggregate {
                accuracy: agreements as f64 / flags.len() as f64,
                agreements,
                evaluated: flags.len(),
            });
        }
    }

    corpus.reliability = corpus_reliability;

    let summary = Summary {
        per_sample_average: SummaryRow {
            reliability: corpus.reliability.map(|r| r.lenient_rate),
            object_f1: corpus.objects.map(|o| o.per_sample_average.f1),
            human_f1: corpus.humans.map(|h| h.detection.per_sample_average.f1),
            logo_f1: corpus.logos.map(|l| l.per_sample_average.f1),
            ocr_f1: corpus.ocr.as_ref().map(|o| o.per_sample_average.char_f1),
            media_f1: corpus.media.and_then(|m| m.per_sample_average.description_f1),
        },
        corpus_level: SummaryRow {
            reliability: corpus.reliability.map(|r| r.lenient_rate),
            object_f1: corpus.objects.map(|o| o.corpus_level.f1),
            human_f1: corpus.humans.map(|h| h.detection.corpus_level.f1),
            logo_f1: corpus.logos.map(|l| l.corpus_level.f1),
            ocr_f1: corpus.ocr.as_ref().map(|o| o.corpus_level.char_f1),
            media_f1: corpus.media.and_then(|m| m.corpus_level.description_f1),
        },
    };

    EvalReport {
        provenance: Provenance {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: config.digest(),
            judge_model: judge.map(|j| j.model_id().to_string()),
            matcher: config.matcher.kind.name().to_string(),
            tasks: config.tasks.iter().map(|t| t.name().to_string()).collect(),
        },
        summary,
        corpus,
        per_sample: results.into_iter().collect(),
        judge_failed_samples,
        warnings,
        run_failed,
    }
}

/// Serializes a report. JSON is canonical and reload-able; CSV carries one
/// row per (sample, task); Markdown mirrors the benchmark table layout.
pub fn render_report(report: &EvalReport, format: ReportFormat) -> Result<Vec<u8>, EvalError> {
    match format {
        ReportFormat::Json => {
            let mut bytes = serde_json::to_vec_pretty(report)
                .map_err(|e| EvalError::Config(format!("report serialization failed: {e}")))?;
            bytes.push(b'\n');
            Ok(bytes)
        }
        ReportFormat::Csv => Ok(render_csv(report).into_bytes()),
        ReportFormat::Markdown => Ok(render_markdown(report).into_bytes()),
    }
}

fn fmt_opt(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => String::new(),
    }
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn render_csv(report: &EvalReport) -> String {
    let mut out = String::from(
        "sample_id,task,score,precision,recall,cer,wer,completeness,faithfulness,spatial_jaccard,temporal_jaccard,flags\n",
    );
    let tasks: Vec<Task> = report
        .provenance
        .tasks
        .iter()
        .filter_map(|t| t.parse().ok())
        .collect();
    for (id, metrics) in &report.per_sample {
        for task in &tasks {
            let mut row: Vec<String> = vec![csv_escape(id), task.name().to_string()];
            let mut score = None;
            let mut precision = None;
            let mut recall = None;
            let mut cer = None;
            let mut wer = None;
            let mut completeness = None;
            let mut faithfulness = None;
            let mut spatial = None;
            let mut temporal = None;
            let mut flags: Vec<&str> = Vec::new();
            if metrics.judge_failed {
                flags.push("judge_failed");
            } else {
                match task {
                    Task::Objects => {
                        if let Some(s) = &metrics.objects {
                            score = Some(s.detection.f1);
                            precision = Some(s.detection.precision);
                            recall = Some(s.detection.recall);
                            spatial = s.localization.spatial_jaccard;
                            temporal = s.localization.temporal_jaccard;
                            if s.detection.vacuous {
                                flags.push("vacuous");
                            }
                        }
                    }
                    Task::Humans => {
                        if let Some(s) = &metrics.humans {
                            score = Some(s.detection.f1);
                            precision = Some(s.detection.precision);
                            recall = Some(s.detection.recall);
                            if let Some(a) = &s.attrs {
                                spatial = Some(a.spatial_jaccard);
                                temporal = Some(a.temporal_jaccard);
                            }
                            if s.detection.vacuous {
                                flags.push("vacuous");
                            }
                        }
                    }
                    Task::Logos => {
                        if let Some(s) = &metrics.logos {
                            score = Some(s.detection.f1);
                            precision = Some(s.detection.precision);
                            recall = Some(s.detection.recall);
                            spatial = s.localization.spatial_jaccard;
                            temporal = s.localization.temporal_jaccard;
                            if s.detection.vacuous {
                                flags.push("vacuous");
                            }
                        }
                    }
                    Task::Ocr => {
                        if let Some(s) = &metrics.ocr {
                            score = Some(s.char_f1);
                            precision = Some(s.char_precision);
                            recall = Some(s.char_recall);
                            cer = s.cer;
                            wer = s.wer;
                            if s.vacuous {
                                flags.push("vacuous");
                            }
                            if s.cer.is_none() {
                                flags.push("cer_undefined");
                            }
                        }
                    }
                    Task::Media => {
                        if let Some(s) = &metrics.media {
                            score = s.description_f1;
                            completeness = s.description.map(|d| d.completeness);
                            faithfulness = s.description.map(|d| d.faithfulness);
                            if s.description.map(|d| d.vacuous()).unwrap_or(false) {
                                flags.push("vacuous");
                            }
                        }
                    }
                    Task::Nsfw => {
                        score = metrics.nsfw_agreement.map(f64::from);
                    }
                    Task::Reliability => {
                        if let Some(r) = &metrics.reliability {
                            score = Some(f64::from(r.lenient_ok));
                            if !r.strict_ok && r.lenient_ok {
                                flags.push("repaired");
                            }
                        }
                    }
                }
            }
            for value in [
                score, precision, recall, cer, wer, completeness, faithfulness, spatial, temporal,
            ] {
                row.push(fmt_opt(value));
            }
            row.push(flags.join(";"));
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

fn fmt_md(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => "-".to_string(),
    }
}

fn render_markdown(report: &EvalReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    out.push_str("# Evaluation Report\n\n");
    let p = &report.provenance;
    let _ = writeln!(out, "- Tool version: {}", p.tool_version);
    let _ = writeln!(out, "- Config digest: {}", p.config_digest);
    let _ = writeln!(
        out,
        "- Judge model: {}",
        p.judge_model.as_deref().unwrap_or("none")
    );
    let _ = writeln!(out, "- Matcher: {}", p.matcher);
    let _ = writeln!(out, "- Tasks: {}", p.tasks.join(", "));
    let _ = writeln!(
        out,
        "- Samples: {} (judge-failed: {})",
        report.per_sample.len(),
        report.judge_failed_samples.len()
    );
    if report.run_failed {
        out.push_str("- **Run marked failed: judge failures exceed 10% of samples**\n");
    }
    out.push_str("\n## Summary\n\n");
    out.push_str(
        "| Aggregation | Reliability | Object F1 | Human F1 | Logo F1 | OCR F1 | Media F1 |\n",
    );
    out.push_str("|---|---|---|---|---|---|---|\n");
    for (label, row) in [
        ("Per-Sample Average", &report.summary.per_sample_average),
        ("Corpus-Level", &report.summary.corpus_level),
    ] {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            label,
            fmt_md(row.reliability),
            fmt_md(row.object_f1),
            fmt_md(row.human_f1),
            fmt_md(row.logo_f1),
            fmt_md(row.ocr_f1),
            fmt_md(row.media_f1),
        );
    }

    let detection_section = |out: &mut String, title: &str, agg: &DetectionAggregate| {
        let _ = writeln!(out, "\n## {title}\n");
        out.push_str("| Aggregation | Precision | Recall | F1 | Spatial Jaccard | Temporal Jaccard |\n");
        out.push_str("|---|---|---|---|---|---|\n");
        for (label, row) in [
            ("Per-Sample Average", &agg.per_sample_average),
            ("Corpus-Level", &agg.corpus_level),
        ] {
            let _ = writeln!(
                out,
                "| {} | {:.4} | {:.4} | {:.4} | {} | {} |",
                label,
                row.precision,
                row.recall,
                row.f1,
                fmt_md(row.spatial_jaccard),
                fmt_md(row.temporal_jaccard),
            );
        }
        let _ = writeln!(
            out,
            "\nSamples: {} ({} vacuous)",
            agg.sample_count, agg.vacuous_count
        );
    };

    if let Some(agg) = &report.corpus.objects {
        detection_section(&mut out, "Objects", agg);
    }
    if let Some(agg) = &report.corpus.humans {
        detection_section(&mut out, "Humans", &agg.detection);
        if let (Some(psa), Some(pooled)) =
            (&agg.attrs_per_sample_average, &agg.attrs_corpus_level)
        {
            out.push_str("\n### Human Attributes\n\n");
            out.push_str("| Aggregation | Activity | Description | Age | Expression | Face | Spatial Jaccard | Temporal Jaccard |\n");
            out.push_str("|---|---|---|---|---|---|---|---|\n");
            for (label, a) in [("Per-Sample Average", psa), ("Corpus-Level", pooled)] {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} |",
                    label,
                    fmt_md(a.activity_score),
                    fmt_md(a.description_score),
                    a.age_accuracy,
                    a.expression_accuracy,
                    a.face_accuracy,
                    a.spatial_jaccard,
                    a.temporal_jaccard,
                );
            }
        }
    }
    if let Some(agg) = &report.corpus.logos {
        detection_section(&mut out, "Logos", agg);
    }
    if let Some(agg) = &report.corpus.ocr {
        out.push_str("\n## OCR\n\n");
        out.push_str("| Aggregation | CER | WER | Char F1 | Word F1 |\n");
        out.push_str("|---|---|---|---|---|\n");
        for (label, m) in [
            ("Per-Sample Average", &agg.per_sample_average),
            ("Corpus-Level", &agg.corpus_level),
        ] {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {:.4} | {:.4} |",
                label,
                fmt_md(m.cer),
                fmt_md(m.wer),
                m.char_f1,
                m.word_f1,
            );
        }
        let _ = writeln!(
            out,
            "\nSamples: {} ({} vacuous)",
            agg.sample_count, agg.vacuous_count
        );
    }
    if let Some(agg) = &report.corpus.media {
        out.push_str("\n## Media\n\n");
        out.push_str("| Aggregation | Quality | Colors Jaccard | Camera Perspective | Scene | Completeness | Faithfulness | Description F1 |\n");
        out.push_str("|---|---|---|---|---|---|---|---|\n");
        for (label, m) in [
            ("Per-Sample Average", &agg.per_sample_average),
            ("Corpus-Level", &agg.corpus_level),
        ] {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                label,
                fmt_md(m.quality_match),
                fmt_md(m.colors_jaccard),
                fmt_md(m.camera_perspective_score),
                fmt_md(m.scene_score),
                fmt_md(m.completeness),
                fmt_md(m.faithfulness),
                fmt_md(m.description_f1),
            );
        }
    }
    if let Some(agg) = &report.corpus.nsfw {
        out.push_str("\n## NSFW\n\n");
        let _ = writeln!(
            out,
            "Accuracy: {:.4} ({} of {} samples agree)",
            agg.accuracy, agg.agreements, agg.evaluated
        );
    }
    if let Some(r) = &report.corpus.reliability {
        out.push_str("\n## Reliability\n\n");
        out.push_str("| Rate | Value |\n|---|---|\n");
        let _ = writeln!(out, "| Strict | {:.4} |", r.strict_rate);
        let _ = writeln!(out, "| Lenient | {:.4} |", r.lenient_rate);
        let _ = writeln!(
            out,
            "\nOutcomes: {} valid, {} repaired, {} invalid of {} lines",
            r.valid, r.repaired, r.invalid, r.total
        );
    }
    if !report.judge_failed_samples.is_empty() {
        out.push_str("\n## Judge Failures\n\n");
        for id in &report.judge_failed_samples {
            let _ = writeln!(out, "- {id}");
        }
    }
    if !report.warnings.is_empty() {
        out.push_str("\n## Warnings\n\n");
        for w in &report.warnings {
            let _ = writeln!(out, "- {w}");
        }
    }
    out
}

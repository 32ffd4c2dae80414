//! Semantic entity matching and detection metrics for objects, humans and
//! logos.
//!
//! Matching is pluggable: deterministic matchers (normalized equality,
//! token Jaccard, alias tables) keep the pipeline testable offline, while
//! the judge matcher delegates verdicts to an LLM service. Assignment is
//! greedy one-to-one, highest score first, with all ties broken toward
//! lower indices so results are reproducible.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::grid::{GridSet, TemporalSet};
use crate::judge::{Judge, JudgeAnswer, JudgeItem, JudgeRequest, JudgeTask};
use crate::schema::AnnotationRecord;
use crate::textmatch::{fold_text, token_jaccard};
use crate::EvalError;

/// Which scoring backend compares entity texts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatcherKind {
    ExactNormalized,
    TokenJaccard,
    AliasTable,
    Judge,
}

impl MatcherKind {
    pub fn name(&self) -> &'static str {
        match self {
            MatcherKind::ExactNormalized => "exact_normalized",
            MatcherKind::TokenJaccard => "token_jaccard",
            MatcherKind::AliasTable => "alias_table",
            MatcherKind::Judge => "judge",
        }
    }
}

/// Matcher selection plus the score threshold θ a pair must reach to count
/// as matched.
#[derive(Debug, Clone)]
pub struct MatcherConfig {
    pub kind: MatcherKind,
    pub threshold: f64,
    pub alias_path: Option<PathBuf>,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig {
            kind: MatcherKind::ExactNormalized,
            threshold: 0.5,
            alias_path: None,
        }
    }
}

/// Groups of equivalent names; the first entry of each line is canonical.
#[derive(Debug, Clone, Default)]
pub struct AliasTable {
    groups: Vec<BTreeSet<String>>,
}

impl AliasTable {
    /// Loads a text file with one comma-separated group per line. Blank
    /// lines and `#` comments are skipped. Missing or unreadable files are
    /// configuration errors.
    pub fn load(path: &Path) -> Result<AliasTable, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            EvalError::Config(format!("cannot read alias table {}: {e}", path.display()))
        })?;
        Self::parse(&text)
            .map_err(|e| EvalError::Config(format!("alias table {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<AliasTable, String> {
        let mut groups = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let group: BTreeSet<String> = line
                .split(',')
                .map(fold_text)
                .filter(|s| !s.is_empty())
                .collect();
            if group.len() < 2 {
                return Err(format!(
                    "line {}: an alias group needs at least two variants",
                    lineno + 1
                ));
            }
            groups.push(group);
        }
        Ok(AliasTable { groups })
    }

    fn same_group(&self, a: &str, b: &str) -> bool {
        self.groups
            .iter()
            .any(|g| g.contains(a) && g.contains(b))
    }
}

/// A ready-to-use matcher. Build once per run; judge-backed matchers share
/// the judge handle.
pub struct Matcher {
    kind: MatcherKind,
    threshold: f64,
    aliases: AliasTable,
    judge: Option<Arc<dyn Judge>>,
}

impl Matcher {
    pub fn build(
        config: &MatcherConfig,
        judge: Option<Arc<dyn Judge>>,
    ) -> Result<Matcher, EvalError> {
        if !(0.0..=1.0).contains(&config.threshold) {
            return Err(EvalError::Config(format!(
                "matcher threshold must be in [0, 1], got {}",
                config.threshold
            )));
        }
        let aliases = match (&config.kind, &config.alias_path) {
            (MatcherKind::AliasTable, Some(path)) => AliasTable::load(path)?,
            (MatcherKind::AliasTable, None) => {
                return Err(EvalError::Config(
                    "alias_table matcher requires an alias file".into(),
                ))
            }
            _ => AliasTable::default(),
        };
        if config.kind == MatcherKind::Judge && judge.is_none() {
            return Err(EvalError::Config(
                "judge matcher requires a judge endpoint or stub".into(),
            ));
        }
        Ok(Matcher {
            kind: config.kind,
            threshold: config.threshold,
            aliases,
            judge,
        })
    }

    pub fn kind(&self) -> MatcherKind {
        self.kind
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub(crate) fn judge_handle(&self) -> Option<&Arc<dyn Judge>> {
        self.judge.as_ref()
    }

    fn deterministic_score(&self, pred: &str, gt: &str) -> f64 {
        match self.kind {
            MatcherKind::ExactNormalized => {
                let (a, b) = (fold_text(pred), fold_text(gt));
                f64::from(!a.is_empty() && a == b)
            }
            MatcherKind::TokenJaccard => token_jaccard(pred, gt),
            MatcherKind::AliasTable => {
                let (a, b) = (fold_text(pred), fold_text(gt));
                f64::from((!a.is_empty() && a == b) || self.aliases.same_group(&a, &b))
            }
            MatcherKind::Judge => unreachable!("judge scores go through the batch path"),
        }
    }

    /// Scores every (pred, gt) pair. Judge verdicts are fetched in one
    /// batched request and applied in deterministic index order.
    pub fn score_matrix(&self, preds: &[String], gts: &[String]) -> Result<Vec<Vec<f64>>, EvalError> {
        if self.kind != MatcherKind::Judge {
            return Ok(preds
                .iter()
                .map(|p| gts.iter().map(|g| self.deterministic_score(p, g)).collect())
                .collect());
        }
        let mut matrix = vec![vec![0.0; gts.len()]; preds.len()];
        if preds.is_empty() || gts.is_empty() {
            return Ok(matrix);
        }
        let judge = self.judge.as_ref().expect("judge presence checked in build");
        let items: Vec<JudgeItem> = preds
            .iter()
            .enumerate()
            .flat_map(|(i, p)| {
                gts.iter().enumerate().map(move |(j, g)| JudgeItem {
                    id: format!("{i}:{j}"),
                    candidate: p.clone(),
                    reference: g.clone(),
                    context: String::new(),
                })
            })
            .collect();
        let response = judge.judge_batch(&JudgeRequest::new(JudgeTask::EntityMatch, items))?;
        for (k, result) in response.results.iter().enumerate() {
            let (i, j) = (k / gts.len(), k % gts.len());
            match result.answer {
                JudgeAnswer::Verdict(v) => matrix[i][j] = f64::from(v),
                _ => unreachable!("validated answer kind"),
            }
        }
        Ok(matrix)
    }

    /// Whether `entity` is mentioned inside free text (an activity
    /// description). Deterministic kinds use folded token containment; the
    /// judge sees the full text as reference.
    pub fn entity_in_text(&self, entity: &str, text: &str) -> Result<bool, EvalError> {
        match self.kind {
            MatcherKind::ExactNormalized | MatcherKind::TokenJaccard => {
                Ok(token_subsequence(&fold_text(entity), &fold_text(text)))
            }
            MatcherKind::AliasTable => {
                let folded_text = fold_text(text);
                let folded = fold_text(entity);
                if token_subsequence(&folded, &folded_text) {
                    return Ok(true);
                }
                Ok(self
                    .aliases
                    .groups
                    .iter()
                    .filter(|g| g.contains(&folded))
                    .any(|g| g.iter().any(|v| token_subsequence(v, &folded_text))))
            }
            MatcherKind::Judge => {
                let judge = self.judge.as_ref().expect("judge presence checked in build");
                let request = JudgeRequest::new(
                    JudgeTask::EntityMatch,
                    vec![JudgeItem {
                        id: "0".into(),
                        candidate: entity.to_string(),
                        reference: text.to_string(),
                        context: "mention within an activity description".into(),
                    }],
                );
                let response = judge.judge_batch(&request)?;
                match response.results[0].answer {
                    JudgeAnswer::Verdict(v) => Ok(v),
                    _ => unreachable!("validated answer kind"),
                }
            }
        }
    }
}

/// True when `needle`'s tokens appear consecutively in `haystack`'s tokens.
fn token_subsequence(needle: &str, haystack: &str) -> bool {
    let n: Vec<&str> = needle.split_whitespace().collect();
    if n.is_empty() {
        return false;
    }
    let h: Vec<&str> = haystack.split_whitespace().collect();
    h.windows(n.len()).any(|w| w == n.as_slice())
}

/// One matched pair with its score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchPair {
    pub pred_index: usize,
    pub gt_index: usize,
    pub score: f64,
}

/// One-to-one correspondence between prediction and ground-truth entities.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchPair>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gt: Vec<usize>,
}

/// Greedy one-to-one assignment: repeatedly take the highest-scoring
/// remaining pair with score >= θ (ties: lower pred index, then lower gt
/// index) and remove both entities.
pub fn match_entities(
    preds: &[String],
    gts: &[String],
    matcher: &Matcher,
) -> Result<MatchResult, EvalError> {
    let matrix = matcher.score_matrix(preds, gts)?;
    Ok(greedy_from_matrix(&matrix, matcher.threshold(), preds.len(), gts.len()))
}

fn greedy_from_matrix(
    matrix: &[Vec<f64>],
    threshold: f64,
    pred_count: usize,
    gt_count: usize,
) -> MatchResult {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, row) in matrix.iter().enumerate() {
        for (j, &score) in row.iter().enumerate() {
            if score >= threshold {
                candidates.push((score, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("scores are finite")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut pred_free = vec![true; pred_count];
    let mut gt_free = vec![true; gt_count];
    let mut pairs = Vec::new();
    for (score, i, j) in candidates {
        if pred_free[i] && gt_free[j] {
            pred_free[i] = false;
            gt_free[j] = false;
            pairs.push(MatchPair {
                pred_index: i,
                gt_index: j,
                score,
            });
        }
    }
    pairs.sort_by_key(|p| p.pred_index);
    MatchResult {
        pairs,
        unmatched_pred: pred_free
            .iter()
            .enumerate()
            .filter_map(|(i, &free)| free.then_some(i))
            .collect(),
        unmatched_gt: gt_free
            .iter()
            .enumerate()
            .filter_map(|(j, &free)| free.then_some(j))
            .collect(),
    }
}

/// Precision/recall/F1 over true/false positive and false negative counts.
/// When an entire side is empty the guarded conventions apply: a metric
/// with an empty denominator is 1.0 only if the other side is empty too
/// (vacuous agreement), otherwise 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub vacuous: bool,
}

fn guarded_ratio(num: usize, den: usize, other_empty: bool) -> f64 {
    if den == 0 {
        if other_empty {
            1.0
        } else {
            0.0
        }
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Derives detection metrics from a match result.
pub fn detection_scores(result: &MatchResult) -> DetectionScores {
    let tp = result.pairs.len();
    let fp = result.unmatched_pred.len();
    let fn_ = result.unmatched_gt.len();
    detection_from_counts(tp, fp, tp, fn_)
}

/// Precision side and recall side may count different true positives when
/// cross-category credits apply (objects mentioned in activity text).
pub(crate) fn detection_from_counts(
    tp_precision: usize,
    fp: usize,
    tp_recall: usize,
    fn_: usize,
) -> DetectionScores {
    let vacuous = tp_precision + fp == 0 && tp_recall + fn_ == 0;
    if vacuous {
        return DetectionScores {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
            tp: 0,
            fp: 0,
            fn_: 0,
            vacuous: true,
        };
    }
    let precision = guarded_ratio(tp_precision, tp_precision + fp, tp_recall + fn_ == 0);
    let recall = guarded_ratio(tp_recall, tp_recall + fn_, tp_precision + fp == 0);
    DetectionScores {
        precision,
        recall,
        f1: harmonic(precision, recall),
        tp: tp_precision,
        fp,
        fn_,
        vacuous: false,
    }
}

/// Mean Jaccard similarity of matched pairs' grids, `None` without pairs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairLocalization {
    pub spatial_jaccard: Option<f64>,
    pub temporal_jaccard: Option<f64>,
    pub pair_count: usize,
}

fn localize(pairs: &[(&GridSet, &TemporalSet, &GridSet, &TemporalSet)]) -> PairLocalization {
    if pairs.is_empty() {
        return PairLocalization::default();
    }
    let n = pairs.len() as f64;
    let spatial = pairs.iter().map(|(pp, _, gp, _)| pp.jaccard(gp)).sum::<f64>() / n;
    let temporal = pairs.iter().map(|(_, pt, _, gt)| pt.jaccard(gt)).sum::<f64>() / n;
    PairLocalization {
        spatial_jaccard: Some(spatial),
        temporal_jaccard: Some(temporal),
        pair_count: pairs.len(),
    }
}

/// Object detection scores. Precision credits predicted objects that match
/// a ground-truth object one-to-one or are mentioned in a ground-truth
/// human activity; recall mirrors this with predicted activities. Each
/// predicted object counts at most once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectScores {
    pub detection: DetectionScores,
    pub matched: usize,
    pub pred_activity_credit: usize,
    pub gt_activity_credit: usize,
    pub pred_total: usize,
    pub gt_total: usize,
    pub localization: PairLocalization,
}

pub fn eval_objects(
    pred: &AnnotationRecord,
    gt: &AnnotationRecord,
    matcher: &Matcher,
) -> Result<ObjectScores, EvalError> {
    let pred_names: Vec<String> = pred.objects.iter().map(|o| o.name.clone()).collect();
    let gt_names: Vec<String> = gt.objects.iter().map(|o| o.name.clone()).collect();
    let result = match_entities(&pred_names, &gt_names, matcher)?;
    let matched = result.pairs.len();

    let mut pred_activity_credit = 0;
    for &i in &result.unmatched_pred {
        let mut credited = false;
        for human in &gt.humans {
            if matcher.entity_in_text(&pred_names[i], &human.activity)? {
                credited = true;
                break;
            }
        }
        if credited {
            pred_activity_credit += 1;
        }
    }
    let mut gt_activity_credit = 0;
    for &j in &result.unmatched_gt {
        let mut credited = false;
        for human in &pred.humans {
            if matcher.entity_in_text(&gt_names[j], &human.activity)? {
                credited = true;
                break;
            }
        }
        if credited {
            gt_activity_credit += 1;
        }
    }

    let fp = pred_names.len() - matched - pred_activity_credit;
    let fn_ = gt_names.len() - matched - gt_activity_credit;
    let detection = detection_from_counts(
        matched + pred_activity_credit,
        fp,
        matched + gt_activity_credit,
        fn_,
    );

    let loc_pairs: Vec<_> = result
        .pairs
        .iter()
        .map(|p| {
            let po = &pred.objects[p.pred_index];
            let go = &gt.objects[p.gt_index];
            (&po.pos, &po.temp, &go.pos, &go.temp)
        })
        .collect();

    Ok(ObjectScores {
        detection,
        matched,
        pred_activity_credit,
        gt_activity_credit,
        pred_total: pred_names.len(),
        gt_total: gt_names.len(),
        localization: localize(&loc_pairs),
    })
}

/// Attribute accuracies over matched human pairs. Judge-scored fields are
/// absent when no judge is configured; everything is absent when nothing
/// matched (averages are never fabricated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanAttrScores {
    pub activity_score: Option<f64>,
    pub description_score: Option<f64>,
    pub age_accuracy: f64,
    pub expression_accuracy: f64,
    pub face_accuracy: f64,
    pub spatial_jaccard: f64,
    pub temporal_jaccard: f64,
    pub pair_count: usize,
}

/// Human detection plus per-pair attribute scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanScores {
    pub detection: DetectionScores,
    pub attrs: Option<HumanAttrScores>,
}

pub fn eval_humans(
    pred: &AnnotationRecord,
    gt: &AnnotationRecord,
    matcher: &Matcher,
    judge: Option<&dyn Judge>,
) -> Result<HumanScores, EvalError> {
    // Humans match on what they look like and what they are doing, never on
    // where they are; position is scored as an attribute afterwards.
    let key = |activity: &str, description: &str| format!("{description} {activity}");
    let pred_keys: Vec<String> = pred
        .humans
        .iter()
        .map(|h| key(&h.activity, &h.description))
        .collect();
    let gt_keys: Vec<String> = gt
        .humans
        .iter()
        .map(|h| key(&h.activity, &h.description))
        .collect();
    let result = match_entities(&pred_keys, &gt_keys, matcher)?;
    let detection = detection_scores(&result);

    if result.pairs.is_empty() {
        return Ok(HumanScores {
            detection,
            attrs: None,
        });
    }

    let n = result.pairs.len() as f64;
    let mut age_hits = 0usize;
    let mut expression_hits = 0usize;
    let mut face_hits = 0usize;
    let mut spatial = 0.0;
    let mut temporal = 0.0;
    for p in &result.pairs {
        let ph = &pred.humans[p.pred_index];
        let gh = &gt.humans[p.gt_index];
        age_hits += usize::from(ph.age == gh.age);
        expression_hits += usize::from(ph.expression == gh.expression);
        face_hits += usize::from(ph.face_visible == gh.face_visible);
        spatial += ph.pos.jaccard(&gh.pos);
        temporal += ph.temp.jaccard(&gh.temp);
    }

    let (activity_score, description_score) = match judge {
        None => (None, None),
        Some(judge) => {
            let mut items = Vec::with_capacity(result.pairs.len() * 2);
            for (k, p) in result.pairs.iter().enumerate() {
                let ph = &pred.humans[p.pred_index];
                let gh = &gt.humans[p.gt_index];
                items.push(JudgeItem {
                    id: format!("act:{k}"),
                    candidate: ph.activity.clone(),
                    reference: gh.activity.clone(),
                    context: "human activity".into(),
                });
                items.push(JudgeItem {
                    id: format!("desc:{k}"),
                    candidate: ph.description.clone(),
                    reference: gh.description.clone(),
                    context: "human appearance description".into(),
                });
            }
            let response = judge.judge_batch(&JudgeRequest::new(JudgeTask::Score01, items))?;
            let mut activity_sum = 0.0;
            let mut description_sum = 0.0;
            for result in &response.results {
                let score = match result.answer {
                    JudgeAnswer::Score(s) => s,
                    _ => unreachable!("validated answer kind"),
                };
                if result.id.starts_with("act:") {
                    activity_sum += score;
                } else {
                    description_sum += score;
                }
            }
            (Some(activity_sum / n), Some(description_sum / n))
        }
    };

    Ok(HumanScores {
        detection,
        attrs: Some(HumanAttrScores {
            activity_score,
            description_score,
            age_accuracy: age_hits as f64 / n,
            expression_accuracy: expression_hits as f64 / n,
            face_accuracy: face_hits as f64 / n,
            spatial_jaccard: spatial / n,
            temporal_jaccard: temporal / n,
            pair_count: result.pairs.len(),
        }),
    })
}

/// Logo detection plus localization over matched pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogoScores {
    pub detection: DetectionScores,
    pub localization: PairLocalization,
}

pub fn eval_logos(
    pred: &AnnotationRecord,
    gt: &AnnotationRecord,
    matcher: &Matcher,
) -> Result<LogoScores, EvalError> {
    let pred_brands: Vec<String> = pred.logos.iter().map(|l| l.brand.clone()).collect();
    let gt_brands: Vec<String> = gt.logos.iter().map(|l| l.brand.clone()).collect();
    let result = match_entities(&pred_brands, &gt_brands, matcher)?;
    let detection = detection_scores(&result);
    let loc_pairs: Vec<_> = result
        .pairs
        .iter()
        .map(|p| {
            let pl = &pred.logos[p.pred_index];
            let gl = &gt.logos[p.gt_index];
            (&pl.pos, &pl.temp, &gl.pos, &gl.temp)
        })
        .collect();
    Ok(LogoScores {
        detection,
        localization: localize(&loc_pairs),
    })
}

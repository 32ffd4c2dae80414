//! Key information unit matching and description metrics.
//!
//! A description is decomposed into atomic, self-contained factual
//! statements, then units are matched many-to-many across sides: a unit
//! counts as matched when at least one unit on the other side reaches the
//! matcher threshold. Completeness is the matched share of ground-truth
//! units (recall); faithfulness is the matched share of predicted units
//! (precision). Unit extraction is judge-side; pre-extracted units can be
//! supplied instead, this module never guesses its own decomposition.

use serde::{Deserialize, Serialize};

use crate::entity::Matcher;
use crate::grid::jaccard;
use crate::judge::{Judge, JudgeAnswer, JudgeItem, JudgeRequest, JudgeTask};
use crate::schema::MediaDescription;
use crate::textmatch::fold_text;
use crate::EvalError;

/// Matched flags per unit, prediction side and ground-truth side.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KiuFlags {
    pub pred_matched: Vec<bool>,
    pub gt_matched: Vec<bool>,
}

/// Completeness/faithfulness with their supporting counts. An empty side
/// scores 1.0 vacuously and is flagged so reports can mark it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KiuScores {
    pub completeness: f64,
    pub faithfulness: f64,
    pub gt_total: usize,
    pub gt_matched: usize,
    pub pred_total: usize,
    pub pred_matched: usize,
    pub completeness_vacuous: bool,
    pub faithfulness_vacuous: bool,
}

impl KiuScores {
    /// Harmonic mean of completeness and faithfulness.
    pub fn description_f1(&self) -> f64 {
        let (c, f) = (self.completeness, self.faithfulness);
        if c + f == 0.0 {
            0.0
        } else {
            2.0 * c * f / (c + f)
        }
    }

    pub fn vacuous(&self) -> bool {
        self.completeness_vacuous && self.faithfulness_vacuous
    }
}

/// Marks units matched when any unit on the other side reaches the
/// matcher threshold; one unit may satisfy several on the other side.
pub fn match_kius(
    pred_units: &[String],
    gt_units: &[String],
    matcher: &Matcher,
) -> Result<KiuFlags, EvalError> {
    let matrix = score_units(pred_units, gt_units, matcher)?;
    let threshold = matcher.threshold();
    let pred_matched = (0..pred_units.len())
        .map(|i| matrix[i].iter().any(|&s| s >= threshold))
        .collect();
    let gt_matched = (0..gt_units.len())
        .map(|j| matrix.iter().any(|row| row[j] >= threshold))
        .collect();
    Ok(KiuFlags {
        pred_matched,
        gt_matched,
    })
}

/// Unit-pair scores; the judge path uses the statement-matching task
/// rather than entity matching.
fn score_units(
    pred_units: &[String],
    gt_units: &[String],
    matcher: &Matcher,
) -> Result<Vec<Vec<f64>>, EvalError> {
    use crate::entity::MatcherKind;
    if matcher.kind() != MatcherKind::Judge || pred_units.is_empty() || gt_units.is_empty() {
        return matcher.score_matrix(pred_units, gt_units);
    }
    let judge = matcher
        .judge_handle()
        .expect("judge matcher carries a judge");
    let items: Vec<JudgeItem> = pred_units
        .iter()
        .enumerate()
        .flat_map(|(i, p)| {
            gt_units.iter().enumerate().map(move |(j, g)| JudgeItem {
                id: format!("{i}:{j}"),
                candidate: p.clone(),
                reference: g.clone(),
                context: String::new(),
            })
        })
        .collect();
    let response = judge.judge_batch(&JudgeRequest::new(JudgeTask::KiuMatch, items))?;
    let mut matrix = vec![vec![0.0; gt_units.len()]; pred_units.len()];
    for (k, result) in response.results.iter().enumerate() {
        let (i, j) = (k / gt_units.len(), k % gt_units.len());
        match result.answer {
            JudgeAnswer::Verdict(v) => matrix[i][j] = f64::from(v),
            _ => unreachable!("validated answer kind"),
        }
    }
    Ok(matrix)
}

/// Turns matched flags into scores with the vacuous-denominator
/// conventions (0/0 reads as 1.0, flagged).
pub fn kiu_scores(flags: &KiuFlags) -> KiuScores {
    let gt_total = flags.gt_matched.len();
    let gt_matched = flags.gt_matched.iter().filter(|&&m| m).count();
    let pred_total = flags.pred_matched.len();
    let pred_matched = flags.pred_matched.iter().filter(|&&m| m).count();
    let completeness_vacuous = gt_total == 0;
    let faithfulness_vacuous = pred_total == 0;
    KiuScores {
        completeness: if completeness_vacuous {
            1.0
        } else {
            gt_matched as f64 / gt_total as f64
        },
        faithfulness: if faithfulness_vacuous {
            1.0
        } else {
            pred_matched as f64 / pred_total as f64
        },
        gt_total,
        gt_matched,
        pred_total,
        pred_matched,
        completeness_vacuous,
        faithfulness_vacuous,
    }
}

/// Media-description scores. Fields needing a judge are absent when no
/// judge is configured; fields with nothing annotated on either side are
/// absent rather than fabricated.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MediaScores {
    pub quality_match: Option<f64>,
    pub colors_jaccard: Option<f64>,
    pub scene_score: Option<f64>,
    pub camera_perspective_score: Option<f64>,
    pub description: Option<KiuScores>,
    pub description_f1: Option<f64>,
    pub nsfw_agreement: Option<bool>,
}

/// Pre-extracted units for one sample, prediction and ground-truth side.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KiuUnits {
    pub pred_units: Vec<String>,
    pub gt_units: Vec<String>,
}

fn extract_units(judge: &dyn Judge, text: &str, id: &str) -> Result<Vec<String>, EvalError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let request = JudgeRequest::new(
        JudgeTask::KiuExtract,
        vec![JudgeItem {
            id: id.to_string(),
            candidate: text.to_string(),
            reference: String::new(),
            context: String::new(),
        }],
    );
    let response = judge.judge_batch(&request)?;
    match &response.results[0].answer {
        JudgeAnswer::Units(units) => Ok(units.clone()),
        _ => unreachable!("validated answer kind"),
    }
}

/// Scores one media description against ground truth. `units` supplies
/// pre-extracted description units; otherwise the judge's extraction task
/// is used, and without either the description scores stay absent.
pub fn eval_media(
    pred: &MediaDescription,
    gt: &MediaDescription,
    matcher: &Matcher,
    judge: Option<&dyn Judge>,
    units: Option<&KiuUnits>,
) -> Result<MediaScores, EvalError> {
    let mut scores = MediaScores::default();

    let pred_quality = fold_text(&pred.quality);
    let gt_quality = fold_text(&gt.quality);
    if !(pred_quality.is_empty() && gt_quality.is_empty()) {
        scores.quality_match = Some(f64::from(pred_quality == gt_quality));
    }

    if !(pred.dominant_colors.is_empty() && gt.dominant_colors.is_empty()) {
        scores.colors_jaccard = Some(jaccard(&pred.dominant_colors, &gt.dominant_colors));
    }

    if let Some(judge) = judge {
        let mut items = Vec::new();
        if !(pred.scene.trim().is_empty() && gt.scene.trim().is_empty()) {
            items.push(JudgeItem {
                id: "scene".into(),
                candidate: pred.scene.clone(),
                reference: gt.scene.clone(),
                context: "scene detection".into(),
            });
        }
        if !(pred.camera_perspective.trim().is_empty() && gt.camera_perspective.trim().is_empty()) {
            items.push(JudgeItem {
                id: "camera".into(),
                candidate: pred.camera_perspective.clone(),
                reference: gt.camera_perspective.clone(),
                context: "camera perspective".into(),
            });
        }
        if !items.is_empty() {
            let response = judge.judge_batch(&JudgeRequest::new(JudgeTask::Score15, items))?;
            for result in &response.results {
                let value = match result.answer {
                    JudgeAnswer::Score(s) => s,
                    _ => unreachable!("validated answer kind"),
                };
                match result.id.as_str() {
                    "scene" => scores.scene_score = Some(value),
                    _ => scores.camera_perspective_score = Some(value),
                }
            }
        }
    }

    let resolved_units = match (units, judge) {
        (Some(u), _) => Some(u.clone()),
        (None, Some(judge)) => Some(KiuUnits {
            pred_units: extract_units(judge, &pred.description, "pred")?,
            gt_units: extract_units(judge, &gt.description, "gt")?,
        }),
        (None, None) => None,
    };
    if let Some(u) = resolved_units {
        if !(pred.description.trim().is_empty() && gt.description.trim().is_empty()) {
            let flags = match_kius(&u.pred_units, &u.gt_units, matcher)?;
            let kiu = kiu_scores(&flags);
            scores.description_f1 = Some(kiu.description_f1());
            scores.description = Some(kiu);
        }
    }

    if let (Some(p), Some(g)) = (pred.nsfw, gt.nsfw) {
        scores.nsfw_agreement = Some(p == g);
    }

    Ok(scores)
}

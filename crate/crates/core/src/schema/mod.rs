//! Unified annotation data model, parsing, validation, and reliability.
//!
//! One record describes one media sample: detected objects, humans, logos,
//! OCR text blocks, and an overall media description. The same shape is
//! used for ground truth and predictions; validation caps (at most 10
//! objects, 5 humans) are enforced as errors only for ground truth.
//!
//! Model output is rarely pristine, so parsing comes in two modes. Strict
//! mode accepts a single well-formed JSON object that conforms to the
//! schema. Lenient mode additionally applies a bounded, auditable set of
//! repairs — code-fence stripping, first-balanced-object extraction,
//! unknown-field dropping, enum case folding — and reports each one.

mod parse;

pub use parse::{parse_record, ParseMode};

use serde::{Deserialize, Serialize};

use crate::grid::{GridSet, TemporalSet};
use crate::EvalError;

/// Whether the sample is a still image or a video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaKind {
    Image,
    Video,
}

/// Age bucket for detected humans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AgeGroup {
    Child,
    Teen,
    Adult,
    Elderly,
}

/// Facial expression for detected humans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Expression {
    Happy,
    Sad,
    Neutral,
    Angry,
}

/// A detected object with its grid position and confidence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityObject {
    pub name: String,
    pub pos: GridSet,
    pub temp: TemporalSet,
    pub conf: f64,
}

/// A detected human with demographic and appearance attributes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityHuman {
    pub activity: String,
    pub description: String,
    pub age: AgeGroup,
    pub expression: Expression,
    pub face_visible: bool,
    pub pos: GridSet,
    pub temp: TemporalSet,
    pub conf: f64,
}

/// A detected brand mark.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityLogo {
    pub brand: String,
    pub pos: GridSet,
    pub temp: TemporalSet,
    pub conf: f64,
}

/// One OCR text block. Position and temporal hints are optional; only the
/// text participates in OCR scoring.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OcrBlock {
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pos: Option<GridSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temp: Option<TemporalSet>,
}

/// Sample-level description fields. `dominant_colors` entries are
/// normalized to lowercase with duplicates removed.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MediaDescription {
    pub description: String,
    pub scene: String,
    pub camera_perspective: String,
    pub quality: String,
    pub dominant_colors: std::collections::BTreeSet<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nsfw: Option<bool>,
}

/// The unified per-sample annotation, used for both ground truth and
/// predictions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotationRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    pub media_kind: MediaKind,
    pub objects: Vec<EntityObject>,
    pub humans: Vec<EntityHuman>,
    pub logos: Vec<EntityLogo>,
    pub ocr: Vec<OcrBlock>,
    pub media: MediaDescription,
}

impl AnnotationRecord {
    /// Canonical JSON, stable field order; strict-reparseable.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serialization cannot fail")
    }
}

/// Result of parsing one raw model output.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    status: ParseStatus,
    record: Option<AnnotationRecord>,
    diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseStatus {
    Valid,
    Repaired,
    Invalid,
}

impl ParseOutcome {
    pub(crate) fn valid(record: AnnotationRecord) -> Self {
        ParseOutcome {
            status: ParseStatus::Valid,
            record: Some(record),
            diagnostics: Vec::new(),
        }
    }

    pub(crate) fn repaired(record: AnnotationRecord, diagnostics: Vec<String>) -> Self {
        debug_assert!(!diagnostics.is_empty());
        ParseOutcome {
            status: ParseStatus::Repaired,
            record: Some(record),
            diagnostics,
        }
    }

    pub(crate) fn invalid(diagnostics: Vec<String>) -> Self {
        debug_assert!(!diagnostics.is_empty());
        ParseOutcome {
            status: ParseStatus::Invalid,
            record: None,
            diagnostics,
        }
    }

    pub fn status(&self) -> ParseStatus {
        self.status
    }

    pub fn record(&self) -> Option<&AnnotationRecord> {
        self.record.as_ref()
    }

    pub fn into_record(self) -> Option<AnnotationRecord> {
        self.record
    }

    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    pub fn is_usable(&self) -> bool {
        self.status != ParseStatus::Invalid
    }

    /// Downgrades a parsed outcome to invalid, e.g. after validation
    /// errors; the extra diagnostics say why.
    pub fn downgrade_invalid(self, mut extra: Vec<String>) -> ParseOutcome {
        let mut diagnostics = self.diagnostics;
        diagnostics.append(&mut extra);
        if diagnostics.is_empty() {
            diagnostics.push("invalidated".into());
        }
        ParseOutcome {
            status: ParseStatus::Invalid,
            record: None,
            diagnostics,
        }
    }
}

/// Whose invariants to enforce during validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    GroundTruth,
    Prediction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// One violated rule at one path, machine-readable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub rule: String,
    pub severity: Severity,
}

impl Violation {
    fn err(path: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation {
            path: path.into(),
            rule: rule.into(),
            severity: Severity::Error,
        }
    }

    fn warn(path: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation {
            path: path.into(),
            rule: rule.into(),
            severity: Severity::Warning,
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.rule)
    }
}

fn is_blank(text: &str) -> bool {
    text.trim().is_empty()
}

fn validate_entity(
    out: &mut Vec<Violation>,
    path: &str,
    kind: MediaKind,
    pos: &GridSet,
    temp: &TemporalSet,
    conf: f64,
) {
    if pos.is_empty() {
        out.push(Violation::err(format!("{path}.pos"), "pos.empty"));
    }
    match kind {
        MediaKind::Image => {
            if !temp.is_empty() {
                out.push(Violation::err(format!("{path}.temp"), "temp.on_image"));
            }
        }
        MediaKind::Video => {
            if temp.is_empty() {
                out.push(Violation::err(format!("{path}.temp"), "temp.empty_on_video"));
            }
        }
    }
    if !(0.0..=1.0).contains(&conf) {
        out.push(Violation::err(format!("{path}.conf"), "conf.range"));
    }
}

/// Checks role-dependent invariants. Returns an empty list when the record
/// conforms; never mutates the record. Count caps are errors for ground
/// truth and warnings for predictions.
pub fn validate_record(record: &AnnotationRecord, role: Role) -> Vec<Violation> {
    let mut out = Vec::new();
    let cap = |out: &mut Vec<Violation>, path: &str, rule: String| match role {
        Role::GroundTruth => out.push(Violation::err(path, rule)),
        Role::Prediction => out.push(Violation::warn(path, rule)),
    };
    if record.objects.len() > 10 {
        cap(&mut out, "objects", "objects.count>10".into());
    }
    if record.humans.len() > 5 {
        cap(&mut out, "humans", "humans.count>5".into());
    }
    let kind = record.media_kind;
    for (i, obj) in record.objects.iter().enumerate() {
        let path = format!("objects[{i}]");
        if is_blank(&obj.name) {
            out.push(Violation::err(format!("{path}.name"), "name.empty"));
        }
        validate_entity(&mut out, &path, kind, &obj.pos, &obj.temp, obj.conf);
    }
    for (i, human) in record.humans.iter().enumerate() {
        let path = format!("humans[{i}]");
        validate_entity(&mut out, &path, kind, &human.pos, &human.temp, human.conf);
    }
    for (i, logo) in record.logos.iter().enumerate() {
        let path = format!("logos[{i}]");
        if is_blank(&logo.brand) {
            out.push(Violation::err(format!("{path}.brand"), "brand.empty"));
        }
        validate_entity(&mut out, &path, kind, &logo.pos, &logo.temp, logo.conf);
    }
    for (i, block) in record.ocr.iter().enumerate() {
        let path = format!("ocr[{i}]");
        if let Some(temp) = &block.temp {
            if kind == MediaKind::Image && !temp.is_empty() {
                out.push(Violation::err(format!("{path}.temp"), "temp.on_image"));
            }
        }
    }
    out
}

/// Parse-and-validate success rates over a batch of outcomes. The lenient
/// rate counts valid and repaired outcomes; the strict rate counts only
/// outcomes that needed no repair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityScore {
    pub lenient_rate: f64,
    pub strict_rate: f64,
    pub total: usize,
    pub valid: usize,
    pub repaired: usize,
    pub invalid: usize,
}

/// Computes reliability over parse outcomes. Errors on empty input.
pub fn reliability(outcomes: &[ParseOutcome]) -> Result<ReliabilityScore, EvalError> {
    if outcomes.is_empty() {
        return Err(EvalError::NoSamples("no samples".into()));
    }
    let total = outcomes.len();
    let valid = outcomes
        .iter()
        .filter(|o| o.status() == ParseStatus::Valid)
        .count();
    let repaired = outcomes
        .iter()
        .filter(|o| o.status() == ParseStatus::Repaired)
        .count();
    Ok(ReliabilityScore {
        lenient_rate: (valid + repaired) as f64 / total as f64,
        strict_rate: valid as f64 / total as f64,
        total,
        valid,
        repaired,
        invalid: total - valid - repaired,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{parse_grid, parse_temporal};

    pub(crate) fn object(name: &str, pos: &[&str], temp: &[&str]) -> EntityObject {
        let pos_strings: Vec<String> = pos.iter().map(|s| s.to_string()).collect();
        let temp_strings: Vec<String> = temp.iter().map(|s| s.to_string()).collect();
        EntityObject {
            name: name.into(),
            pos: if pos_strings.is_empty() {
                GridSet::default()
            } else {
                parse_grid(&pos_strings).unwrap()
            },
            temp: parse_temporal(&temp_strings).unwrap(),
            conf: 0.9,
        }
    }

    pub(crate) fn image_record(objects: Vec<EntityObject>) -> AnnotationRecord {
        AnnotationRecord {
            sample_id: Some("s1".into()),
            media_kind: MediaKind::Image,
            objects,
            humans: vec![],
            logos: vec![],
            ocr: vec![],
            media: MediaDescription::default(),
        }
    }

    #[test]
    fn conforming_record_has_no_violations() {
        let record = image_record(vec![object("cup", &["center"], &[])]);
        assert!(validate_record(&record, Role::GroundTruth).is_empty());
        assert!(validate_record(&record, Role::Prediction).is_empty());
    }

    #[test]
    fn object_cap_is_error_for_gt_warning_for_pred() {
        let record = image_record((0..11).map(|i| object(&format!("o{i}"), &["center"], &[])).collect());
        let gt = validate_record(&record, Role::GroundTruth);
        assert_eq!(gt.len(), 1);
        assert_eq!(gt[0].rule, "objects.count>10");
        assert_eq!(gt[0].severity, Severity::Error);
        let pred = validate_record(&record, Role::Prediction);
        assert_eq!(pred[0].severity, Severity::Warning);
    }

    #[test]
    fn temporal_labels_on_image_flagged() {
        let record = image_record(vec![object("cup", &["center"], &["start"])]);
        let violations = validate_record(&record, Role::GroundTruth);
        assert!(violations.iter().any(|v| v.rule == "temp.on_image"));
    }

    #[test]
    fn video_requires_temporal_labels() {
        let mut record = image_record(vec![object("cup", &["center"], &[])]);
        record.media_kind = MediaKind::Video;
        let violations = validate_record(&record, Role::GroundTruth);
        assert!(violations.iter().any(|v| v.rule == "temp.empty_on_video"));
    }

    #[test]
    fn empty_pos_and_name_flagged() {
        let record = image_record(vec![object("  ", &[], &[])]);
        let violations = validate_record(&record, Role::GroundTruth);
        assert!(violations.iter().any(|v| v.rule == "pos.empty"));
        assert!(violations.iter().any(|v| v.rule == "name.empty"));
    }

    #[test]
    fn reliability_counts() {
        let record = image_record(vec![]);
        let outcomes = vec![
            ParseOutcome::valid(record.clone()),
            ParseOutcome::repaired(record, vec!["stripped code fence".into()]),
            ParseOutcome::invalid(vec!["not json".into()]),
        ];
        let score = reliability(&outcomes).unwrap();
        assert!((score.lenient_rate - 2.0 / 3.0).abs() < 1e-12);
        assert!((score.strict_rate - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn reliability_all_valid() {
        let record = image_record(vec![]);
        let outcomes = vec![ParseOutcome::valid(record)];
        let score = reliability(&outcomes).unwrap();
        assert_eq!(score.lenient_rate, 1.0);
    }

    #[test]
    fn reliability_empty_errors() {
        assert!(matches!(reliability(&[]), Err(EvalError::NoSamples(_))));
    }

    #[test]
    fn reliability_monotone_under_invalid_append() {
        let record = image_record(vec![]);
        let mut outcomes = vec![
            ParseOutcome::valid(record.clone()),
            ParseOutcome::repaired(record, vec!["x".into()]),
        ];
        let before = reliability(&outcomes).unwrap().lenient_rate;
        outcomes.push(ParseOutcome::invalid(vec!["junk".into()]));
        let after = reliability(&outcomes).unwrap().lenient_rate;
        assert!(after <= before);
    }
}

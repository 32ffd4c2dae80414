//! Client protocol for an external LLM judge service.
//!
//! The judge answers semantic questions the deterministic matchers cannot:
//! entity-match verdicts, 0-1 quality scores, 1-5 scale scores, key
//! information unit extraction and matching. Requests and responses travel
//! as JSON over a single HTTP POST endpoint; see [`http::HttpJudge`].
//!
//! Every unanswered item is an error tied to its id — the pipeline never
//! fabricates a score for a sample the judge failed on. [`stub::StubJudge`]
//! is a deterministic drop-in used in tests and offline runs;
//! [`cache::CachedJudge`] adds an on-disk response cache in front of any
//! judge.

pub mod cache;
pub mod http;
pub mod stub;

use serde::{Deserialize, Serialize};

/// What the judge is being asked to do with each item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeTask {
    /// Boolean verdict: do candidate and reference denote the same entity?
    EntityMatch,
    /// Quality score in [0, 1] for candidate against reference.
    Score01,
    /// Quality score on a 1-5 scale.
    Score15,
    /// Split the candidate text into atomic factual statements.
    KiuExtract,
    /// Boolean verdict: do two factual statements express the same fact?
    KiuMatch,
}

impl JudgeTask {
    pub fn name(&self) -> &'static str {
        match self {
            JudgeTask::EntityMatch => "entity_match",
            JudgeTask::Score01 => "score_01",
            JudgeTask::Score15 => "score_15",
            JudgeTask::KiuExtract => "kiu_extract",
            JudgeTask::KiuMatch => "kiu_match",
        }
    }
}

/// One unit of work. `context` carries task-specific framing (for example
/// the activity text an entity should be grounded in) and travels opaquely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeItem {
    pub id: String,
    pub candidate: String,
    #[serde(default)]
    pub reference: String,
    #[serde(default)]
    pub context: String,
}

/// A batch of same-task items. Ids must be unique within one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub task: JudgeTask,
    pub items: Vec<JudgeItem>,
}

impl JudgeRequest {
    pub fn new(task: JudgeTask, items: Vec<JudgeItem>) -> Self {
        JudgeRequest { task, items }
    }

    /// Rejects empty requests and duplicate ids.
    pub fn validate(&self) -> Result<(), JudgeError> {
        if self.items.is_empty() {
            return Err(JudgeError::Config("judge request has no items".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for item in &self.items {
            if !seen.insert(&item.id) {
                return Err(JudgeError::Config(format!(
                    "duplicate judge item id {:?}",
                    item.id
                )));
            }
        }
        Ok(())
    }
}

/// Exactly one of verdict, score or units, matching the request task.
#[derive(Debug, Clone, PartialEq)]
pub enum JudgeAnswer {
    Verdict(bool),
    Score(f64),
    Units(Vec<String>),
}

/// One answered item.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgeResult {
    pub id: String,
    pub answer: JudgeAnswer,
}

/// Answers in request order, one per request item.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JudgeResponse {
    pub results: Vec<JudgeResult>,
}

/// Errors surfaced by judge backends. Transport errors abort the affected
/// samples; protocol errors carry the offending payload for debugging.
#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error("judge transport error: {0}")]
    Transport(String),
    #[error("judge protocol error: {detail} (payload: {payload})")]
    Protocol { detail: String, payload: String },
    #[error("judge configuration error: {0}")]
    Config(String),
}

/// A judge backend. Implementations must be deterministic given their
/// model id, or results cease to be reproducible.
pub trait Judge: Send + Sync {
    fn judge_batch(&self, request: &JudgeRequest) -> Result<JudgeResponse, JudgeError>;

    /// Stable identifier of the underlying model; cache keys include it.
    fn model_id(&self) -> &str;
}

/// Wire shape of one answered item: exactly one answer field set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct WireResult {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub units: Option<Vec<String>>,
}

impl WireResult {
    pub(crate) fn from_answer(id: &str, answer: &JudgeAnswer) -> WireResult {
        let mut wire = WireResult {
            id: id.to_string(),
            verdict: None,
            score: None,
            units: None,
        };
        match answer {
            JudgeAnswer::Verdict(v) => wire.verdict = Some(*v),
            JudgeAnswer::Score(s) => wire.score = Some(*s),
            JudgeAnswer::Units(u) => wire.units = Some(u.clone()),
        }
        wire
    }

    /// Checks the answer kind (and score range) against the task.
    pub(crate) fn into_answer(self, task: JudgeTask) -> Result<JudgeAnswer, String> {
        let fields = usize::from(self.verdict.is_some())
            + usize::from(self.score.is_some())
            + usize::from(self.units.is_some());
        if fields != 1 {
            return Err(format!(
                "result {:?} must carry exactly one of verdict/score/units, found {fields}",
                self.id
            ));
        }
        match task {
            JudgeTask::EntityMatch | JudgeTask::KiuMatch => self
                .verdict
                .map(JudgeAnswer::Verdict)
                .ok_or_else(|| format!("result {:?}: expected a verdict", self.id)),
            JudgeTask::Score01 => match self.score {
                Some(s) if (0.0..=1.0).contains(&s) => Ok(JudgeAnswer::Score(s)),
                Some(s) => Err(format!("result {:?}: score {s} outside [0, 1]", self.id)),
                None => Err(format!("result {:?}: expected a score", self.id)),
            },
            JudgeTask::Score15 => match self.score {
                Some(s) if (1.0..=5.0).contains(&s) => Ok(JudgeAnswer::Score(s)),
                Some(s) => Err(format!("result {:?}: score {s} outside [1, 5]", self.id)),
                None => Err(format!("result {:?}: expected a score", self.id)),
            },
            JudgeTask::KiuExtract => self
                .units
                .map(JudgeAnswer::Units)
                .ok_or_else(|| format!("result {:?}: expected units", self.id)),
        }
    }
}

/// Validates raw results against the request: every id answered exactly
/// once, nothing extra, kinds matching the task. Returns answers in
/// request order.
pub(crate) fn validate_results(
    request_items: &[JudgeItem],
    task: JudgeTask,
    raw: Vec<WireResult>,
    payload_for_errors: &str,
) -> Result<Vec<JudgeResult>, JudgeError> {
    let protocol = |detail: String| JudgeError::Protocol {
        detail,
        payload: truncate(payload_for_errors, 2000),
    };
    let mut by_id = std::collections::BTreeMap::new();
    for wire in raw {
        let id = wire.id.clone();
        if by_id.insert(id.clone(), wire).is_some() {
            return Err(protocol(format!("duplicate result id {id:?}")));
        }
    }
    let mut out = Vec::with_capacity(request_items.len());
    for item in request_items {
        let wire = by_id
            .remove(&item.id)
            .ok_or_else(|| protocol(format!("missing result for id {:?}", item.id)))?;
        let answer = wire.into_answer(task).map_err(&protocol)?;
        out.push(JudgeResult {
            id: item.id.clone(),
            answer,
        });
    }
    if let Some((id, _)) = by_id.into_iter().next() {
        return Err(protocol(format!("unrequested result id {id:?}")));
    }
    Ok(out)
}

fn truncate(text: &str, max: usize) -> String {
    if text.len() <= max {
        text.to_string()
    } else {
        let cut = text
            .char_indices()
            .take_while(|(i, _)| *i < max)
            .last()
            .map(|(i, c)| i + c.len_utf8())
            .unwrap_or(0);
        format!("{}…", &text[..cut])
    }
}

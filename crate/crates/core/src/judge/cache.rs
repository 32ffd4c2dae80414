//! On-disk response cache wrapping any judge.
//!
//! Entries are keyed by a digest of (task, candidate, reference, context,
//! judge model id), so upgrading the judge model invalidates the cache.
//! A hit returns the stored answer byte-identically; misses pass through
//! to the inner judge and are written back atomically.

use std::path::PathBuf;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    Judge, JudgeError, JudgeItem, JudgeRequest, JudgeResponse, JudgeResult, JudgeTask, WireResult,
};

#[derive(Debug, Serialize, Deserialize)]
struct CacheFile {
    task: JudgeTask,
    answer: WireResult,
    created_unix: u64,
}

/// Judge wrapper with a directory of JSON cache entries.
pub struct CachedJudge {
    inner: Box<dyn Judge>,
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl CachedJudge {
    pub fn new(inner: Box<dyn Judge>, dir: impl Into<PathBuf>) -> Result<Self, JudgeError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| {
            JudgeError::Config(format!("cannot create cache dir {}: {e}", dir.display()))
        })?;
        Ok(CachedJudge {
            inner,
            dir,
            write_lock: Mutex::new(()),
        })
    }

    fn key(&self, task: JudgeTask, item: &JudgeItem) -> String {
        let mut hasher = Sha256::new();
        for part in [
            task.name(),
            "\u{1f}",
            &item.candidate,
            "\u{1f}",
            &item.reference,
            "\u{1f}",
            &item.context,
            "\u{1f}",
            self.inner.model_id(),
        ] {
            hasher.update(part.as_bytes());
        }
        hex::encode(hasher.finalize())
    }

    fn read(&self, key: &str, task: JudgeTask) -> Option<WireResult> {
        let path = self.dir.join(format!("{key}.json"));
        let bytes = std::fs::read(&path).ok()?;
        // A corrupt or mismatched entry is treated as a miss and rewritten.
        let file: CacheFile = serde_json::from_slice(&bytes).ok()?;
        (file.task == task).then_some(file.answer)
    }

    fn write(&self, key: &str, task: JudgeTask, result: &JudgeResult) -> Result<(), JudgeError> {
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let file = CacheFile {
            task,
            answer: WireResult::from_answer(&result.id, &result.answer),
            created_unix,
        };
        let bytes = serde_json::to_vec(&file)
            .map_err(|e| JudgeError::Config(format!("cache serialization failed: {e}")))?;
        let _guard = self.write_lock.lock().expect("cache lock poisoned");
        let tmp = self.dir.join(format!(".{key}.tmp"));
        let path = self.dir.join(format!("{key}.json"));
        std::fs::write(&tmp, &bytes)
            .and_then(|()| std::fs::rename(&tmp, &path))
            .map_err(|e| JudgeError::Config(format!("cache write failed: {e}")))?;
        Ok(())
    }
}

impl Judge for CachedJudge {
    fn judge_batch(&self, request: &JudgeRequest) -> Result<JudgeResponse, JudgeError> {
        request.validate()?;
        let keys: Vec<String> = request
            .items
            .iter()
            .map(|item| self.key(request.task, item))
            .collect();

        let mut answers: Vec<Option<JudgeResult>> = Vec::with_capacity(request.items.len());
        let mut misses = Vec::new();
        for (i, item) in request.items.iter().enumerate() {
            match self.read(&keys[i], request.task) {
                Some(wire) => {
                    let answer = wire.into_answer(request.task).map_err(|detail| {
                        JudgeError::Protocol {
                            detail: format!("corrupt cache entry: {detail}"),
                            payload: keys[i].clone(),
                        }
                    })?;
                    answers.push(Some(JudgeResult {
                        id: item.id.clone(),
                        answer,
                    }));
                }
                None => {
                    answers.push(None);
                    misses.push(i);
                }
            }
        }

        if !misses.is_empty() {
            let sub_items: Vec<JudgeItem> =
                misses.iter().map(|&i| request.items[i].clone()).collect();
            let sub = JudgeRequest::new(request.task, sub_items);
            let response = self.inner.judge_batch(&sub)?;
            if response.results.len() != misses.len() {
                return Err(JudgeError::Protocol {
                    detail: format!(
                        "inner judge answered {} of {} items",
                        response.results.len(),
                        misses.len()
                    ),
                    payload: String::new(),
                });
            }
            for (&i, result) in misses.iter().zip(response.results) {
                // the trait contract is answers in request order
                if result.id != request.items[i].id {
                    return Err(JudgeError::Protocol {
                        detail: format!(
                            "inner judge answered {:?} where {:?} was expected",
                            result.id, request.items[i].id
                        ),
                        payload: String::new(),
                    });
                }
                self.write(&keys[i], request.task, &result)?;
                answers[i] = Some(result);
            }
        }

        Ok(JudgeResponse {
            results: answers.into_iter().map(|a| a.expect("filled")).collect(),
        })
    }

    fn model_id(&self) -> &str {
        self.inner.model_id()
    }
}

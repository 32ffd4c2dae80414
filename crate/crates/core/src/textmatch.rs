//! Text normalization, common-substring decomposition and coverage scoring.
//!
//! The coverage score between two texts is the total length of their
//! non-crossing matched substrings divided by the length of the shorter
//! text. Matched substrings are found by recursive longest-common-substring
//! decomposition: find the longest common substring, then recurse on the
//! left remainders and the right remainders, discarding blocks shorter
//! than `min_block_len`.

use unicode_normalization::UnicodeNormalization;

/// Knobs for text matching. `tau` is the coverage threshold gating greedy
/// assignments downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchConfig {
    pub tau: f64,
    pub min_block_len: usize,
    pub case_sensitive: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            tau: 0.30,
            min_block_len: 2,
            case_sensitive: true,
        }
    }
}

impl MatchConfig {
    /// Rejects thresholds outside (0, 1) and a zero block length.
    pub fn validate(&self) -> Result<(), crate::EvalError> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(crate::EvalError::Config(format!(
                "tau must be in (0, 1), got {}",
                self.tau
            )));
        }
        if self.min_block_len == 0 {
            return Err(crate::EvalError::Config(
                "min_block_len must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// A normalized text: NFC, whitespace runs collapsed to single spaces,
/// trimmed, and case-folded when the config is case-insensitive.
///
/// Equality is over the normalized content; `original_length` is
/// provenance metadata and does not participate.
#[derive(Debug, Clone)]
pub struct NormText {
    text: String,
    chars: Vec<char>,
    original_length: usize,
}

impl PartialEq for NormText {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text
    }
}

impl Eq for NormText {}

impl NormText {
    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub(crate) fn chars(&self) -> &[char] {
        &self.chars
    }

    /// Length in unicode scalar values (not bytes).
    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    /// Character count of the raw input before normalization.
    pub fn original_length(&self) -> usize {
        self.original_length
    }
}

impl std::fmt::Display for NormText {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.text)
    }
}

/// One matched substring: `len` characters starting at `pos_a` in the first
/// text and `pos_b` in the second. Blocks of one decomposition never cross.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchBlock {
    pub pos_a: usize,
    pub pos_b: usize,
    pub len: usize,
}

/// NFC-normalizes, collapses whitespace runs, trims, and folds case when
/// `config.case_sensitive` is false.
pub fn normalize_text(raw: &str, config: &MatchConfig) -> NormText {
    let original_length = raw.chars().count();
    let nfc: String = raw.nfc().collect();
    let collapsed = nfc.split_whitespace().collect::<Vec<_>>().join(" ");
    let text = if config.case_sensitive {
        collapsed
    } else {
        collapsed.to_lowercase()
    };
    let chars = text.chars().collect();
    NormText {
        text,
        chars,
        original_length,
    }
}

/// Longest common substring of `a` and `b` as (pos_a, pos_b, len).
/// Ties break to the leftmost position in `a`, then in `b`.
fn longest_common_block(a: &[char], b: &[char]) -> (usize, usize, usize) {
    if a.is_empty() || b.is_empty() {
        return (0, 0, 0);
    }
    let mut best = (0usize, 0usize, 0usize);
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        for (j, &cb) in b.iter().enumerate() {
            if ca == cb {
                let run = prev[j] + 1;
                cur[j + 1] = run;
                let pa = i + 1 - run;
                let pb = j + 1 - run;
                if run > best.2 || (run == best.2 && (pa, pb) < (best.0, best.1)) {
                    best = (pa, pb, run);
                }
            } else {
                cur[j + 1] = 0;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// Non-crossing matched substrings between `a` and `b`, in ascending
/// position order. Deterministic for identical inputs and config.
pub fn matching_blocks(a: &NormText, b: &NormText, config: &MatchConfig) -> Vec<MatchBlock> {
    let mut out = Vec::new();
    if a.is_empty() || b.is_empty() {
        return out;
    }
    // Explicit worklist instead of recursion: block counts can grow linearly
    // with text length.
    let mut stack = vec![(0usize, a.len(), 0usize, b.len())];
    while let Some((alo, ahi, blo, bhi)) = stack.pop() {
        if alo >= ahi || blo >= bhi {
            continue;
        }
        let (pa, pb, len) = longest_common_block(&a.chars()[alo..ahi], &b.chars()[blo..bhi]);
        if len < config.min_block_len {
            continue;
        }
        let (pa, pb) = (pa + alo, pb + blo);
        out.push(MatchBlock { pos_a: pa, pos_b: pb, len });
        stack.push((alo, pa, blo, pb));
        stack.push((pa + len, ahi, pb + len, bhi));
    }
    out.sort_by_key(|blk| blk.pos_a);
    out
}

/// Total matched length divided by the shorter text's length.
/// Both inputs empty scores 1.0; exactly one empty scores 0.0.
///
/// Blocks are computed over a canonical argument order (shorter text, then
/// lexicographic, first): tie-breaking in the decomposition depends on
/// argument order, and the canonical order makes the score exactly
/// symmetric.
pub fn coverage_score(a: &NormText, b: &NormText, config: &MatchConfig) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (x, y) = if (a.len(), a.as_str()) <= (b.len(), b.as_str()) {
        (a, b)
    } else {
        (b, a)
    };
    let matched: usize = matching_blocks(x, y, config).iter().map(|m| m.len).sum();
    matched as f64 / a.len().min(b.len()) as f64
}

/// Case-insensitive canonical form: NFC, whitespace collapsed, lowercased.
/// Shared by semantic matchers that compare entity names and short texts.
pub fn fold_text(raw: &str) -> String {
    let nfc: String = raw.nfc().collect();
    nfc.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Jaccard similarity of the folded whitespace-token sets of two texts.
/// Two texts with no tokens at all agree vacuously at 1.0.
pub fn token_jaccard(a: &str, b: &str) -> f64 {
    let fa = fold_text(a);
    let fb = fold_text(b);
    let ta: std::collections::BTreeSet<&str> = fa.split_whitespace().collect();
    let tb: std::collections::BTreeSet<&str> = fb.split_whitespace().collect();
    if ta.is_empty() && tb.is_empty() {
        return 1.0;
    }
    let intersection = ta.intersection(&tb).count();
    let union = ta.union(&tb).count();
    intersection as f64 / union as f64
}

/// Length-weighted average center of `piece`'s matched substrings within
/// `host`. Pieces with no match get `f64::INFINITY` so they sort last.
pub fn weighted_match_position(piece: &NormText, host: &NormText, config: &MatchConfig) -> f64 {
    let blocks = matching_blocks(piece, host, config);
    let total: usize = blocks.iter().map(|m| m.len).sum();
    if total == 0 {
        return f64::INFINITY;
    }
    let weighted: f64 = blocks
        .iter()
        .map(|m| m.len as f64 * (m.pos_b as f64 + m.len as f64 / 2.0))
        .sum();
    weighted / total as f64
}

//! Character- and word-level metrics over weave results.
//!
//! Matched characters are counted per aligned super-block pair; unmatched
//! blocks contribute zero matches, count as insertions (prediction side) or
//! deletions (ground-truth side) in the error rates, and extend the
//! character totals. Word metrics mirror the character metrics over
//! whitespace tokens, with per-pair longest-common-subsequence matching.

use serde::{Deserialize, Serialize};

use crate::blockweaver::WeaveResult;
use crate::textmatch::{matching_blocks, MatchConfig, NormText};
use crate::EvalError;

/// Unit-cost insert/delete/substitute distance over unicode scalar values.
pub fn levenshtein(a: &NormText, b: &NormText) -> usize {
    edit_distance(a.chars(), b.chars())
}

/// Edit distance over arbitrary comparable slices (characters, tokens).
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = if ca == cb { diag } else { diag + 1 };
            diag = row[j + 1];
            row[j + 1] = cost.min(row[j] + 1).min(diag + 1);
        }
    }
    row[b.len()]
}

/// Longest common subsequence length over comparable slices.
fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut row = vec![0usize; b.len() + 1];
    for ca in a {
        let mut diag = 0;
        for (j, cb) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if ca == cb {
                diag + 1
            } else {
                up.max(row[j])
            };
            diag = up;
        }
    }
    row[b.len()]
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-sample OCR metrics. `cer`/`wer` are `None` when the ground truth is
/// empty but the prediction is not (the rate has no denominator; the F1
/// side still penalizes the hallucinated text). `vacuous` marks samples
/// with no text on either side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrSampleMetrics {
    pub cer: Option<f64>,
    pub wer: Option<f64>,
    pub char_precision: f64,
    pub char_recall: f64,
    pub char_f1: f64,
    pub word_precision: f64,
    pub word_recall: f64,
    pub word_f1: f64,
    pub matched_chars: usize,
    pub pred_chars: usize,
    pub gt_chars: usize,
    pub char_edits: usize,
    pub matched_words: usize,
    pub pred_words: usize,
    pub gt_words: usize,
    pub word_edits: usize,
    pub vacuous: bool,
}

impl OcrSampleMetrics {
    fn vacuous_sample() -> Self {
        OcrSampleMetrics {
            cer: Some(0.0),
            wer: Some(0.0),
            char_precision: 1.0,
            char_recall: 1.0,
            char_f1: 1.0,
            word_precision: 1.0,
            word_recall: 1.0,
            word_f1: 1.0,
            matched_chars: 0,
            pred_chars: 0,
            gt_chars: 0,
            char_edits: 0,
            matched_words: 0,
            pred_words: 0,
            gt_words: 0,
            word_edits: 0,
            vacuous: true,
        }
    }
}

fn words(text: &NormText) -> Vec<&str> {
    text.as_str().split_whitespace().collect()
}

/// Computes sample metrics from a weave result.
pub fn sample_metrics(weave: &WeaveResult, config: &MatchConfig) -> OcrSampleMetrics {
    let mut matched_chars = 0usize;
    let mut pred_chars = 0usize;
    let mut gt_chars = 0usize;
    let mut char_edits = 0usize;
    let mut matched_words = 0usize;
    let mut pred_words = 0usize;
    let mut gt_words = 0usize;
    let mut word_edits = 0usize;

    for (sp, sg) in &weave.pairs {
        matched_chars += matching_blocks(&sp.text, &sg.text, config)
            .iter()
            .map(|m| m.len)
            .sum::<usize>();
        pred_chars += sp.text.len();
        gt_chars += sg.text.len();
        char_edits += levenshtein(&sp.text, &sg.text);

        let sp_words = words(&sp.text);
        let sg_words = words(&sg.text);
        matched_words += lcs_len(&sp_words, &sg_words);
        pred_words += sp_words.len();
        gt_words += sg_words.len();
        word_edits += edit_distance(&sp_words, &sg_words);
    }
    for block in &weave.unmatched_pred {
        pred_chars += block.text.len();
        char_edits += block.text.len();
        let n = words(&block.text).len();
        pred_words += n;
        word_edits += n;
    }
    for block in &weave.unmatched_gt {
        gt_chars += block.text.len();
        char_edits += block.text.len();
        let n = words(&block.text).len();
        gt_words += n;
        word_edits += n;
    }

    if pred_chars == 0 && gt_chars == 0 {
        return OcrSampleMetrics::vacuous_sample();
    }

    derive_metrics(
        matched_chars,
        pred_chars,
        gt_chars,
        char_edits,
        matched_words,
        pred_words,
        gt_words,
        word_edits,
    )
}

#[allow(clippy::too_many_arguments)]
fn derive_metrics(
    matched_chars: usize,
    pred_chars: usize,
    gt_chars: usize,
    char_edits: usize,
    matched_words: usize,
    pred_words: usize,
    gt_words: usize,
    word_edits: usize,
) -> OcrSampleMetrics {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let char_precision = ratio(matched_chars, pred_chars);
    let char_recall = ratio(matched_chars, gt_chars);
    let word_precision = ratio(matched_words, pred_words);
    let word_recall = ratio(matched_words, gt_words);
    let cer = (gt_chars > 0).then(|| char_edits as f64 / gt_chars as f64);
    let wer = (gt_words > 0).then(|| word_edits as f64 / gt_words as f64);
    OcrSampleMetrics {
        cer,
        wer,
        char_precision,
        char_recall,
        char_f1: harmonic(char_precision, char_recall),
        word_precision,
        word_recall,
        word_f1: harmonic(word_precision, word_recall),
        matched_chars,
        pred_chars,
        gt_chars,
        char_edits,
        matched_words,
        pred_words,
        gt_words,
        word_edits,
        vacuous: false,
    }
}

/// Corpus metrics under both aggregation conventions: the per-sample
/// average (arithmetic mean over non-vacuous samples) and the corpus level
/// (recomputed from pooled counts, never averaged ratios).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrCorpusMetrics {
    pub per_sample_average: OcrSampleMetrics,
    pub corpus_level: OcrSampleMetrics,
    pub sample_count: usize,
    pub vacuous_count: usize,
}

/// Aggregates sample metrics. Errors on an empty list or when every sample
/// is vacuous.
pub fn corpus_aggregate(samples: &[OcrSampleMetrics]) -> Result<OcrCorpusMetrics, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::NoSamples("no samples".into()));
    }
    let scorable: Vec<&OcrSampleMetrics> = samples.iter().filter(|s| !s.vacuous).collect();
    if scorable.is_empty() {
        return Err(EvalError::NoSamples("no scorable samples".into()));
    }

    let mean = |get: &dyn Fn(&OcrSampleMetrics) -> f64| {
        scorable.iter().map(|s| get(s)).sum::<f64>() / scorable.len() as f64
    };
    let mean_opt = |get: &dyn Fn(&OcrSampleMetrics) -> Option<f64>| {
        let vals: Vec<f64> = scorable.iter().filter_map(|s| get(s)).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    let total = |get: &dyn Fn(&OcrSampleMetrics) -> usize| {
        samples.iter().map(get).sum::<usize>()
    };

    let pooled = derive_metrics(
        total(&|s| s.matched_chars),
        total(&|s| s.pred_chars),
        total(&|s| s.gt_chars),
        total(&|s| s.char_edits),
        total(&|s| s.matched_words),
        total(&|s| s.pred_words),
        total(&|s| s.gt_words),
        total(&|s| s.word_edits),
    );

    let per_sample_average = OcrSampleMetrics {
        cer: mean_opt(&|s| s.cer),
        wer: mean_opt(&|s| s.wer),
        char_precision: mean(&|s| s.char_precision),
        char_recall: mean(&|s| s.char_recall),
        char_f1: mean(&|s| s.char_f1),
        word_precision: mean(&|s| s.word_precision),
        word_recall: mean(&|s| s.word_recall),
        word_f1: mean(&|s| s.word_f1),
        ..pooled.clone()
    };

    Ok(OcrCorpusMetrics {
        per_sample_average,
        corpus_level: pooled,
        sample_count: samples.len(),
        vacuous_count: samples.len() - scorable.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockweaver::weave;
    use crate::textmatch::normalize_text;

    fn strings(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn levenshtein_classic() {
        let cfg = MatchConfig::default();
        let a = normalize_text("kitten", &cfg);
        let b = normalize_text("sitting", &cfg);
        assert_eq!(levenshtein(&a, &b), 3);
        assert_eq!(levenshtein(&a, &a), 0);
        assert_eq!(levenshtein(&normalize_text("", &cfg), &normalize_text("abc", &cfg)), 3);
    }

    #[test]
    fn perfect_reconstruction_scores_clean() {
        let cfg = MatchConfig::default();
        let w = weave(
            &strings(&["Hello World", "Today"]),
            &strings(&["Hello World Today"]),
            &cfg,
        );
        let m = sample_metrics(&w, &cfg);
        assert_eq!(m.cer, Some(0.0));
        assert_eq!(m.char_f1, 1.0);
        assert_eq!(m.word_f1, 1.0);
        assert!(!m.vacuous);
    }

    #[test]
    fn single_substitution_pair() {
        let cfg = MatchConfig::default();
        let w = weave(&strings(&["SALE 5O% OFF"]), &strings(&["SALE 50% OFF"]), &cfg);
        let m = sample_metrics(&w, &cfg);
        assert_eq!(m.matched_chars, 11);
        assert!((m.cer.unwrap() - 1.0 / 12.0).abs() < 1e-9);
        assert!((m.char_f1 - 11.0 / 12.0).abs() < 1e-9);
    }

    #[test]
    fn unmatched_gt_counts_as_deletions() {
        let cfg = MatchConfig::default();
        let w = weave(
            &strings(&["Fresh Coffee"]),
            &strings(&["Fresh Coffee", "Daily"]),
            &cfg,
        );
        assert_eq!(w.pairs.len(), 1);
        assert_eq!(w.unmatched_gt.len(), 1);
        let m = sample_metrics(&w, &cfg);
        assert_eq!(m.matched_chars, 12);
        assert_eq!(m.gt_chars, 17);
        assert_eq!(m.pred_chars, 12);
        assert_eq!(m.char_precision, 1.0);
        assert!((m.char_recall - 12.0 / 17.0).abs() < 1e-9);
        assert!((m.char_f1 - 24.0 / 29.0).abs() < 1e-9);
        assert!((m.cer.unwrap() - 5.0 / 17.0).abs() < 1e-9);
    }

    #[test]
    fn empty_both_sides_is_vacuous() {
        let cfg = MatchConfig::default();
        let w = weave(&[], &[], &cfg);
        let m = sample_metrics(&w, &cfg);
        assert!(m.vacuous);
        assert_eq!(m.cer, Some(0.0));
        assert_eq!(m.char_f1, 1.0);
    }

    #[test]
    fn hallucinated_text_without_gt() {
        let cfg = MatchConfig::default();
        let w = weave(&strings(&["ghost text"]), &[], &cfg);
        let m = sample_metrics(&w, &cfg);
        assert!(!m.vacuous);
        assert_eq!(m.cer, None);
        assert_eq!(m.char_f1, 0.0);
    }

    #[test]
    fn corpus_average_and_pooled_differ() {
        let cfg = MatchConfig::default();
        let perfect = sample_metrics(&weave(&strings(&["ab cd"]), &strings(&["ab cd"]), &cfg), &cfg);
        let half = sample_metrics(&weave(&strings(&["ab"]), &strings(&["ab", "cd"]), &cfg), &cfg);
        assert_eq!(perfect.char_f1, 1.0);
        let agg = corpus_aggregate(&[perfect, half]).unwrap();
        assert!(agg.per_sample_average.char_f1 < 1.0);
        assert_eq!(
            agg.corpus_level.matched_chars,
            agg.corpus_level.pred_chars.min(agg.corpus_level.gt_chars)
        );
    }

    #[test]
    fn corpus_average_of_equal_sized_samples() {
        let cfg = MatchConfig::default();
        let perfect = sample_metrics(&weave(&strings(&["abcd"]), &strings(&["abcd"]), &cfg), &cfg);
        let half = sample_metrics(&weave(&strings(&["abxy"]), &strings(&["abcd"]), &cfg), &cfg);
        assert_eq!(perfect.char_f1, 1.0);
        assert_eq!(half.char_f1, 0.5);
        let agg = corpus_aggregate(&[perfect, half]).unwrap();
        assert!((agg.per_sample_average.char_f1 - 0.75).abs() < 1e-12);
        // pooled route: 6 matched of 8 on each side
        assert!((agg.corpus_level.char_f1 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn corpus_single_sample_pools_to_itself() {
        let cfg = MatchConfig::default();
        let m = sample_metrics(
            &weave(&strings(&["abc def"]), &strings(&["abc xyz"]), &cfg),
            &cfg,
        );
        let agg = corpus_aggregate(std::slice::from_ref(&m)).unwrap();
        assert_eq!(agg.per_sample_average.char_f1, m.char_f1);
        assert_eq!(agg.corpus_level, m);
    }

    #[test]
    fn corpus_errors() {
        assert!(matches!(corpus_aggregate(&[]), Err(EvalError::NoSamples(_))));
        let all_vacuous = vec![OcrSampleMetrics::vacuous_sample()];
        assert!(matches!(
            corpus_aggregate(&all_vacuous),
            Err(EvalError::NoSamples(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn edit_distance_bounds(a in "[a-c]{0,12}", b in "[a-c]{0,12}") {
                let av: Vec<char> = a.chars().collect();
                let bv: Vec<char> = b.chars().collect();
                let d = edit_distance(&av, &bv);
                prop_assert!(d >= av.len().abs_diff(bv.len()));
                prop_assert!(d <= av.len().max(bv.len()));
            }

            #[test]
            fn matched_chars_bounded(
                pred in proptest::collection::vec("[a-d ]{0,10}", 0..6),
                gt in proptest::collection::vec("[a-d ]{0,10}", 0..6),
            ) {
                let cfg = MatchConfig::default();
                let m = sample_metrics(&weave(&pred, &gt, &cfg), &cfg);
                prop_assert!(m.matched_chars <= m.pred_chars.min(m.gt_chars));
                prop_assert!(m.char_precision <= 1.0 && m.char_recall <= 1.0);
            }

            // CER is zero exactly when every pair agrees and no unmatched
            // block carries any text.
            #[test]
            fn cer_zero_characterization(
                pred in proptest::collection::vec("[a-c ]{0,8}", 0..5),
                gt in proptest::collection::vec("[a-c ]{0,8}", 0..5),
            ) {
                let cfg = MatchConfig::default();
                let w = weave(&pred, &gt, &cfg);
                let m = sample_metrics(&w, &cfg);
                let clean = w.pairs.iter().all(|(sp, sg)| sp.text == sg.text)
                    && w.unmatched_pred.iter().all(|b| b.text.is_empty())
                    && w.unmatched_gt.iter().all(|b| b.text.is_empty());
                prop_assert_eq!(m.cer == Some(0.0), clean);
            }
        }
    }
}

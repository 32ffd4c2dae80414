//! Greedy weaving of unordered, variably-grouped text blocks.
//!
//! Prediction and ground-truth OCR blocks rarely segment the same text the
//! same way: one side may emit "Hello World" and "Today" where the other
//! holds a single "Hello World Today" block. Weaving resolves these
//! one-to-many and many-to-one groupings into matched super-block pairs in
//! four passes:
//!
//! 1. assign each prediction block to its best-covered ground-truth block,
//! 2. merge co-assigned predictions into ordered super-prediction-blocks,
//! 3. bucket leftover ground-truth blocks under their best super-block,
//! 4. merge each bucket into an ordered super-GT-block.
//!
//! All ties break to the lowest block index, so output is deterministic.

use std::collections::BTreeMap;

use crate::textmatch::{
    coverage_score, normalize_text, weighted_match_position, MatchConfig, NormText,
};

/// A source block with its position in the input list. Indices are unique
/// within one side and survive into the output for provenance.
#[derive(Debug, Clone)]
pub struct TextBlock {
    pub index: usize,
    pub text: NormText,
}

/// Step 1 output: a partial map from prediction index to ground-truth index.
/// Every prediction index appears exactly once, either in the map or in
/// `unmatched_pred`.
#[derive(Debug, Clone, Default)]
pub struct Assignment {
    pub assigned: BTreeMap<usize, usize>,
    pub unmatched_pred: Vec<usize>,
}

/// Several source blocks joined into one text, space-separated, in match
/// order. `text` always equals the single-space join of the member texts.
#[derive(Debug, Clone)]
pub struct SuperBlock {
    pub text: NormText,
    pub members: Vec<usize>,
}

/// Step 3 output: for each seed ground-truth index, the ground-truth indices
/// collected under its super-prediction-block (seed included).
#[derive(Debug, Clone, Default)]
pub struct Buckets {
    pub by_seed: BTreeMap<usize, Vec<usize>>,
    pub unmatched_gt: Vec<usize>,
}

/// Final weave: matched super-block pairs plus both unmatched sets.
/// Together they partition the input indices — nothing is duplicated or
/// dropped.
#[derive(Debug, Clone, Default)]
pub struct WeaveResult {
    pub pairs: Vec<(SuperBlock, SuperBlock)>,
    pub unmatched_pred: Vec<TextBlock>,
    pub unmatched_gt: Vec<TextBlock>,
}

/// Normalizes raw block texts into indexed [`TextBlock`]s.
pub fn normalize_blocks(texts: &[String], config: &MatchConfig) -> Vec<TextBlock> {
    texts
        .iter()
        .enumerate()
        .map(|(index, raw)| TextBlock {
            index,
            text: normalize_text(raw, config),
        })
        .collect()
}

/// Step 1: each prediction goes to the ground-truth block with the highest
/// coverage score, provided it exceeds `config.tau`. Ties take the lowest
/// ground-truth index.
pub fn step1_assign(pred: &[TextBlock], gt: &[TextBlock], config: &MatchConfig) -> Assignment {
    let mut assignment = Assignment::default();
    for p in pred {
        let mut best: Option<(usize, f64)> = None;
        for g in gt {
            let score = coverage_score(&p.text, &g.text, config);
            let better = match best {
                None => true,
                Some((_, s)) => score > s,
            };
            if better {
                best = Some((g.index, score));
            }
        }
        match best {
            Some((g_index, score)) if score > config.tau => {
                assignment.assigned.insert(p.index, g_index);
            }
            _ => assignment.unmatched_pred.push(p.index),
        }
    }
    assignment
}

fn join_blocks(texts: &[&NormText], config: &MatchConfig) -> NormText {
    let joined = texts
        .iter()
        .map(|t| t.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    normalize_text(&joined, config)
}

/// Step 2: co-assigned predictions are ordered by their weighted match
/// position inside the ground-truth text (unmatchable pieces last, ties by
/// prediction index) and joined with single spaces.
pub fn step2_super_predictions(
    assignment: &Assignment,
    pred: &[TextBlock],
    gt: &[TextBlock],
    config: &MatchConfig,
) -> BTreeMap<usize, SuperBlock> {
    let mut grouped: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&p_index, &g_index) in &assignment.assigned {
        grouped.entry(g_index).or_default().push(p_index);
    }
    let mut supers = BTreeMap::new();
    for (g_index, mut members) in grouped {
        let host = &gt[g_index].text;
        let mut keyed: Vec<(f64, usize)> = members
            .drain(..)
            .map(|p| (weighted_match_position(&pred[p].text, host, config), p))
            .collect();
        keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let members: Vec<usize> = keyed.into_iter().map(|(_, p)| p).collect();
        let texts: Vec<&NormText> = members.iter().map(|&p| &pred[p].text).collect();
        let text = join_blocks(&texts, config);
        supers.insert(g_index, SuperBlock { text, members });
    }
    supers
}

/// Step 3: each still-unmatched ground-truth block (in input order) joins
/// the bucket of the super-prediction-block that covers it best, when that
/// coverage exceeds `config.tau`. Ties take the lowest seed index.
pub fn step3_bucketize(
    supers: &BTreeMap<usize, SuperBlock>,
    gt_unmatched: &[&TextBlock],
    config: &MatchConfig,
) -> Buckets {
    let mut buckets = Buckets::default();
    for &seed in supers.keys() {
        buckets.by_seed.insert(seed, vec![seed]);
    }
    for g in gt_unmatched {
        let mut best: Option<(usize, f64)> = None;
        for (&seed, sp) in supers {
            let score = coverage_score(&g.text, &sp.text, config);
            let better = match best {
                None => true,
                Some((_, s)) => score > s,
            };
            if better {
                best = Some((seed, score));
            }
        }
        match best {
            Some((seed, score)) if score > config.tau => {
                buckets.by_seed.get_mut(&seed).expect("seed bucket").push(g.index);
            }
            _ => buckets.unmatched_gt.push(g.index),
        }
    }
    buckets
}

/// Step 4: bucket members are ordered by weighted match position against
/// their super-prediction-block (ties by ground-truth index) and joined
/// into super-GT-blocks. Pairs come out in seed order.
pub fn step4_super_gt(
    buckets: &Buckets,
    supers: &BTreeMap<usize, SuperBlock>,
    pred: &[TextBlock],
    gt: &[TextBlock],
    assignment: &Assignment,
    config: &MatchConfig,
) -> WeaveResult {
    let mut result = WeaveResult::default();
    for (&seed, members) in &buckets.by_seed {
        let sp = supers.get(&seed).expect("super block for seed");
        let mut keyed: Vec<(f64, usize)> = members
            .iter()
            .map(|&g| (weighted_match_position(&gt[g].text, &sp.text, config), g))
            .collect();
        keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let ordered: Vec<usize> = keyed.into_iter().map(|(_, g)| g).collect();
        let texts: Vec<&NormText> = ordered.iter().map(|&g| &gt[g].text).collect();
        let sg = SuperBlock {
            text: join_blocks(&texts, config),
            members: ordered,
        };
        result.pairs.push((sp.clone(), sg));
    }
    result.unmatched_pred = assignment
        .unmatched_pred
        .iter()
        .map(|&p| pred[p].clone())
        .collect();
    result.unmatched_gt = buckets.unmatched_gt.iter().map(|&g| gt[g].clone()).collect();
    result
}

/// Runs the four steps over raw block texts.
pub fn weave(pred_texts: &[String], gt_texts: &[String], config: &MatchConfig) -> WeaveResult {
    let pred = normalize_blocks(pred_texts, config);
    let gt = normalize_blocks(gt_texts, config);
    let assignment = step1_assign(&pred, &gt, config);
    let supers = step2_super_predictions(&assignment, &pred, &gt, config);
    let seeded: std::collections::BTreeSet<usize> = supers.keys().copied().collect();
    let gt_unmatched: Vec<&TextBlock> =
        gt.iter().filter(|g| !seeded.contains(&g.index)).collect();
    let buckets = step3_bucketize(&supers, &gt_unmatched, config);
    step4_super_gt(&buckets, &supers, &pred, &gt, &assignment, config)
}

impl WeaveResult {
    /// Checks the partition invariant: every input index appears exactly
    /// once across the pairs and the unmatched sets.
    pub fn is_partition(&self, pred_count: usize, gt_count: usize) -> bool {
        let mut pred_seen = vec![0usize; pred_count];
        let mut gt_seen = vec![0usize; gt_count];
        for (sp, sg) in &self.pairs {
            for &p in &sp.members {
                if p >= pred_count {
                    return false;
                }
                pred_seen[p] += 1;
            }
            for &g in &sg.members {
                if g >= gt_count {
                    return false;
                }
                gt_seen[g] += 1;
            }
        }
        for b in &self.unmatched_pred {
            if b.index >= pred_count {
                return false;
            }
            pred_seen[b.index] += 1;
        }
        for b in &self.unmatched_gt {
            if b.index >= gt_count {
                return false;
            }
            gt_seen[b.index] += 1;
        }
        pred_seen.iter().all(|&n| n == 1) && gt_seen.iter().all(|&n| n == 1)
    }
}

//! Spatial 3x3 grid cells and temporal labels with Jaccard scoring.
//!
//! Localization is compared as sets: grid cells for position, interval
//! labels for time. Bounding boxes and timestamps are out of scope.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// One of the nine cells of the spatial grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridCell {
    TopLeft,
    TopCenter,
    TopRight,
    MiddleLeft,
    Center,
    MiddleRight,
    BottomLeft,
    BottomCenter,
    BottomRight,
}

impl GridCell {
    pub const ALL: [GridCell; 9] = [
        GridCell::TopLeft,
        GridCell::TopCenter,
        GridCell::TopRight,
        GridCell::MiddleLeft,
        GridCell::Center,
        GridCell::MiddleRight,
        GridCell::BottomLeft,
        GridCell::BottomCenter,
        GridCell::BottomRight,
    ];

    /// Canonical lowercase hyphenated name, used in all emitted JSON.
    pub fn name(&self) -> &'static str {
        match self {
            GridCell::TopLeft => "top-left",
            GridCell::TopCenter => "top-center",
            GridCell::TopRight => "top-right",
            GridCell::MiddleLeft => "middle-left",
            GridCell::Center => "center",
            GridCell::MiddleRight => "middle-right",
            GridCell::BottomLeft => "bottom-left",
            GridCell::BottomCenter => "bottom-center",
            GridCell::BottomRight => "bottom-right",
        }
    }

    /// Case-insensitive parse accepting canonical names plus documented
    /// synonyms ("top" means top-center, "middle-center" means center, and
    /// so on). Anything else is rejected.
    pub fn parse(raw: &str) -> Option<GridCell> {
        let folded = raw.trim().to_lowercase();
        let cell = match folded.as_str() {
            "top-left" => GridCell::TopLeft,
            "top-center" | "top" | "top-middle" => GridCell::TopCenter,
            "top-right" => GridCell::TopRight,
            "middle-left" | "left" | "center-left" => GridCell::MiddleLeft,
            "center" | "middle" | "middle-center" | "center-center" => GridCell::Center,
            "middle-right" | "right" | "center-right" => GridCell::MiddleRight,
            "bottom-left" => GridCell::BottomLeft,
            "bottom-center" | "bottom" | "bottom-middle" => GridCell::BottomCenter,
            "bottom-right" => GridCell::BottomRight,
            _ => return None,
        };
        Some(cell)
    }
}

impl std::fmt::Display for GridCell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Temporal presence label for video entities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalLabel {
    Start,
    Mid,
    End,
    Inter,
}

impl TemporalLabel {
    pub fn name(&self) -> &'static str {
        match self {
            TemporalLabel::Start => "start",
            TemporalLabel::Mid => "mid",
            TemporalLabel::End => "end",
            TemporalLabel::Inter => "inter",
        }
    }

    pub fn parse(raw: &str) -> Option<TemporalLabel> {
        let folded = raw.trim().to_lowercase();
        let label = match folded.as_str() {
            "start" => TemporalLabel::Start,
            "mid" | "middle" => TemporalLabel::Mid,
            "end" => TemporalLabel::End,
            "inter" | "intermittent" => TemporalLabel::Inter,
            _ => return None,
        };
        Some(label)
    }
}

impl std::fmt::Display for TemporalLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Set of grid cells occupied by an entity.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GridSet(pub BTreeSet<GridCell>);

/// Set of temporal labels for an entity; empty on image records.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemporalSet(pub BTreeSet<TemporalLabel>);

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GridError {
    #[error("empty position")]
    Empty,
    #[error("unknown cell name: {0:?}")]
    UnknownCell(String),
    #[error("unknown temporal label: {0:?}")]
    UnknownLabel(String),
}

/// Parses raw position strings into a [`GridSet`], rejecting unknown names.
pub fn parse_grid(strings: &[String]) -> Result<GridSet, GridError> {
    if strings.is_empty() {
        return Err(GridError::Empty);
    }
    let mut cells = BTreeSet::new();
    for raw in strings {
        let cell = GridCell::parse(raw).ok_or_else(|| GridError::UnknownCell(raw.clone()))?;
        cells.insert(cell);
    }
    Ok(GridSet(cells))
}

/// Parses raw temporal label strings. An empty list is a valid empty set
/// (image records carry none).
pub fn parse_temporal(strings: &[String]) -> Result<TemporalSet, GridError> {
    let mut labels = BTreeSet::new();
    for raw in strings {
        let label =
            TemporalLabel::parse(raw).ok_or_else(|| GridError::UnknownLabel(raw.clone()))?;
        labels.insert(label);
    }
    Ok(TemporalSet(labels))
}

/// |a intersect b| / |a union b|; two empty sets agree vacuously at 1.0.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let intersection = a.intersection(b).count();
    let union = a.union(b).count();
    intersection as f64 / union as f64
}

impl GridSet {
    pub fn jaccard(&self, other: &GridSet) -> f64 {
        jaccard(&self.0, &other.0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Canonical names, sorted.
    pub fn to_strings(&self) -> Vec<String> {
        self.0.iter().map(|c| c.name().to_string()).collect()
    }
}

impl TemporalSet {
    pub fn jaccard(&self, other: &TemporalSet) -> f64 {
        jaccard(&self.0, &other.0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.0.iter().map(|l| l.name().to_string()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(items: &[&str]) -> Vec<String> {
        items.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn parse_known_cells() {
        let set = parse_grid(&s(&["top-left", "center"])).unwrap();
        assert_eq!(set.to_strings(), vec!["top-left", "center"].into_iter().map(String::from).collect::<Vec<_>>());
    }

    #[test]
    fn parse_rejects_unknown() {
        assert_eq!(
            parse_grid(&s(&["upper-left"])),
            Err(GridError::UnknownCell("upper-left".into()))
        );
    }

    #[test]
    fn parse_rejects_empty() {
        assert_eq!(parse_grid(&[]), Err(GridError::Empty));
    }

    #[test]
    fn parse_case_folds_and_dedupes() {
        let set = parse_grid(&s(&["CENTER", "center"])).unwrap();
        assert_eq!(set.0.len(), 1);
        assert!(set.0.contains(&GridCell::Center));
    }

    #[test]
    fn parse_synonyms() {
        assert_eq!(GridCell::parse("middle-center"), Some(GridCell::Center));
        assert_eq!(GridCell::parse("top"), Some(GridCell::TopCenter));
        assert_eq!(TemporalLabel::parse("intermittent"), Some(TemporalLabel::Inter));
    }

    #[test]
    fn jaccard_examples() {
        let a = parse_grid(&s(&["top-left", "center"])).unwrap();
        let b = parse_grid(&s(&["center", "bottom-right"])).unwrap();
        assert!((a.jaccard(&b) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(a.jaccard(&a), 1.0);
        let c = parse_grid(&s(&["top-right"])).unwrap();
        let d = parse_grid(&s(&["bottom-left"])).unwrap();
        assert_eq!(c.jaccard(&d), 0.0);
    }

    #[test]
    fn jaccard_vacuous_agreement() {
        assert_eq!(TemporalSet::default().jaccard(&TemporalSet::default()), 1.0);
    }

    #[test]
    fn all_512_grid_sets_round_trip() {
        for mask in 0u16..512 {
            let cells: BTreeSet<GridCell> = GridCell::ALL
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, c)| *c)
                .collect();
            let set = GridSet(cells);
            if set.is_empty() {
                continue;
            }
            let rendered = set.to_strings();
            let reparsed = parse_grid(&rendered).unwrap();
            assert_eq!(set, reparsed);
            assert_eq!(set.jaccard(&set), 1.0);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_set() -> impl Strategy<Value = BTreeSet<GridCell>> {
            (0u16..512).prop_map(|mask| {
                GridCell::ALL
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, c)| *c)
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn jaccard_symmetric(a in arb_set(), b in arb_set()) {
                prop_assert_eq!(jaccard(&a, &b), jaccard(&b, &a));
            }

            #[test]
            fn jaccard_monotone_shared_element(a in arb_set(), b in arb_set(), extra in 0usize..9) {
                let before = jaccard(&a, &b);
                let cell = GridCell::ALL[extra];
                let mut a2 = a.clone();
                let mut b2 = b.clone();
                a2.insert(cell);
                b2.insert(cell);
                prop_assert!(jaccard(&a2, &b2) >= before - 1e-12);
            }
        }
    }
}

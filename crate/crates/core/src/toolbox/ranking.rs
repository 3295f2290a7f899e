use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::scene::ObjectId;
use crate::statement::{Combinator, Relation};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub id: ObjectId,
    pub score: f64,
}

/// Where a ranking came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Relation { relation: Relation, anchors: Vec<ObjectId> },
    Compose { combinator: Combinator },
    Subtract { removed: Vec<ObjectId> },
    /// Candidates with no relation applied (bare descriptors, external answers).
    Unranked,
}

/// Candidates ordered best first: score descending, ties by ascending id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidates {
    entries: Vec<RankEntry>,
    provenance: Provenance,
}

pub(crate) fn entry_order(a: &RankEntry, b: &RankEntry) -> Ordering {
    b.score.total_cmp(&a.score).then(a.id.cmp(&b.id))
}

impl RankedCandidates {
    /// Sorts into canonical order. Scores must be finite; `-0.0` is folded
    /// into `0.0` so sign-of-zero never breaks a tie.
    pub fn new(entries: impl IntoIterator<Item = (ObjectId, f64)>, provenance: Provenance) -> Self {
        let mut entries: Vec<RankEntry> = entries
            .into_iter()
            .map(|(id, score)| {
                debug_assert!(score.is_finite(), "non-finite score for {id}");
                RankEntry { id, score: score + 0.0 }
            })
            .collect();
        entries.sort_by(entry_order);
        Self { entries, provenance }
    }

    /// Keeps the given order; scores are `-index` so the order is canonical.
    pub fn from_order(ids: impl IntoIterator<Item = ObjectId>, provenance: Provenance) -> Self {
        let entries = ids
            .into_iter()
            .enumerate()
            .map(|(i, id)| RankEntry { id, score: -(i as f64) + 0.0 })
            .collect();
        Self { entries, provenance }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn entries(&self) -> &[RankEntry] {
        &self.entries
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn ids(&self) -> Vec<ObjectId> {
        self.entries.iter().map(|e| e.id).collect()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.score).collect()
    }

    pub fn top(&self) -> Option<ObjectId> {
        self.entries.first().map(|e| e.id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn score_of(&self, id: ObjectId) -> Option<f64> {
        self.entries.iter().find(|e| e.id == id).map(|e| e.score)
    }

    pub fn contains(&self, id: ObjectId) -> bool {
        self.entries.iter().any(|e| e.id == id)
    }

    /// Gap between the best and second-best score, infinite for a single entry.
    pub fn margin(&self) -> f64 {
        match self.entries.as_slice() {
            [] => 0.0,
            [_] => f64::INFINITY,
            [a, b, ..] => a.score - b.score,
        }
    }
}

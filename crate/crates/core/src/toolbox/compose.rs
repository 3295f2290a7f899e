use std::collections::BTreeMap;

use super::ranking::{Provenance, RankedCandidates};
use super::ToolboxError;
use crate::scene::ObjectId;
use crate::statement::Combinator;

/// Rank-normalized score in `[0, 1]`: the share of other entries with a
/// strictly lower score. Tied entries share a value.
fn normalized(r: &RankedCandidates) -> BTreeMap<ObjectId, f64> {
    let n = r.len();
    let entries = r.entries();
    entries
        .iter()
        .map(|e| {
            if n == 1 {
                return (e.id, 1.0);
            }
            let lower = entries.iter().filter(|o| o.score < e.score).count();
            (e.id, lower as f64 / (n - 1) as f64)
        })
        .collect()
}

/// Intersect keeps ids present in every input and sums their normalized
/// scores; union keeps ids in any input with their best raw score. A single
/// input is returned unchanged.
pub fn compose(results: &[RankedCandidates], combinator: Combinator) -> Result<RankedCandidates, ToolboxError> {
    match results {
        [] => Err(ToolboxError::NothingToCompose),
        [only] => Ok(only.clone()),
        _ => {
            let provenance = Provenance::Compose { combinator };
            Ok(match combinator {
                Combinator::Intersect => {
                    let norms: Vec<BTreeMap<ObjectId, f64>> = results.iter().map(normalized).collect();
                    let entries = norms[0].keys().filter_map(|id| {
                        norms.iter().map(|m| m.get(id)).sum::<Option<f64>>().map(|s| (*id, s))
                    });
                    RankedCandidates::new(entries.collect::<Vec<_>>(), provenance)
                }
                Combinator::Union => {
                    let mut best: BTreeMap<ObjectId, f64> = BTreeMap::new();
                    for e in results.iter().flat_map(|r| r.entries()) {
                        best.entry(e.id).and_modify(|s| *s = s.max(e.score)).or_insert(e.score);
                    }
                    RankedCandidates::new(best, provenance)
                }
            })
        }
    }
}

/// Removes the best match of a negated relation unless it is the only
/// remaining candidate.
pub fn subtract(result: &RankedCandidates, negated: &RankedCandidates) -> RankedCandidates {
    let removed: Vec<ObjectId> = negated
        .top()
        .filter(|id| result.contains(*id) && result.len() > 1)
        .into_iter()
        .collect();
    let kept: Vec<(ObjectId, f64)> = result
        .entries()
        .iter()
        .filter(|e| !removed.contains(&e.id))
        .map(|e| (e.id, e.score))
        .collect();
    RankedCandidates::new(kept, Provenance::Subtract { removed })
}

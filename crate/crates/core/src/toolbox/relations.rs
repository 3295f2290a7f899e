//! Ranking functions, one per relation. Each takes the candidate objects,
//! the anchor objects and the tolerances, and returns every candidate
//! ordered by how well it satisfies the relation.

use serde::{Deserialize, Serialize};

use super::geometry::{footprints_overlap, horizontal_offset, object_distance};
use super::ranking::{Provenance, RankedCandidates};
use super::viewpoint::Viewpoint;
use super::{ToolboxError, ToolboxParams};
use crate::scene::{SceneObject, Vec3, UP};
use crate::statement::Relation;

/// Score given to candidates that fail a hard gate (above/below/on top of).
pub const FLOOR_SCORE: f64 = -1e9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Left,
    Right,
    Front,
    Behind,
}

impl Direction {
    pub fn of(relation: Relation) -> Option<Self> {
        Some(match relation {
            Relation::LeftOf => Self::Left,
            Relation::RightOf => Self::Right,
            Relation::InFrontOf => Self::Front,
            Relation::Behind => Self::Behind,
            _ => return None,
        })
    }

    pub fn relation(self) -> Relation {
        match self {
            Self::Left => Relation::LeftOf,
            Self::Right => Relation::RightOf,
            Self::Front => Relation::InFrontOf,
            Self::Behind => Relation::Behind,
        }
    }
}

fn check(relation: Relation, candidates: &[&SceneObject], anchors: &[&SceneObject]) -> Result<(), ToolboxError> {
    if candidates.is_empty() {
        return Err(ToolboxError::EmptyCandidates);
    }
    if !relation.accepts_anchor_count(anchors.len()) {
        let expected = match relation {
            Relation::Between => "2",
            r if r.is_view_dependent() => "0 or 1",
            _ => "1",
        };
        return Err(ToolboxError::Arity {
            relation: relation.name(),
            expected,
            got: anchors.len(),
        });
    }
    Ok(())
}

fn scored(
    relation: Relation,
    candidates: &[&SceneObject],
    anchors: &[&SceneObject],
    score: impl Fn(&SceneObject) -> f64,
) -> Result<RankedCandidates, ToolboxError> {
    check(relation, candidates, anchors)?;
    Ok(RankedCandidates::new(
        candidates.iter().map(|c| (c.id(), score(c))),
        Provenance::Relation {
            relation,
            anchors: anchors.iter().map(|a| a.id()).collect(),
        },
    ))
}

/// `R - d` within the proximity radius `R`, zero beyond it.
pub fn rank_near(
    candidates: &[&SceneObject],
    anchors: &[&SceneObject],
    params: &ToolboxParams,
) -> Result<RankedCandidates, ToolboxError> {
    scored(Relation::Near, candidates, anchors, |c| {
        let d = object_distance(c, anchors[0]);
        if d <= params.near_radius {
            params.near_radius - d
        } else {
            0.0
        }
    })
}

pub fn rank_closest(candidates: &[&SceneObject], anchors: &[&SceneObject]) -> Result<RankedCandidates, ToolboxError> {
    scored(Relation::Closest, candidates, anchors, |c| -object_distance(c, anchors[0]))
}

pub fn rank_farthest(candidates: &[&SceneObject], anchors: &[&SceneObject]) -> Result<RankedCandidates, ToolboxError> {
    scored(Relation::Farthest, candidates, anchors, |c| object_distance(c, anchors[0]))
}

/// The k-th closest first, then the rest of the closest order, with the
/// k-1 closer candidates moved to the tail. `k = 1` is `rank_closest`.
pub fn rank_ordinal_closest(
    candidates: &[&SceneObject],
    anchors: &[&SceneObject],
    k: u32,
) -> Result<RankedCandidates, ToolboxError> {
    let closest = rank_closest(candidates, anchors)?;
    if k == 0 || k as usize > candidates.len() {
        return Err(ToolboxError::OrdinalOutOfRange { k, n: candidates.len() });
    }
    if k == 1 {
        return Ok(closest);
    }
    let mut ids = closest.ids();
    ids.rotate_left(k as usize - 1);
    Ok(RankedCandidates::from_order(
        ids,
        Provenance::Relation {
            relation: Relation::OrdinalClosest(k),
            anchors: anchors.iter().map(|a| a.id()).collect(),
        },
    ))
}

/// Negated distance to the segment joining the anchor centers in the
/// horizontal plane, with overshoot past either end weighted by `alpha`.
pub fn rank_between(
    candidates: &[&SceneObject],
    anchors: &[&SceneObject],
    params: &ToolboxParams,
) -> Result<RankedCandidates, ToolboxError> {
    check(Relation::Between, candidates, anchors)?;
    let (a, b) = (anchors[0].center_xy(), anchors[1].center_xy());
    let s = b - a;
    let len = s.norm();
    let mid = (a + b) / 2.0;
    scored(Relation::Between, candidates, anchors, |c| {
        let p = c.center_xy() - mid;
        if len < 1e-9 {
            return -p.norm();
        }
        let axis = s / len;
        let along = p.dot(&axis);
        let lateral = (p - axis * along).norm();
        -(lateral + params.between_alpha * (along.abs() - len / 2.0).max(0.0))
    })
}

fn gated(
    relation: Relation,
    candidates: &[&SceneObject],
    anchors: &[&SceneObject],
    gate: impl Fn(&SceneObject, &SceneObject) -> bool,
) -> Result<RankedCandidates, ToolboxError> {
    scored(relation, candidates, anchors, |c| {
        let anchor = anchors[0];
        if gate(c, anchor) {
            -horizontal_offset(c, anchor)
        } else {
            FLOOR_SCORE
        }
    })
}

pub fn rank_above(
    candidates: &[&SceneObject],
    anchors: &[&SceneObject],
    params: &ToolboxParams,
) -> Result<RankedCandidates, ToolboxError> {
    gated(Relation::Above, candidates, anchors, |c, a| c.bottom() >= a.top() - params.vertical_gap)
}

pub fn rank_below(
    candidates: &[&SceneObject],
    anchors: &[&SceneObject],
    params: &ToolboxParams,
) -> Result<RankedCandidates, ToolboxError> {
    gated(Relation::Below, candidates, anchors, |c, a| c.top() <= a.bottom() + params.vertical_gap)
}

/// Above, resting within the contact tolerance, with overlapping footprints.
pub fn rank_on_top_of(
    candidates: &[&SceneObject],
    anchors: &[&SceneObject],
    params: &ToolboxParams,
) -> Result<RankedCandidates, ToolboxError> {
    gated(Relation::OnTopOf, candidates, anchors, |c, a| {
        c.bottom() >= a.top() - params.vertical_gap
            && c.bottom() - a.top() <= params.contact_tolerance
            && footprints_overlap(c, a)
    })
}

/// Signed projection onto the viewer frame `f = forward`, `r = f x up`. The
/// offset is taken from the anchor center, or from the viewer when there is
/// no anchor. Wrong-side candidates get negative scores.
pub fn rank_directional(
    direction: Direction,
    candidates: &[&SceneObject],
    anchors: &[&SceneObject],
    viewpoint: &Viewpoint,
) -> Result<RankedCandidates, ToolboxError> {
    let f = Vec3::new(viewpoint.forward.x, viewpoint.forward.y, 0.0);
    let r = f.cross(&UP);
    let origin = match anchors.first() {
        Some(a) => a.center_xy(),
        None => viewpoint.position,
    };
    scored(direction.relation(), candidates, anchors, |c| {
        let d = c.center_xy() - origin;
        let v = Vec3::new(d.x, d.y, 0.0);
        match direction {
            Direction::Left => -v.dot(&r),
            Direction::Right => v.dot(&r),
            Direction::Front => v.dot(&f),
            Direction::Behind => -v.dot(&f),
        }
    })
}

/// Dispatches on `relation`. Directional relations need a viewpoint.
pub fn rank_relation(
    relation: Relation,
    candidates: &[&SceneObject],
    anchors: &[&SceneObject],
    viewpoint: Option<&Viewpoint>,
    params: &ToolboxParams,
) -> Result<RankedCandidates, ToolboxError> {
    match relation {
        Relation::Near => rank_near(candidates, anchors, params),
        Relation::Closest => rank_closest(candidates, anchors),
        Relation::Farthest => rank_farthest(candidates, anchors),
        Relation::OrdinalClosest(k) => rank_ordinal_closest(candidates, anchors, k),
        Relation::Between => rank_between(candidates, anchors, params),
        Relation::Above => rank_above(candidates, anchors, params),
        Relation::Below => rank_below(candidates, anchors, params),
        Relation::OnTopOf => rank_on_top_of(candidates, anchors, params),
        Relation::LeftOf | Relation::RightOf | Relation::InFrontOf | Relation::Behind => {
            let direction = Direction::of(relation).expect("directional relation");
            let viewpoint = viewpoint.ok_or_else(|| ToolboxError::BadArgs {
                tool: relation.name(),
                reason: "a viewpoint is required".into(),
            })?;
            rank_directional(direction, candidates, anchors, viewpoint)
        }
    }
}

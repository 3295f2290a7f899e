//! Grounded objects to navigation waypoints and actions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reasoner::GroundingResult;
use crate::scene::{Cell, ObjectId, Scene, Vec2};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum NavError {
    #[error("unknown object id {0}")]
    UnknownObject(ObjectId),
    #[error("free-space grid has no traversable cell")]
    NoTraversableCell,
    #[error("grounding result has no target")]
    NoTarget,
    #[error("go_between needs a second grounded object")]
    MissingSecondTarget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    Near,
    Between,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    GoNear,
    GoBetween,
}

/// `go_near` carries one waypoint, `go_between` two, one per source object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NavAction {
    pub kind: ActionKind,
    pub waypoints: Vec<[f64; 2]>,
    pub source_ids: Vec<ObjectId>,
}

/// Center of the traversable cell nearest to the object's center projected
/// on the floor. Ties go to the lowest `(row, col)`.
pub fn object_to_waypoint(scene: &Scene, id: ObjectId) -> Result<Vec2, NavError> {
    let object = scene.object(id).ok_or(NavError::UnknownObject(id))?;
    nearest_free_cell(scene, object.center_xy())
        .map(|cell| scene.free_space().cell_center(cell))
        .ok_or(NavError::NoTraversableCell)
}

/// Ring search outward from the cell under `p` (clamped into the grid). A
/// ring at Chebyshev radius `r` is at least `r * res - offset` away, where
/// `offset` is the largest per-axis gap between `p` and the start cell's
/// center, so the search stops once that bound exceeds the best distance.
pub(crate) fn nearest_free_cell(scene: &Scene, p: Vec2) -> Option<Cell> {
    let grid = scene.free_space();
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    if w == 0 || h == 0 {
        return None;
    }
    let res = grid.resolution();
    let clamp = |v: f64, n: i64| (v.floor() as i64).clamp(0, n - 1);
    let r0 = clamp((p.y - grid.origin().y) / res, h);
    let c0 = clamp((p.x - grid.origin().x) / res, w);
    let start = grid.cell_center((r0 as usize, c0 as usize));
    let offset = (p.x - start.x).abs().max((p.y - start.y).abs());

    let mut best: Option<(f64, Cell)> = None;
    let consider = |best: &mut Option<(f64, Cell)>, row: i64, col: i64| {
        if row < 0 || col < 0 || row >= h || col >= w {
            return;
        }
        let cell = (row as usize, col as usize);
        if !grid.is_free(cell) {
            return;
        }
        let d2 = (grid.cell_center(cell) - p).norm_squared();
        if best.is_none_or(|(bd, bc)| d2 < bd || (d2 == bd && cell < bc)) {
            *best = Some((d2, cell));
        }
    };
    let max_ring = w.max(h);
    for ring in 0..=max_ring {
        if let Some((d2, _)) = best {
            // The slack keeps exact ties on the next ring in play despite
            // rounding in the bound.
            let bound = ring as f64 * res - offset - 1e-6 * res;
            if bound > 0.0 && bound * bound > d2 {
                break;
            }
        }
        if ring == 0 {
            consider(&mut best, r0, c0);
            continue;
        }
        for col in c0 - ring..=c0 + ring {
            consider(&mut best, r0 - ring, col);
            consider(&mut best, r0 + ring, col);
        }
        for row in r0 - ring + 1..=r0 + ring - 1 {
            consider(&mut best, row, c0 - ring);
            consider(&mut best, row, c0 + ring);
        }
    }
    best.map(|(_, cell)| cell)
}

/// Wraps grounded objects into an action. `Between` takes the second
/// endpoint from `second`.
pub fn make_action(
    result: &GroundingResult,
    scene: &Scene,
    mode: ActionMode,
    second: Option<&GroundingResult>,
) -> Result<NavAction, NavError> {
    let first = result.target_id.ok_or(NavError::NoTarget)?;
    let mut ids = vec![first];
    let kind = match mode {
        ActionMode::Near => ActionKind::GoNear,
        ActionMode::Between => {
            ids.push(
                second
                    .ok_or(NavError::MissingSecondTarget)?
                    .target_id
                    .ok_or(NavError::MissingSecondTarget)?,
            );
            ActionKind::GoBetween
        }
    };
    let waypoints = ids
        .iter()
        .map(|id| object_to_waypoint(scene, *id).map(|w| [w.x, w.y]))
        .collect::<Result<_, _>>()?;
    Ok(NavAction {
        kind,
        waypoints,
        source_ids: ids,
    })
}

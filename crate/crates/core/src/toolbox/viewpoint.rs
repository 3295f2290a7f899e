use serde::{Deserialize, Serialize};

use super::{ToolboxError, ToolboxParams};
use crate::scene::{Scene, SceneObject, Vec2, Vec3};

/// Observer pose on the floor: a traversable position and a unit heading.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub position: Vec2,
    pub forward: Vec2,
}

impl Viewpoint {
    /// Validates an externally supplied pose against the scene grid.
    pub fn checked(scene: &Scene, position: Vec2, forward: Vec2) -> Result<Self, ToolboxError> {
        let bad = |reason: &str| ToolboxError::BadArgs {
            tool: "viewpoint".into(),
            reason: reason.into(),
        };
        let grid = scene.free_space();
        if !position.iter().all(|v| v.is_finite()) || !grid.cell_of(position).is_some_and(|c| grid.is_free(c)) {
            return Err(bad("position is not on a traversable cell"));
        }
        let n = forward.norm();
        if !n.is_finite() || n < 1e-9 {
            return Err(bad("forward must be a non-zero vector"));
        }
        Ok(Self {
            position,
            forward: forward / n,
        })
    }
}

/// Picks the traversable cell closest to the focus point at no less than
/// the standoff distance, facing the focus. The focus is the view anchor's
/// center when given, otherwise `target_region`. Ties go to the lowest
/// (row, col).
pub fn sample_viewpoint(
    scene: &Scene,
    view_anchor: Option<&SceneObject>,
    target_region: Vec3,
    params: &ToolboxParams,
) -> Result<Viewpoint, ToolboxError> {
    let focus = view_anchor.map_or(target_region.xy(), |a| a.center_xy());
    let grid = scene.free_space();
    let mut best: Option<(f64, Vec2)> = None;
    for cell in grid.free_cells() {
        let p = grid.cell_center(cell);
        let d = (p - focus).norm();
        if d < params.standoff || d > params.search_radius {
            continue;
        }
        // free_cells is row-major, so a strict comparison keeps the lowest cell.
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, p));
        }
    }
    let (d, position) = best.ok_or(ToolboxError::NoFeasibleViewpoint)?;
    Ok(Viewpoint {
        position,
        forward: (focus - position) / d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{FreeSpaceGrid, ObjectId};

    fn scene(grid: FreeSpaceGrid, objects: Vec<SceneObject>) -> Scene {
        Scene::new("t", objects, grid).unwrap()
    }

    fn door() -> SceneObject {
        SceneObject::new(ObjectId(1), "door", Vec3::new(4.95, 1.5, 1.0), Vec3::new(0.05, 0.45, 1.0)).unwrap()
    }

    #[test]
    fn single_free_cell() {
        let mut cells = vec![false; 9];
        cells[0] = true;
        let grid = FreeSpaceGrid::new(Vec2::zeros(), 1.0, 3, 3, cells).unwrap();
        let s = scene(grid, vec![door()]);
        let vp = sample_viewpoint(&s, s.object(ObjectId(1)), Vec3::zeros(), &ToolboxParams::default()).unwrap();
        assert_eq!(vp.position, Vec2::new(0.5, 0.5));
        let expected = (Vec2::new(4.95, 1.5) - vp.position).normalize();
        assert!((vp.forward - expected).norm() < 1e-12);
    }

    #[test]
    fn corridor_west_of_door() {
        // 5 x 3 room, only the middle row is free.
        let mut cells = vec![false; 15];
        for c in 0..5 {
            cells[5 + c] = true;
        }
        let grid = FreeSpaceGrid::new(Vec2::zeros(), 1.0, 5, 3, cells).unwrap();
        let s = scene(grid, vec![door()]);
        let vp = sample_viewpoint(&s, s.object(ObjectId(1)), Vec3::zeros(), &ToolboxParams::default()).unwrap();
        // The cell next to the door is inside the standoff.
        assert_eq!(vp.position, Vec2::new(3.5, 1.5));
        assert!((vp.forward - Vec2::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn occupied_grid_has_no_viewpoint() {
        let grid = FreeSpaceGrid::new(Vec2::zeros(), 1.0, 3, 3, vec![false; 9]).unwrap();
        let s = scene(grid, vec![door()]);
        assert_eq!(
            sample_viewpoint(&s, None, Vec3::zeros(), &ToolboxParams::default()),
            Err(ToolboxError::NoFeasibleViewpoint)
        );
    }
}

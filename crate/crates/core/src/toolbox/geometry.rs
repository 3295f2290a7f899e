//! Distance and footprint helpers on axis-aligned boxes.

use crate::scene::{SceneObject, Vec2, Vec3};

/// Distance from `p` to the box of `anchor`, zero inside it.
pub fn point_box_distance(p: &Vec3, anchor: &SceneObject) -> f64 {
    let lo = anchor.min_corner();
    let hi = anchor.max_corner();
    let clamped = Vec3::new(p.x.clamp(lo.x, hi.x), p.y.clamp(lo.y, hi.y), p.z.clamp(lo.z, hi.z));
    (p - clamped).norm()
}

/// Candidate-to-anchor distance: candidate center to the anchor's surface,
/// or center to center when the candidate center lies inside the anchor.
pub fn object_distance(candidate: &SceneObject, anchor: &SceneObject) -> f64 {
    let c = candidate.center();
    let d = point_box_distance(&c, anchor);
    if d > 0.0 {
        d
    } else {
        (c - anchor.center()).norm()
    }
}

/// Horizontal distance between box centers.
pub fn horizontal_offset(a: &SceneObject, b: &SceneObject) -> f64 {
    (a.center_xy() - b.center_xy()).norm()
}

/// True when the xy footprints overlap with positive area.
pub fn footprints_overlap(a: &SceneObject, b: &SceneObject) -> bool {
    let (ca, cb) = (a.center(), b.center());
    let (ea, eb) = (a.extent(), b.extent());
    (ca.x - cb.x).abs() < ea.x + eb.x && (ca.y - cb.y).abs() < ea.y + eb.y
}

/// Mean of the xy centers, summed in id order so the result does not depend
/// on the order objects are passed in. `objects` must be non-empty.
pub fn centroid_xy<'a>(objects: impl IntoIterator<Item = &'a SceneObject>) -> Vec2 {
    let mut objects: Vec<&SceneObject> = objects.into_iter().collect();
    objects.sort_by_key(|o| o.id());
    let sum = objects.iter().fold(Vec2::zeros(), |s, o| s + o.center_xy());
    sum / objects.len().max(1) as f64
}

//! Seeded synthetic scenes with ground-truth attributes.
//!
//! Objects are placed without overlap: floor objects keep `min_margin`
//! between footprints, stacked objects rest 1 cm above their support, and
//! wall objects sit flush against one of the four walls. All coordinates are
//! quantized to 1 cm so the scene file stores them exactly.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FreeSpaceGrid, ObjectAttributes, ObjectId, Scene, SceneError, SceneObject, Vec2, Vec3};

const STACK_GAP: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Floor,
    /// Against a wall; `x` of the half-extent runs along the wall.
    Wall { elevation: f64 },
    /// On top of an object of one of these classes.
    OnTopOf(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    pub half_extent: [f64; 3],
    /// Relative per-axis size jitter in `[0, 1)`.
    pub jitter: f64,
    pub placement: Placement,
    pub weight: f64,
}

impl ClassSpec {
    fn new(name: &str, half_extent: [f64; 3], placement: Placement, weight: f64) -> Self {
        Self {
            name: name.to_string(),
            half_extent,
            jitter: 0.2,
            placement,
            weight,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Inclusive object-count range.
    pub object_count: (usize, usize),
    /// Inclusive range of distinct classes drawn per scene.
    pub classes_per_scene: (usize, usize),
    pub classes: Vec<ClassSpec>,
    /// Room size along x and y, meters. The room spans `[0, x] x [0, y]`.
    pub room: [f64; 2],
    pub min_margin: f64,
    pub grid_resolution: f64,
    pub agent_radius: f64,
    pub max_retries: usize,
    pub colors: Vec<String>,
    pub materials: Vec<String>,
    pub shapes: Vec<String>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        use Placement::*;
        let on = |v: &[&str]| OnTopOf(v.iter().map(|s| s.to_string()).collect());
        Self {
            object_count: (6, 16),
            classes_per_scene: (4, 7),
            classes: vec![
                ClassSpec::new("chair", [0.25, 0.25, 0.45], Floor, 3.0),
                ClassSpec::new("table", [0.6, 0.4, 0.38], Floor, 2.0),
                ClassSpec::new("desk", [0.7, 0.35, 0.38], Floor, 1.0),
                ClassSpec::new("bed", [1.0, 0.8, 0.3], Floor, 1.0),
                ClassSpec::new("couch", [0.9, 0.45, 0.4], Floor, 1.0),
                ClassSpec::new("cabinet", [0.45, 0.3, 0.5], Floor, 1.0),
                ClassSpec::new("nightstand", [0.25, 0.25, 0.3], Floor, 1.0),
                ClassSpec::new("trash can", [0.18, 0.18, 0.3], Floor, 1.5),
                ClassSpec::new("recycling bin", [0.2, 0.2, 0.35], Floor, 1.0),
                ClassSpec::new("plant", [0.2, 0.2, 0.5], Floor, 1.0),
                ClassSpec::new("door", [0.45, 0.05, 1.0], Wall { elevation: 0.0 }, 1.0),
                ClassSpec::new("window", [0.6, 0.05, 0.5], Wall { elevation: 0.9 }, 1.0),
                ClassSpec::new("whiteboard", [0.8, 0.03, 0.5], Wall { elevation: 0.9 }, 0.5),
                ClassSpec::new("lamp", [0.12, 0.12, 0.25], on(&["table", "desk", "nightstand", "cabinet"]), 2.0),
                ClassSpec::new("box", [0.15, 0.15, 0.12], on(&["table", "desk", "cabinet", "box"]), 2.0),
                ClassSpec::new("book", [0.1, 0.15, 0.03], on(&["table", "desk", "nightstand"]), 1.0),
                ClassSpec::new("monitor", [0.25, 0.08, 0.2], on(&["desk", "table"]), 1.0),
                ClassSpec::new("pillow", [0.25, 0.18, 0.08], on(&["bed", "couch"]), 1.5),
            ],
            room: [8.0, 8.0],
            min_margin: 0.2,
            grid_resolution: 0.1,
            agent_radius: 0.3,
            max_retries: 400,
            colors: ["red", "blue", "green", "white", "black", "brown"].map(String::from).to_vec(),
            materials: ["wooden", "metal", "plastic", "fabric", "glass"].map(String::from).to_vec(),
            shapes: ["square", "round", "rectangular", "cylindrical"].map(String::from).to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectAnnotation {
    pub id: ObjectId,
    pub label: String,
    pub attributes: ObjectAttributes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supported_by: Option<ObjectId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scene_id: String,
    pub objects: Vec<ObjectAnnotation>,
}

impl GroundTruth {
    pub fn annotation(&self, id: ObjectId) -> Option<&ObjectAnnotation> {
        self.objects.iter().find(|a| a.id == id)
    }
}

fn quantize(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

impl GeneratorConfig {
    fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: &str| Err(SceneError::InvalidConfig(m.to_string()));
        if self.object_count.0 == 0 || self.object_count.0 > self.object_count.1 {
            return bad("object_count must be a non-empty range starting at 1 or more");
        }
        if self.classes.is_empty() || !self.classes.iter().any(|c| !matches!(c.placement, Placement::OnTopOf(_))) {
            return bad("at least one floor or wall class is required");
        }
        if self.classes_per_scene.0 == 0 || self.classes_per_scene.0 > self.classes_per_scene.1 {
            return bad("classes_per_scene must be a non-empty range starting at 1 or more");
        }
        if !(self.grid_resolution > 0.0) || !(self.room[0] > 0.0 && self.room[1] > 0.0) {
            return bad("room size and grid resolution must be positive");
        }
        if self.colors.is_empty() || self.materials.is_empty() || self.shapes.is_empty() {
            return bad("attribute palettes must be non-empty");
        }
        if self.classes.iter().any(|c| !(c.weight > 0.0) || !(0.0..1.0).contains(&c.jitter)) {
            return bad("class weights must be positive and jitter in [0, 1)");
        }
        Ok(())
    }
}

/// Builds a seeded scene and its ground truth. Deterministic in
/// `(config, seed)`.
pub fn generate_scene(config: &GeneratorConfig, seed: u64) -> Result<(Scene, GroundTruth), SceneError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(config.object_count.0..=config.object_count.1);

    let mut order: Vec<usize> = (0..config.classes.len()).collect();
    order.shuffle(&mut rng);
    let k = rng
        .random_range(config.classes_per_scene.0..=config.classes_per_scene.1)
        .min(order.len());
    let mut active: Vec<&ClassSpec> = order[..k].iter().map(|&i| &config.classes[i]).collect();
    if active.iter().all(|c| matches!(c.placement, Placement::OnTopOf(_))) {
        let base = order[k..]
            .iter()
            .map(|&i| &config.classes[i])
            .find(|c| !matches!(c.placement, Placement::OnTopOf(_)))
            .expect("validated: a grounded class exists");
        active.push(base);
    }

    let mut objects: Vec<SceneObject> = Vec::with_capacity(count);
    let mut supports: Vec<Option<usize>> = Vec::with_capacity(count);
    let mut annotations = Vec::with_capacity(count);
    for index in 0..count {
        let id = ObjectId(index as u32 + 1);
        let mut placed = None;
        for _ in 0..config.max_retries {
            let spec = *active
                .choose_weighted(&mut rng, |c| c.weight)
                .expect("active classes are non-empty with positive weights");
            if let Some(found) = try_place(config, spec, &objects, &supports, &mut rng, id) {
                placed = Some((spec, found));
                break;
            }
        }
        let Some((spec, (object, support))) = placed else {
            return Err(SceneError::PlacementFailed {
                placed: index,
                requested: count,
                retries: config.max_retries,
            });
        };
        let attributes = ObjectAttributes {
            color: config.colors.choose(&mut rng).cloned(),
            material: config.materials.choose(&mut rng).cloned(),
            shape: config.shapes.choose(&mut rng).cloned(),
            extra: Vec::new(),
        };
        let caption = format!(
            "The {} is {}, {}, {}",
            spec.name,
            attributes.color.as_deref().unwrap_or_default(),
            attributes.material.as_deref().unwrap_or_default(),
            attributes.shape.as_deref().unwrap_or_default()
        );
        annotations.push(ObjectAnnotation {
            id,
            label: spec.name.clone(),
            attributes,
            supported_by: support.map(|s: usize| objects[s].id()),
        });
        objects.push(object.with_caption(caption));
        supports.push(support);
    }

    let grid = free_space(config, &objects)?;
    let scene_id = format!("synthetic-{seed}");
    let scene = Scene::new(scene_id.clone(), objects, grid)?;
    Ok((
        scene,
        GroundTruth {
            scene_id,
            objects: annotations,
        },
    ))
}

fn try_place(
    config: &GeneratorConfig,
    spec: &ClassSpec,
    objects: &[SceneObject],
    supports: &[Option<usize>],
    rng: &mut ChaCha8Rng,
    id: ObjectId,
) -> Option<(SceneObject, Option<usize>)> {
    let [w, d] = config.room;
    let mut half = [0.0; 3];
    for (h, base) in half.iter_mut().zip(spec.half_extent) {
        let scale = 1.0 + spec.jitter * rng.random_range(-1.0..=1.0);
        *h = quantize(base * scale).max(0.02);
    }
    let (center, support) = match &spec.placement {
        Placement::Floor => {
            if 2.0 * half[0] >= w || 2.0 * half[1] >= d {
                return None;
            }
            let x = quantize(rng.random_range(half[0]..=w - half[0]));
            let y = quantize(rng.random_range(half[1]..=d - half[1]));
            (Vec3::new(x, y, half[2]), None)
        }
        Placement::Wall { elevation } => {
            let wall = rng.random_range(0..4);
            // walls at x = 0 and x = w run along y; swap the footprint.
            if wall >= 2 {
                half.swap(0, 1);
            }
            let (along, thick) = if wall >= 2 { (half[1], half[0]) } else { (half[0], half[1]) };
            let span = if wall >= 2 { d } else { w };
            if 2.0 * along >= span {
                return None;
            }
            let s = quantize(rng.random_range(along..=span - along));
            let z = quantize(elevation + half[2]);
            let c = match wall {
                0 => Vec3::new(s, thick, z),
                1 => Vec3::new(s, d - thick, z),
                2 => Vec3::new(thick, s, z),
                _ => Vec3::new(w - thick, s, z),
            };
            (c, None)
        }
        Placement::OnTopOf(classes) => {
            let options: Vec<usize> = objects
                .iter()
                .enumerate()
                .filter(|(_, o)| classes.iter().any(|c| c == o.label()))
                .filter(|(_, o)| o.extent().x >= half[0] && o.extent().y >= half[1])
                .map(|(i, _)| i)
                .collect();
            let &s = options.choose(rng)?;
            let base = &objects[s];
            let (bc, be) = (base.center(), base.extent());
            let x = quantize(rng.random_range(bc.x - (be.x - half[0])..=bc.x + (be.x - half[0])));
            let y = quantize(rng.random_range(bc.y - (be.y - half[1])..=bc.y + (be.y - half[1])));
            let z = quantize(base.top() + STACK_GAP + half[2]);
            (Vec3::new(x, y, z), Some(s))
        }
    };
    let object = SceneObject::new(id, &spec.name, center, Vec3::from(half)).ok()?;
    let grounded = support.is_none();
    for (other, other_support) in objects.iter().zip(supports) {
        if object.intersects(other) {
            return None;
        }
        if grounded && other_support.is_none() && footprint_gap(&object, other) < config.min_margin {
            return None;
        }
    }
    Some((object, support))
}

/// Largest per-axis separation of two footprints; negative when they overlap.
fn footprint_gap(a: &SceneObject, b: &SceneObject) -> f64 {
    let gx = (a.center().x - b.center().x).abs() - (a.extent().x + b.extent().x);
    let gy = (a.center().y - b.center().y).abs() - (a.extent().y + b.extent().y);
    gx.max(gy)
}

fn point_rect_distance(p: Vec2, o: &SceneObject) -> f64 {
    let dx = ((p.x - o.center().x).abs() - o.extent().x).max(0.0);
    let dy = ((p.y - o.center().y).abs() - o.extent().y).max(0.0);
    dx.hypot(dy)
}

/// Room floor minus every object footprint dilated by the agent radius.
fn free_space(config: &GeneratorConfig, objects: &[SceneObject]) -> Result<FreeSpaceGrid, SceneError> {
    let res = config.grid_resolution;
    let width = (config.room[0] / res - 1e-9).ceil().max(1.0) as usize;
    let height = (config.room[1] / res - 1e-9).ceil().max(1.0) as usize;
    let mut grid = FreeSpaceGrid::all_free(Vec2::zeros(), res, width, height)?;
    let cells: Vec<bool> = (0..height)
        .flat_map(|r| (0..width).map(move |c| (r, c)))
        .map(|cell| {
            let p = grid.cell_center(cell);
            objects.iter().all(|o| point_rect_distance(p, o) > config.agent_radius)
        })
        .collect();
    grid = FreeSpaceGrid::new(Vec2::zeros(), res, width, height, cells)?;
    Ok(grid)
}

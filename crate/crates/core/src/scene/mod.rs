//! Scene data model: detected objects, the free-space grid and the scene
//! container, plus file ingestion and a synthetic scene generator.

mod caption;
mod generate;
mod grid;
mod io;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use caption::{parse_caption_attributes, AttributeKind, ObjectAttributes, Vocabulary};
pub use generate::{
    generate_scene, ClassSpec, GeneratorConfig, GroundTruth, ObjectAnnotation, Placement,
};
pub use grid::{Cell, FreeSpaceGrid};
pub use io::{load_captions, load_scene, save_scene, scene_from_json, scene_to_json};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

/// World up axis. Scenes with another convention must be rotated at ingest.
pub const UP: Vec3 = Vector3::new(0.0, 0.0, 1.0);

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("failed to read or write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scene JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate object id {0}")]
    DuplicateId(ObjectId),
    #[error("object {id} has a non-positive or non-finite extent")]
    InvalidExtent { id: ObjectId },
    #[error("object {id} has a non-finite center")]
    InvalidCenter { id: ObjectId },
    #[error("object {id} has an empty label")]
    EmptyLabel { id: ObjectId },
    #[error("scene has no objects")]
    EmptyScene,
    #[error("scene file has no free_space grid")]
    MissingGrid,
    #[error("invalid free-space grid: {0}")]
    InvalidGrid(String),
    #[error("unsupported up axis {0:?}; only +z is accepted")]
    UnsupportedUpAxis([f64; 3]),
    #[error("caption key {0:?} is not an object id")]
    BadCaptionKey(String),
    #[error("captions reference unknown object ids {0:?}")]
    UnknownCaptionIds(Vec<ObjectId>),
    #[error("could not place object {placed} of {requested} after {retries} retries")]
    PlacementFailed {
        placed: usize,
        requested: usize,
        retries: usize,
    },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u32> for ObjectId {
    fn from(v: u32) -> Self {
        ObjectId(v)
    }
}

/// One detected object: an axis-aligned box with a class label and an
/// optional free-text caption.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneObject {
    id: ObjectId,
    label: String,
    caption: Option<String>,
    center: Vec3,
    extent: Vec3,
    size: f64,
}

impl SceneObject {
    /// `extent` holds half-sizes along x, y and z. The label is lowercased.
    pub fn new(
        id: impl Into<ObjectId>,
        label: &str,
        center: Vec3,
        extent: Vec3,
    ) -> Result<Self, SceneError> {
        let id = id.into();
        let label = label.trim().to_lowercase();
        if label.is_empty() {
            return Err(SceneError::EmptyLabel { id });
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(SceneError::InvalidCenter { id });
        }
        if !extent.iter().all(|e| e.is_finite() && *e > 0.0) {
            return Err(SceneError::InvalidExtent { id });
        }
        Ok(Self {
            id,
            label,
            caption: None,
            center,
            extent,
            size: 8.0 * extent.x * extent.y * extent.z,
        })
    }

    pub fn with_caption(mut self, caption: impl Into<String>) -> Self {
        self.caption = Some(caption.into());
        self
    }

    pub fn without_caption(mut self) -> Self {
        self.caption = None;
        self
    }

    pub fn id(&self) -> ObjectId {
        self.id
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn caption(&self) -> Option<&str> {
        self.caption.as_deref()
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn extent(&self) -> Vec3 {
        self.extent
    }

    /// Box volume in cubic meters.
    pub fn size(&self) -> f64 {
        self.size
    }

    pub fn min_corner(&self) -> Vec3 {
        self.center - self.extent
    }

    pub fn max_corner(&self) -> Vec3 {
        self.center + self.extent
    }

    pub fn bottom(&self) -> f64 {
        self.center.z - self.extent.z
    }

    pub fn top(&self) -> f64 {
        self.center.z + self.extent.z
    }

    pub fn center_xy(&self) -> Vec2 {
        self.center.xy()
    }

    /// True when the two boxes share a region of positive volume.
    pub fn intersects(&self, other: &SceneObject) -> bool {
        (0..3).all(|i| {
            (self.center[i] - other.center[i]).abs() < self.extent[i] + other.extent[i]
        })
    }
}

/// Object list plus free-space grid. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    scene_id: String,
    objects: Vec<SceneObject>,
    free_space: FreeSpaceGrid,
}

impl Scene {
    pub fn new(
        scene_id: impl Into<String>,
        objects: Vec<SceneObject>,
        free_space: FreeSpaceGrid,
    ) -> Result<Self, SceneError> {
        if objects.is_empty() {
            return Err(SceneError::EmptyScene);
        }
        let mut seen = BTreeSet::new();
        for o in &objects {
            if !seen.insert(o.id) {
                return Err(SceneError::DuplicateId(o.id));
            }
        }
        Ok(Self {
            scene_id: scene_id.into(),
            objects,
            free_space,
        })
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn free_space(&self) -> &FreeSpaceGrid {
        &self.free_space
    }

    pub fn up_axis(&self) -> Vec3 {
        UP
    }

    pub fn object(&self, id: ObjectId) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Number of objects per label.
    pub fn label_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for o in &self.objects {
            *counts.entry(o.label()).or_insert(0) += 1;
        }
        counts
    }

    pub fn ids(&self) -> BTreeSet<ObjectId> {
        self.objects.iter().map(|o| o.id).collect()
    }

    /// Sets captions on the referenced objects. Every key must name an
    /// object in the scene.
    pub fn attach_captions(&self, captions: &BTreeMap<ObjectId, String>) -> Result<Scene, SceneError> {
        let ids = self.ids();
        let unknown: Vec<ObjectId> = captions.keys().filter(|id| !ids.contains(id)).copied().collect();
        if !unknown.is_empty() {
            return Err(SceneError::UnknownCaptionIds(unknown));
        }
        let objects = self
            .objects
            .iter()
            .map(|o| match captions.get(&o.id) {
                Some(c) => o.clone().with_caption(c.clone()),
                None => o.clone(),
            })
            .collect();
        Ok(Scene {
            scene_id: self.scene_id.clone(),
            objects,
            free_space: self.free_space.clone(),
        })
    }

    pub fn without_captions(&self) -> Scene {
        Scene {
            scene_id: self.scene_id.clone(),
            objects: self.objects.iter().map(|o| o.clone().without_caption()).collect(),
            free_space: self.free_space.clone(),
        }
    }

    /// Scene restricted to `keep`. Falls back to the full scene when nothing
    /// would remain.
    pub fn restricted_to(&self, keep: &BTreeSet<ObjectId>) -> Scene {
        let objects: Vec<SceneObject> = self
            .objects
            .iter()
            .filter(|o| keep.contains(&o.id))
            .cloned()
            .collect();
        if objects.is_empty() {
            return self.clone();
        }
        Scene {
            scene_id: self.scene_id.clone(),
            objects,
            free_space: self.free_space.clone(),
        }
    }
}

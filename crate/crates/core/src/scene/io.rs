//! Scene and caption-sidecar JSON files.
//!
//! The canonical form written by [`scene_to_json`] is pretty-printed with a
//! fixed field order and the grid packed as a base64 bitset, so that
//! load → save is byte-stable. On input the grid may also be a 0/1 array.

use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{FreeSpaceGrid, ObjectId, Scene, SceneError, SceneObject, Vec2, Vec3};

#[derive(Serialize, Deserialize)]
struct SceneFile {
    scene_id: String,
    #[serde(default = "default_up")]
    up_axis: [f64; 3],
    objects: Vec<ObjectRecord>,
    #[serde(default)]
    free_space: Option<GridRecord>,
}

fn default_up() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Serialize, Deserialize)]
struct ObjectRecord {
    id: u32,
    label: String,
    #[serde(default)]
    caption: Option<String>,
    center: [f64; 3],
    extent: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct GridRecord {
    origin: [f64; 2],
    resolution: f64,
    width: usize,
    height: usize,
    cells: CellsRecord,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CellsRecord {
    Bitset(String),
    Flags(Vec<u8>),
}

pub fn scene_from_json(text: &str) -> Result<Scene, SceneError> {
    let file: SceneFile = serde_json::from_str(text)?;
    if file.up_axis != [0.0, 0.0, 1.0] {
        return Err(SceneError::UnsupportedUpAxis(file.up_axis));
    }
    let grid = file.free_space.ok_or(SceneError::MissingGrid)?;
    let count = grid
        .width
        .checked_mul(grid.height)
        .ok_or_else(|| SceneError::InvalidGrid("grid dimensions overflow".into()))?;
    let cells = match grid.cells {
        CellsRecord::Bitset(b64) => {
            let bytes = STANDARD
                .decode(b64.as_bytes())
                .map_err(|e| SceneError::InvalidGrid(format!("bad base64 cells: {e}")))?;
            FreeSpaceGrid::cells_from_bitset(&bytes, count)?
        }
        CellsRecord::Flags(flags) => flags
            .into_iter()
            .map(|f| match f {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(SceneError::InvalidGrid(format!("cell value {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    let free_space = FreeSpaceGrid::new(
        Vec2::new(grid.origin[0], grid.origin[1]),
        grid.resolution,
        grid.width,
        grid.height,
        cells,
    )?;
    let objects = file
        .objects
        .into_iter()
        .map(|r| {
            let o = SceneObject::new(r.id, &r.label, Vec3::from(r.center), Vec3::from(r.extent))?;
            Ok(match r.caption {
                Some(c) => o.with_caption(c),
                None => o,
            })
        })
        .collect::<Result<Vec<_>, SceneError>>()?;
    Scene::new(file.scene_id, objects, free_space)
}

pub fn scene_to_json(scene: &Scene) -> String {
    let grid = scene.free_space();
    let file = SceneFile {
        scene_id: scene.scene_id().to_string(),
        up_axis: default_up(),
        objects: scene
            .objects()
            .iter()
            .map(|o| ObjectRecord {
                id: o.id().0,
                label: o.label().to_string(),
                caption: o.caption().map(str::to_string),
                center: o.center().into(),
                extent: o.extent().into(),
            })
            .collect(),
        free_space: Some(GridRecord {
            origin: grid.origin().into(),
            resolution: grid.resolution(),
            width: grid.width(),
            height: grid.height(),
            cells: CellsRecord::Bitset(STANDARD.encode(grid.to_bitset())),
        }),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("scene serialization is infallible");
    out.push('\n');
    out
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    scene_from_json(&text)
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<(), SceneError> {
    let path = path.as_ref();
    std::fs::write(path, scene_to_json(scene)).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a caption sidecar: a JSON object mapping object id to caption.
pub fn load_captions(path: impl AsRef<Path>) -> Result<BTreeMap<ObjectId, String>, SceneError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw: BTreeMap<String, String> = serde_json::from_str(&text)?;
    raw.into_iter()
        .map(|(k, v)| {
            k.trim()
                .parse::<u32>()
                .map(|id| (ObjectId(id), v))
                .map_err(|_| SceneError::BadCaptionKey(k.clone()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "scene_id": "tiny",
        "objects": [{"id": 0, "label": "Chair", "center": [0.5, 0.5, 0.4], "extent": [0.2, 0.2, 0.4]}],
        "free_space": {"origin": [0, 0], "resolution": 1.0, "width": 1, "height": 1, "cells": [1]}
    }"#;

    #[test]
    fn minimal_file() {
        let scene = scene_from_json(MINIMAL).unwrap();
        assert_eq!(scene.objects().len(), 1);
        assert_eq!(scene.objects()[0].label(), "chair");
        assert_eq!(scene.objects()[0].caption(), None);
        assert!(scene.free_space().is_free((0, 0)));
    }

    #[test]
    fn duplicate_id_names_the_id() {
        let text = r#"{"scene_id": "d", "objects": [
            {"id": 3, "label": "a", "center": [0,0,0], "extent": [1,1,1]},
            {"id": 3, "label": "b", "center": [5,0,0], "extent": [1,1,1]}],
            "free_space": {"origin": [0,0], "resolution": 1, "width": 1, "height": 1, "cells": [1]}}"#;
        let err = scene_from_json(text).unwrap_err();
        assert!(matches!(err, SceneError::DuplicateId(ObjectId(3))), "{err}");
    }

    #[test]
    fn error_kinds() {
        assert!(matches!(scene_from_json("{not json"), Err(SceneError::Parse(_))));
        let no_grid = r#"{"scene_id": "x", "objects": [{"id": 1, "label": "a", "center": [0,0,0], "extent": [1,1,1]}]}"#;
        assert!(matches!(scene_from_json(no_grid), Err(SceneError::MissingGrid)));
        let flat = r#"{"scene_id": "x", "objects": [{"id": 1, "label": "a", "center": [0,0,0], "extent": [1,0,1]}],
            "free_space": {"origin": [0,0], "resolution": 1, "width": 1, "height": 1, "cells": [1]}}"#;
        assert!(matches!(scene_from_json(flat), Err(SceneError::InvalidExtent { .. })));
        let tilted = MINIMAL.replace("\"scene_id\": \"tiny\",", "\"scene_id\": \"tiny\", \"up_axis\": [0, 1, 0],");
        assert!(matches!(scene_from_json(&tilted), Err(SceneError::UnsupportedUpAxis(_))));
    }

    #[test]
    fn canonical_form_is_stable() {
        let once = scene_to_json(&scene_from_json(MINIMAL).unwrap());
        let twice = scene_to_json(&scene_from_json(&once).unwrap());
        assert_eq!(once, twice);
        assert!(once.contains("\"cells\": \"AQ==\""));
    }
}

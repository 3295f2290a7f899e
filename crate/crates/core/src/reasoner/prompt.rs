use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::scene::{ObjectId, Scene, SceneObject};
use crate::toolbox::tool_inventory;

/// Worked example shown to the external model. It does not depend on the
/// scene being queried.
pub const IN_CONTEXT_EXAMPLE: &str = include_str!("../../data/in_context_example.txt");

const PREAMBLE: &str = "\
You ground referring statements in a 3D scene: find the one object the statement describes.
Each object has an id, a class name, an optional caption, the center of its bounding box
(c_x, c_y, c_z in meters, z up) and its size (bounding-box volume in cubic meters).

Reason step by step, and use the spatial tools instead of estimating geometry yourself.
To call tools, reply with {\"tool_calls\": [{\"tool\": \"<name>\", \"args\": {...}}]}.
Tool results come back as a JSON list. When you know the target, reply with {\"answer\": <id>}.
Only ids listed under Objects are valid answers.
";

/// One object line in the prompt. Coordinates are rounded to 1 cm and size
/// to 0.001 cubic meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectPromptRow {
    pub id: ObjectId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    pub c_x: f64,
    pub c_y: f64,
    pub c_z: f64,
    pub size: f64,
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (v * scale).round() / scale + 0.0
}

impl ObjectPromptRow {
    pub fn from_object(o: &SceneObject) -> Self {
        let c = o.center();
        Self {
            id: o.id(),
            name: o.label().to_string(),
            caption: o.caption().filter(|c| !c.trim().is_empty()).map(str::to_string),
            c_x: round_to(c.x, 2),
            c_y: round_to(c.y, 2),
            c_z: round_to(c.z, 2),
            size: round_to(o.size(), 3),
        }
    }

    /// One-line JSON object with fixed decimals.
    pub fn render(&self) -> String {
        let mut line = format!("{{\"id\": {}, \"name\": {}", self.id, json_str(&self.name));
        if let Some(c) = &self.caption {
            let _ = write!(line, ", \"caption\": {}", json_str(c));
        }
        let _ = write!(
            line,
            ", \"c_x\": {:.2}, \"c_y\": {:.2}, \"c_z\": {:.2}, \"size\": {:.3}}}",
            self.c_x, self.c_y, self.c_z, self.size
        );
        line
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Full prompt for the external reasoner: instructions, tool inventory, the
/// in-context example, one row per kept object (in scene order) and the
/// statement. Byte-identical for identical inputs.
pub fn build_prompt(scene: &Scene, utterance: &str, kept_ids: &BTreeSet<ObjectId>, example: &str) -> String {
    let mut out = String::from(PREAMBLE);
    out.push_str("\nTools:\n");
    for t in tool_inventory() {
        let _ = writeln!(out, "- {} {}: {}", t.name, t.signature, t.description);
    }
    out.push_str("\nExample:\n");
    out.push_str(example.trim_end());
    out.push_str("\n\nObjects:\n");
    for o in scene.objects().iter().filter(|o| kept_ids.contains(&o.id())) {
        out.push_str(&ObjectPromptRow::from_object(o).render());
        out.push('\n');
    }
    let _ = writeln!(out, "\nStatement: {}", json_str(utterance.trim()));
    out
}

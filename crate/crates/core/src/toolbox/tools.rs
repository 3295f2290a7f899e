//! JSON tool interface over the toolbox. The deterministic resolver and the
//! external reasoner both go through [`Toolbox::execute`], so every trace
//! record can be replayed by executing it again.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::attributes::filter_by_attributes;
use super::compose::{compose, subtract};
use super::geometry::centroid_xy;
use super::ranking::{Provenance, RankedCandidates};
use super::relations::rank_relation;
use super::viewpoint::{sample_viewpoint, Viewpoint};
use super::{ToolboxError, ToolboxParams};
use crate::filter::SynonymTable;
use crate::scene::{ObjectId, Scene, SceneObject, Vec2, Vec3, Vocabulary};
use crate::statement::{Combinator, ObjectDescriptor, Relation, SizeComparative};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    #[serde(default)]
    pub args: Value,
}

impl ToolCall {
    pub fn new(tool: impl Into<String>, args: Value) -> Self {
        Self { tool: tool.into(), args }
    }
}

/// One executed call: `{"tool", "args", "result_ids", "scores"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolRecord {
    pub tool: String,
    pub args: Value,
    pub result_ids: Vec<ObjectId>,
    pub scores: Vec<f64>,
}

impl ToolRecord {
    pub fn call(&self) -> ToolCall {
        ToolCall::new(self.tool.clone(), self.args.clone())
    }

    pub fn ranking(&self) -> RankedCandidates {
        RankedCandidates::new(self.result_ids.iter().copied().zip(self.scores.iter().copied()), Provenance::Unranked)
    }
}

/// A ranking passed by value: parallel id and score lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingArg {
    pub ids: Vec<ObjectId>,
    pub scores: Vec<f64>,
}

impl From<&RankedCandidates> for RankingArg {
    fn from(r: &RankedCandidates) -> Self {
        Self {
            ids: r.ids(),
            scores: r.scores(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ToolSpec {
    pub name: &'static str,
    pub signature: &'static str,
    pub description: &'static str,
}

const INVENTORY: &[ToolSpec] = &[
    ToolSpec {
        name: "find_objects",
        signature: r#"{"class": str, "among"?: [id]}"#,
        description: "ids of objects of a class (synonyms and head nouns accepted)",
    },
    ToolSpec {
        name: "filter_by_attributes",
        signature: r#"{"candidates": [id], "color"?: str, "material"?: str, "shape"?: str, "size"?: "largest"|"smallest"|"larger"|"smaller"}"#,
        description: "candidates matching caption attributes; unchanged if none match",
    },
    ToolSpec {
        name: "rank_near",
        signature: r#"{"candidates": [id], "anchors": [id]}"#,
        description: "objects within 1.5 m of the anchor, closest first",
    },
    ToolSpec {
        name: "rank_closest",
        signature: r#"{"candidates": [id], "anchors": [id]}"#,
        description: "closest to the anchor first",
    },
    ToolSpec {
        name: "rank_farthest",
        signature: r#"{"candidates": [id], "anchors": [id]}"#,
        description: "farthest from the anchor first",
    },
    ToolSpec {
        name: "rank_ordinal_closest",
        signature: r#"{"candidates": [id], "anchors": [id], "k": int}"#,
        description: "the k-th closest to the anchor first",
    },
    ToolSpec {
        name: "rank_between",
        signature: r#"{"candidates": [id], "anchors": [id, id]}"#,
        description: "closest to the segment joining two anchors first",
    },
    ToolSpec {
        name: "rank_above",
        signature: r#"{"candidates": [id], "anchors": [id]}"#,
        description: "objects higher than the anchor, most directly above first",
    },
    ToolSpec {
        name: "rank_below",
        signature: r#"{"candidates": [id], "anchors": [id]}"#,
        description: "objects lower than the anchor, most directly below first",
    },
    ToolSpec {
        name: "rank_on_top_of",
        signature: r#"{"candidates": [id], "anchors": [id]}"#,
        description: "objects resting on the anchor first",
    },
    ToolSpec {
        name: "rank_left",
        signature: r#"{"candidates": [id], "anchors": [id] or [], "view_anchor"?: id}"#,
        description: "leftmost first as seen from a viewpoint facing view_anchor (default: facing the candidates)",
    },
    ToolSpec {
        name: "rank_right",
        signature: r#"{"candidates": [id], "anchors": [id] or [], "view_anchor"?: id}"#,
        description: "rightmost first, same viewpoint rules as rank_left",
    },
    ToolSpec {
        name: "rank_front",
        signature: r#"{"candidates": [id], "anchors": [id] or [], "view_anchor"?: id}"#,
        description: "farthest in front (away from the viewer) first",
    },
    ToolSpec {
        name: "rank_behind",
        signature: r#"{"candidates": [id], "anchors": [id] or [], "view_anchor"?: id}"#,
        description: "farthest behind (toward the viewer) first",
    },
    ToolSpec {
        name: "sample_viewpoint",
        signature: r#"{"view_anchor"?: id, "candidates"?: [id]}"#,
        description: "a standing position facing view_anchor or the candidates; scores are [x, y, forward_x, forward_y]",
    },
    ToolSpec {
        name: "compose",
        signature: r#"{"inputs": [{"ids": [id], "scores": [f]}], "combinator": "intersect"|"union"}"#,
        description: "intersection or union of rankings",
    },
    ToolSpec {
        name: "subtract",
        signature: r#"{"ranking": {"ids", "scores"}, "negated": {"ids", "scores"}}"#,
        description: "drops the negated ranking's best match from the ranking",
    },
];

pub const TOOL_NAMES: [&str; 17] = [
    "find_objects",
    "filter_by_attributes",
    "rank_near",
    "rank_closest",
    "rank_farthest",
    "rank_ordinal_closest",
    "rank_between",
    "rank_above",
    "rank_below",
    "rank_on_top_of",
    "rank_left",
    "rank_right",
    "rank_front",
    "rank_behind",
    "sample_viewpoint",
    "compose",
    "subtract",
];

pub fn tool_inventory() -> &'static [ToolSpec] {
    INVENTORY
}

/// Tool name for a relation.
pub fn relation_tool(relation: Relation) -> &'static str {
    match relation {
        Relation::Near => "rank_near",
        Relation::Closest => "rank_closest",
        Relation::Farthest => "rank_farthest",
        Relation::OrdinalClosest(_) => "rank_ordinal_closest",
        Relation::Between => "rank_between",
        Relation::Above => "rank_above",
        Relation::Below => "rank_below",
        Relation::OnTopOf => "rank_on_top_of",
        Relation::LeftOf => "rank_left",
        Relation::RightOf => "rank_right",
        Relation::InFrontOf => "rank_front",
        Relation::Behind => "rank_behind",
    }
}

#[derive(Deserialize)]
struct FindArgs {
    class: String,
    #[serde(default)]
    among: Option<Vec<ObjectId>>,
}

#[derive(Deserialize)]
struct AttributeArgs {
    candidates: Vec<ObjectId>,
    #[serde(default)]
    color: Option<String>,
    #[serde(default)]
    material: Option<String>,
    #[serde(default)]
    shape: Option<String>,
    #[serde(default)]
    size: Option<SizeComparative>,
}

#[derive(Serialize, Deserialize)]
struct ViewpointArg {
    position: [f64; 2],
    forward: [f64; 2],
}

#[derive(Deserialize)]
struct RankArgs {
    candidates: Vec<ObjectId>,
    #[serde(default)]
    anchors: Vec<ObjectId>,
    #[serde(default)]
    k: Option<u32>,
    #[serde(default)]
    view_anchor: Option<ObjectId>,
    #[serde(default)]
    viewpoint: Option<ViewpointArg>,
}

#[derive(Deserialize)]
struct ViewpointArgs {
    #[serde(default)]
    view_anchor: Option<ObjectId>,
    #[serde(default)]
    candidates: Vec<ObjectId>,
}

#[derive(Deserialize)]
struct ComposeArgs {
    inputs: Vec<RankingArg>,
    #[serde(default)]
    combinator: Combinator,
}

#[derive(Deserialize)]
struct SubtractArgs {
    ranking: RankingArg,
    negated: RankingArg,
}

/// Everything a tool call needs besides the scene.
#[derive(Clone, Copy, Debug)]
pub struct Toolbox<'a> {
    pub params: &'a ToolboxParams,
    pub synonyms: &'a SynonymTable,
    pub vocab: &'a Vocabulary,
}

/// Arguments for a directional call with an explicit viewpoint.
pub fn viewpoint_json(vp: &Viewpoint) -> Value {
    json!({"position": [vp.position.x, vp.position.y], "forward": [vp.forward.x, vp.forward.y]})
}

impl<'a> Toolbox<'a> {
    pub fn new(params: &'a ToolboxParams, synonyms: &'a SynonymTable, vocab: &'a Vocabulary) -> Self {
        Self { params, synonyms, vocab }
    }

    pub fn execute(&self, scene: &Scene, call: &ToolCall) -> Result<ToolRecord, ToolboxError> {
        let tool = call.tool.as_str();
        let (result_ids, scores) = match tool {
            "find_objects" => {
                let a: FindArgs = args(tool, &call.args)?;
                let pool = match &a.among {
                    Some(ids) => objects(scene, ids)?,
                    None => scene.objects().iter().collect(),
                };
                let mut ids: Vec<ObjectId> = self.synonyms.select_class(&pool, &a.class).iter().map(|o| o.id()).collect();
                ids.sort();
                zero_scored(ids)
            }
            "filter_by_attributes" => {
                let a: AttributeArgs = args(tool, &call.args)?;
                let candidates = objects(scene, &a.candidates)?;
                let descriptor = ObjectDescriptor {
                    class_name: String::new(),
                    attributes: crate::scene::ObjectAttributes {
                        color: a.color,
                        material: a.material,
                        shape: a.shape,
                        extra: Vec::new(),
                    },
                    size_comparative: a.size,
                };
                zero_scored(filter_by_attributes(&candidates, &descriptor, self.vocab).kept)
            }
            "sample_viewpoint" => {
                let a: ViewpointArgs = args(tool, &call.args)?;
                let anchor = a.view_anchor.map(|id| object(scene, id)).transpose()?;
                let candidates = objects(scene, &a.candidates)?;
                if anchor.is_none() && candidates.is_empty() {
                    return Err(bad(tool, "needs view_anchor or candidates"));
                }
                let focus = centroid_xy(candidates.iter().copied());
                let vp = sample_viewpoint(scene, anchor, Vec3::new(focus.x, focus.y, 0.0), self.params)?;
                (
                    a.view_anchor.into_iter().collect(),
                    vec![vp.position.x, vp.position.y, vp.forward.x, vp.forward.y],
                )
            }
            "compose" => {
                let a: ComposeArgs = args(tool, &call.args)?;
                let inputs = a.inputs.iter().map(|r| ranking(tool, r)).collect::<Result<Vec<_>, _>>()?;
                split(&compose(&inputs, a.combinator)?)
            }
            "subtract" => {
                let a: SubtractArgs = args(tool, &call.args)?;
                split(&subtract(&ranking(tool, &a.ranking)?, &ranking(tool, &a.negated)?))
            }
            _ => {
                let relation = relation_of(tool).ok_or_else(|| ToolboxError::UnknownTool(call.tool.clone()))?;
                let a: RankArgs = args(tool, &call.args)?;
                let relation = match relation {
                    Relation::OrdinalClosest(_) => {
                        let k = a.k.ok_or_else(|| bad(tool, "missing k"))?;
                        if k <= 1 {
                            Relation::Closest
                        } else {
                            Relation::OrdinalClosest(k)
                        }
                    }
                    r => r,
                };
                let candidates = objects(scene, &a.candidates)?;
                let anchors = objects(scene, &a.anchors)?;
                let viewpoint = if relation.is_view_dependent() {
                    Some(match &a.viewpoint {
                        Some(v) => Viewpoint::checked(scene, Vec2::from(v.position), Vec2::from(v.forward))?,
                        None => {
                            let anchor = a.view_anchor.map(|id| object(scene, id)).transpose()?;
                            if candidates.is_empty() {
                                return Err(ToolboxError::EmptyCandidates);
                            }
                            let focus = centroid_xy(candidates.iter().copied());
                            sample_viewpoint(scene, anchor, Vec3::new(focus.x, focus.y, 0.0), self.params)?
                        }
                    })
                } else {
                    None
                };
                split(&rank_relation(relation, &candidates, &anchors, viewpoint.as_ref(), self.params)?)
            }
        };
        Ok(ToolRecord {
            tool: call.tool.clone(),
            args: call.args.clone(),
            result_ids,
            scores,
        })
    }
}

/// Convenience for one-off calls with the bundled tables.
pub fn execute(scene: &Scene, call: &ToolCall, params: &ToolboxParams) -> Result<ToolRecord, ToolboxError> {
    Toolbox::new(params, SynonymTable::builtin(), Vocabulary::builtin()).execute(scene, call)
}

fn relation_of(tool: &str) -> Option<Relation> {
    Some(match tool {
        "rank_near" => Relation::Near,
        "rank_closest" => Relation::Closest,
        "rank_farthest" => Relation::Farthest,
        "rank_ordinal_closest" => Relation::OrdinalClosest(2),
        "rank_between" => Relation::Between,
        "rank_above" => Relation::Above,
        "rank_below" => Relation::Below,
        "rank_on_top_of" => Relation::OnTopOf,
        "rank_left" => Relation::LeftOf,
        "rank_right" => Relation::RightOf,
        "rank_front" => Relation::InFrontOf,
        "rank_behind" => Relation::Behind,
        _ => return None,
    })
}

fn bad(tool: &str, reason: impl Into<String>) -> ToolboxError {
    ToolboxError::BadArgs {
        tool: tool.to_string(),
        reason: reason.into(),
    }
}

fn args<T: DeserializeOwned>(tool: &str, value: &Value) -> Result<T, ToolboxError> {
    let value = if value.is_null() { json!({}) } else { value.clone() };
    serde_json::from_value(value).map_err(|e| bad(tool, e.to_string()))
}

fn object(scene: &Scene, id: ObjectId) -> Result<&SceneObject, ToolboxError> {
    scene.object(id).ok_or(ToolboxError::UnknownObject(id))
}

fn objects<'s>(scene: &'s Scene, ids: &[ObjectId]) -> Result<Vec<&'s SceneObject>, ToolboxError> {
    ids.iter().map(|id| object(scene, *id)).collect()
}

fn ranking(tool: &str, r: &RankingArg) -> Result<RankedCandidates, ToolboxError> {
    if r.ids.len() != r.scores.len() {
        return Err(bad(tool, "ids and scores differ in length"));
    }
    if r.scores.iter().any(|s| !s.is_finite()) {
        return Err(bad(tool, "scores must be finite"));
    }
    Ok(RankedCandidates::new(r.ids.iter().copied().zip(r.scores.iter().copied()), Provenance::Unranked))
}

fn split(r: &RankedCandidates) -> (Vec<ObjectId>, Vec<f64>) {
    (r.ids(), r.scores())
}

fn zero_scored(ids: Vec<ObjectId>) -> (Vec<ObjectId>, Vec<f64>) {
    let n = ids.len();
    (ids, vec![0.0; n])
}

//! Spatial-reasoning toolbox: one ranking function per relation, viewpoint
//! sampling for view-dependent relations, attribute filtering and set
//! composition. Every ranking returns a permutation of its candidates,
//! best match first.

mod attributes;
mod compose;
pub mod geometry;
mod ranking;
mod relations;
mod tools;
mod viewpoint;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::ObjectId;

pub use attributes::{filter_by_attributes, AttributeFilter};
pub use compose::{compose, subtract};
pub use ranking::{Provenance, RankEntry, RankedCandidates};
pub use relations::{
    rank_above, rank_below, rank_between, rank_closest, rank_directional, rank_farthest, rank_near,
    rank_on_top_of, rank_ordinal_closest, rank_relation, Direction, FLOOR_SCORE,
};
pub use tools::{
    execute, relation_tool, tool_inventory, viewpoint_json, RankingArg, ToolCall, ToolRecord, ToolSpec, Toolbox,
    TOOL_NAMES,
};
pub use viewpoint::{sample_viewpoint, Viewpoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToolboxParams {
    /// Radius beyond which `near` scores are zero, meters.
    pub near_radius: f64,
    /// Maximum gap between support top and object bottom for `on_top_of`.
    pub contact_tolerance: f64,
    /// Slack on the above/below gates.
    pub vertical_gap: f64,
    /// Weight on the longitudinal overshoot in `between`.
    pub between_alpha: f64,
    /// Minimum viewpoint distance from the focus point.
    pub standoff: f64,
    /// Maximum viewpoint distance from the focus point.
    pub search_radius: f64,
}

impl Default for ToolboxParams {
    fn default() -> Self {
        Self {
            near_radius: 1.5,
            contact_tolerance: 0.15,
            vertical_gap: 0.05,
            between_alpha: 2.0,
            standoff: 0.5,
            search_radius: 20.0,
        }
    }
}

impl ToolboxParams {
    pub fn validate(&self) -> Result<(), ToolboxError> {
        let values = [
            self.near_radius,
            self.contact_tolerance,
            self.vertical_gap,
            self.between_alpha,
            self.standoff,
            self.search_radius,
        ];
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ToolboxError::InvalidParams("all tolerances must be finite and non-negative".into()));
        }
        if !(self.standoff > 0.0) || self.search_radius < self.standoff {
            return Err(ToolboxError::InvalidParams("need 0 < standoff <= search_radius".into()));
        }
        Ok(())
    }

    /// Every length multiplied by `factor`; used to check scale invariance.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            near_radius: self.near_radius * factor,
            contact_tolerance: self.contact_tolerance * factor,
            vertical_gap: self.vertical_gap * factor,
            between_alpha: self.between_alpha,
            standoff: self.standoff * factor,
            search_radius: self.search_radius * factor,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ToolboxError {
    #[error("no candidates to rank")]
    EmptyCandidates,
    #[error("{relation} takes {expected} anchor(s), got {got}")]
    Arity {
        relation: String,
        expected: &'static str,
        got: usize,
    },
    #[error("ordinal {k} is out of range for {n} candidates")]
    OrdinalOutOfRange { k: u32, n: usize },
    #[error("no traversable cell within the search radius")]
    NoFeasibleViewpoint,
    #[error("object {0} is not in the scene")]
    UnknownObject(ObjectId),
    #[error("compose needs at least one ranking")]
    NothingToCompose,
    #[error("unknown tool {0:?}")]
    UnknownTool(String),
    #[error("bad arguments for {tool}: {reason}")]
    BadArgs { tool: String, reason: String },
    #[error("invalid toolbox parameters: {0}")]
    InvalidParams(String),
}

//! Grounding of referring expressions in 3D object scenes.
//!
//! A scene is a list of axis-aligned objects plus a 2D free-space grid. A
//! referring expression ("the chair closest to the closet door") is parsed
//! into a [`statement::RelationProgram`], executed against the heuristic
//! ranking functions in [`toolbox`], and the selected object is turned into a
//! navigation action by [`nav`]. Statements outside the template grammar go
//! through the tool-calling protocol in [`reasoner::external`].

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eval;
pub mod filter;
pub mod nav;
pub mod reasoner;
pub mod scene;
pub mod statement;
pub mod toolbox;

pub use filter::{FilterReport, SynonymTable};
pub use nav::{make_action, object_to_waypoint, ActionMode, NavAction};
pub use reasoner::{GroundingResult, Grounder, ReasonerError};
pub use scene::{
    load_scene, parse_caption_attributes, save_scene, FreeSpaceGrid, ObjectAttributes, ObjectId,
    Scene, SceneError, SceneObject, Vocabulary,
};
pub use statement::{format_program, parse, RelationProgram};
pub use toolbox::{RankedCandidates, ToolboxParams, Viewpoint};

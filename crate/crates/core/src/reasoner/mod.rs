//! Grounding a relation program to one object id.
//!
//! The deterministic path runs the toolbox in a fixed sequence: relevance
//! filter, target candidates, attribute filter, one ranking per relation term,
//! composition, then removal of negated matches. Statements outside the
//! grammar go to an external model through [`external`], which drives the
//! same tools.

pub mod external;
mod prompt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::filter::{filter_scene, program_mentions, FilterReport, SynonymTable};
use crate::scene::{ObjectId, Scene, Vocabulary};
use crate::statement::{Combinator, ObjectDescriptor, ParseError, Parser, Relation, RelationProgram, RelationTerm};
use crate::toolbox::{
    filter_by_attributes, relation_tool, viewpoint_json, Provenance, RankedCandidates, RankingArg, ToolCall,
    ToolRecord, Toolbox, ToolboxError, ToolboxParams, Viewpoint,
};
use crate::scene::Vec2;

pub use external::{
    run_external, ChatBackend, ChatMessage, ExternalReasonerConfig, HttpBackend, ReplayBackend,
};
pub use prompt::{build_prompt, ObjectPromptRow, IN_CONTEXT_EXAMPLE};

/// Anchor combinations tried per term when several objects match an anchor.
pub const MAX_ANCHOR_COMBINATIONS: usize = 64;

#[derive(Debug, Error)]
pub enum ReasonerError {
    #[error("statement is outside the template grammar and needs an external reasoner: {0}")]
    OutOfGrammar(#[from] ParseError),
    #[error("no object of class {class:?} survives filtering")]
    EmptyCandidates { class: String },
    #[error(transparent)]
    Toolbox(#[from] ToolboxError),
    #[error("invalid reasoner configuration: {0}")]
    Config(String),
    #[error("endpoint error: {0}")]
    Endpoint(String),
    #[error("malformed tool call: {0}")]
    MalformedToolCall(String),
    #[error("no answer after {0} rounds")]
    RoundLimit(usize),
    #[error("answer {0} is not one of the listed objects")]
    UnknownAnswer(ObjectId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundingPath {
    Deterministic,
    External,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundingResult {
    pub target_id: Option<ObjectId>,
    pub ranked: RankedCandidates,
    pub trace: Vec<ToolRecord>,
    pub path: GroundingPath,
    pub filter: FilterReport,
    /// A term was skipped or an empty intersection was backed off.
    pub low_confidence: bool,
    /// An attribute constraint matched nothing and was ignored.
    pub attribute_soft_failed: bool,
}

/// Deterministic resolver with its tolerances and word tables.
#[derive(Clone, Debug)]
pub struct Grounder {
    pub params: ToolboxParams,
    pub synonyms: SynonymTable,
    pub vocab: Vocabulary,
}

impl Default for Grounder {
    fn default() -> Self {
        Self {
            params: ToolboxParams::default(),
            synonyms: SynonymTable::builtin().clone(),
            vocab: Vocabulary::builtin().clone(),
        }
    }
}

struct Run<'a> {
    toolbox: Toolbox<'a>,
    scene: &'a Scene,
    trace: Vec<ToolRecord>,
    among: Vec<ObjectId>,
    low_confidence: bool,
    attribute_soft_failed: bool,
}

impl<'a> Run<'a> {
    fn call(&mut self, tool: &str, args: Value) -> Result<ToolRecord, ToolboxError> {
        let record = self.toolbox.execute(self.scene, &ToolCall::new(tool, args))?;
        self.trace.push(record.clone());
        Ok(record)
    }

    /// Objects matching a descriptor among the kept ids.
    fn select(&mut self, d: &ObjectDescriptor) -> Result<Vec<ObjectId>, ToolboxError> {
        let found = self.call("find_objects", json!({"class": d.class_name, "among": self.among}))?;
        let ids = found.result_ids;
        let a = &d.attributes;
        if ids.is_empty() || (a.color.is_none() && a.material.is_none() && a.shape.is_none() && d.size_comparative.is_none()) {
            return Ok(ids);
        }
        let objects: Vec<_> = ids.iter().filter_map(|id| self.scene.object(*id)).collect();
        if filter_by_attributes(&objects, d, self.toolbox.vocab).soft_failed {
            self.attribute_soft_failed = true;
        }
        let mut args = json!({"candidates": ids});
        for (key, value) in [("color", &a.color), ("material", &a.material), ("shape", &a.shape)] {
            if let Some(v) = value {
                args[key] = json!(v);
            }
        }
        if let Some(size) = d.size_comparative {
            args["size"] = json!(size.as_str());
        }
        Ok(self.call("filter_by_attributes", args)?.result_ids)
    }

    fn viewpoint(&mut self, term: &RelationTerm, candidates: &[ObjectId]) -> Result<Viewpoint, ToolboxError> {
        let mut args = json!({"candidates": candidates});
        if let Some(v) = &term.view_anchor {
            match self.select(v)?.first() {
                Some(id) => args = json!({"view_anchor": id}),
                None => self.low_confidence = true,
            }
        }
        let r = self.call("sample_viewpoint", args)?;
        Ok(Viewpoint {
            position: Vec2::new(r.scores[0], r.scores[1]),
            forward: Vec2::new(r.scores[2], r.scores[3]),
        })
    }

    /// Ranking for one term, or `None` when an anchor class is absent.
    fn term(&mut self, term: &RelationTerm, candidates: &[ObjectId]) -> Result<Option<RankedCandidates>, ToolboxError> {
        let mut anchor_sets = Vec::with_capacity(term.anchors.len());
        for d in &term.anchors {
            let ids = self.select(d)?;
            if ids.is_empty() {
                return Ok(None);
            }
            anchor_sets.push(ids);
        }
        let viewpoint = if term.relation.is_view_dependent() {
            Some(self.viewpoint(term, candidates)?)
        } else {
            None
        };

        let mut rankings = Vec::new();
        for combo in anchor_combinations(&anchor_sets) {
            let pool: Vec<ObjectId> = candidates.iter().copied().filter(|c| !combo.contains(c)).collect();
            if pool.is_empty() {
                continue;
            }
            let mut args = json!({"candidates": pool, "anchors": combo});
            if let Relation::OrdinalClosest(k) = term.relation {
                if k as usize > pool.len() {
                    continue;
                }
                args["k"] = json!(k);
            }
            if let Some(vp) = &viewpoint {
                args["viewpoint"] = viewpoint_json(vp);
            }
            let r = self.call(relation_tool(term.relation), args)?;
            rankings.push(r.ranking().with_provenance(Provenance::Relation {
                relation: term.relation,
                anchors: combo,
            }));
        }
        if rankings.is_empty() {
            return Ok(None);
        }
        Ok(Some(self.compose(rankings, Combinator::Union)?))
    }

    fn compose(&mut self, rankings: Vec<RankedCandidates>, combinator: Combinator) -> Result<RankedCandidates, ToolboxError> {
        if rankings.len() == 1 {
            return Ok(rankings.into_iter().next().expect("one ranking"));
        }
        let inputs: Vec<RankingArg> = rankings.iter().map(RankingArg::from).collect();
        let r = self.call("compose", json!({"inputs": inputs, "combinator": combinator}))?;
        Ok(r.ranking().with_provenance(Provenance::Compose { combinator }))
    }
}

/// Cartesian product of anchor sets without repeated objects. Pairs drawn
/// from one class are deduplicated as unordered.
fn anchor_combinations(sets: &[Vec<ObjectId>]) -> Vec<Vec<ObjectId>> {
    let mut combos: Vec<Vec<ObjectId>> = vec![Vec::new()];
    for set in sets {
        combos = combos
            .iter()
            .flat_map(|prefix| {
                set.iter().filter(|id| !prefix.contains(id)).map(move |id| {
                    let mut c = prefix.clone();
                    c.push(*id);
                    c
                })
            })
            .collect();
    }
    if sets.len() == 2 && sets[0] == sets[1] {
        combos.retain(|c| c[0] < c[1]);
    }
    combos.truncate(MAX_ANCHOR_COMBINATIONS);
    combos
}

impl Grounder {
    pub fn new(params: ToolboxParams) -> Self {
        Self {
            params,
            ..Self::default()
        }
    }

    pub fn toolbox(&self) -> Toolbox<'_> {
        Toolbox::new(&self.params, &self.synonyms, &self.vocab)
    }

    pub fn parse(&self, utterance: &str) -> Result<RelationProgram, ParseError> {
        Parser::new(&self.vocab).parse(utterance)
    }

    /// Parses and resolves; out-of-grammar statements fail with
    /// [`ReasonerError::OutOfGrammar`].
    pub fn resolve_utterance(&self, utterance: &str, scene: &Scene) -> Result<GroundingResult, ReasonerError> {
        let program = self.parse(utterance)?;
        self.resolve(&program, scene)
    }

    pub fn resolve(&self, program: &RelationProgram, scene: &Scene) -> Result<GroundingResult, ReasonerError> {
        let filter = filter_scene(scene, &program_mentions(program), &self.synonyms);
        let mut run = Run {
            toolbox: self.toolbox(),
            scene,
            trace: Vec::new(),
            among: filter.kept_ids.iter().copied().collect(),
            low_confidence: false,
            attribute_soft_failed: false,
        };

        let candidates = run.select(&program.target)?;
        if candidates.is_empty() {
            return Err(ReasonerError::EmptyCandidates {
                class: program.target.class_name.clone(),
            });
        }

        let mut term_rankings = Vec::new();
        for term in &program.terms {
            match run.term(term, &candidates)? {
                Some(r) => term_rankings.push(r),
                None => run.low_confidence = true,
            }
        }
        let mut ranked = if term_rankings.is_empty() {
            RankedCandidates::new(candidates.iter().map(|id| (*id, 0.0)), Provenance::Unranked)
        } else {
            let first = term_rankings[0].clone();
            let composed = run.compose(term_rankings, program.combinator)?;
            if composed.is_empty() {
                run.low_confidence = true;
                first
            } else {
                composed
            }
        };

        for term in &program.negated_terms {
            let pool = ranked.ids();
            let Some(negated) = run.term(term, &pool)? else {
                run.low_confidence = true;
                continue;
            };
            let r = run.call(
                "subtract",
                json!({"ranking": RankingArg::from(&ranked), "negated": RankingArg::from(&negated)}),
            )?;
            let removed: Vec<ObjectId> = ranked.ids().into_iter().filter(|id| !r.result_ids.contains(id)).collect();
            ranked = r.ranking().with_provenance(Provenance::Subtract { removed });
        }

        Ok(GroundingResult {
            target_id: ranked.top(),
            ranked,
            trace: run.trace,
            path: GroundingPath::Deterministic,
            filter,
            low_confidence: run.low_confidence,
            attribute_soft_failed: run.attribute_soft_failed,
        })
    }

    /// Re-executes every recorded call and returns the first record whose
    /// result ids differ, if any.
    pub fn replay(&self, scene: &Scene, trace: &[ToolRecord]) -> Result<Option<usize>, ToolboxError> {
        let toolbox = self.toolbox();
        for (i, record) in trace.iter().enumerate() {
            if toolbox.execute(scene, &record.call())?.result_ids != record.result_ids {
                return Ok(Some(i));
            }
        }
        Ok(None)
    }
}

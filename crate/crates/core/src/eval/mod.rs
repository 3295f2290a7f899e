//! Benchmark evaluation: statement files, split-wise accuracy over repeated
//! trials, synthetic benchmark generation and the captions ablation.

mod bench;
mod repl;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reasoner::external::{run_external, ExternalReasonerConfig};
use crate::reasoner::{GroundingPath, GroundingResult, Grounder, ReasonerError};
use crate::scene::{load_captions, load_scene, ObjectId, Scene, SceneError};
use crate::toolbox::ToolRecord;

pub use bench::{
    captions_ablation, generate_benchmark, stratified_sample, write_benchmark, AblationReport, Benchmark,
    BenchmarkConfig, SplitMix,
};
pub use repl::{run_repl, trace_summary};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("failed to read or write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("line {line}: unknown scene_id {scene_id:?}")]
    UnknownScene { line: usize, scene_id: String },
    #[error("invalid evaluation options: {0}")]
    InvalidOptions(String),
    #[error("infeasible split mix: {0}")]
    InfeasibleMix(String),
    #[error("statement generation failed: {0}")]
    Generation(String),
    #[error(transparent)]
    Reasoner(#[from] ReasonerError),
}

pub(crate) fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One line of a statements file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementRecord {
    pub scene_id: String,
    pub utterance: String,
    pub target_id: ObjectId,
    /// `easy`/`hard` and `view_dep`/`view_indep`; inferred when absent.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub tags: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub skip: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NumberedStatement {
    pub line: usize,
    pub record: StatementRecord,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// Parses JSON-lines statements. Blank lines and `#` comments are ignored;
/// malformed lines are returned with their 1-based line numbers.
pub fn parse_statements(text: &str) -> (Vec<NumberedStatement>, Vec<LineError>) {
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match serde_json::from_str::<StatementRecord>(line) {
            Ok(record) => ok.push(NumberedStatement { line: i + 1, record }),
            Err(e) => bad.push(LineError {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    (ok, bad)
}

pub fn load_statements(path: &Path) -> Result<(Vec<NumberedStatement>, Vec<LineError>), EvalError> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    Ok(parse_statements(&text))
}

pub fn statements_to_jsonl(records: &[StatementRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}

/// Loads every `<id>.json` in `dir` (skipping `*_captions.json` and
/// `*_truth.json`), attaching `<id>_captions.json` when present.
pub fn load_scene_dir(dir: &Path) -> Result<BTreeMap<String, Scene>, EvalError> {
    let mut scenes = BTreeMap::new();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_error(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    for path in paths {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        if stem.ends_with("_captions") || stem.ends_with("_truth") {
            continue;
        }
        let mut scene = load_scene(&path)?;
        let captions = dir.join(format!("{stem}_captions.json"));
        if captions.exists() {
            scene = scene.attach_captions(&load_captions(&captions)?)?;
        }
        scenes.insert(scene.scene_id().to_string(), scene);
    }
    Ok(scenes)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub trials: usize,
    /// Drop statements flagged `skip` before scoring.
    pub skip: bool,
    /// Strip captions before resolution.
    pub no_captions: bool,
    /// Route every statement through the external reasoner.
    pub external: Option<ExternalReasonerConfig>,
    /// Write each statement's first-trial trace here.
    pub trace_dir: Option<PathBuf>,
}

impl EvalOptions {
    pub fn deterministic(trials: usize) -> Self {
        Self {
            trials,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub count: usize,
    /// Mean accuracy over trials, 0 for an empty split.
    pub mean: f64,
    /// Sample standard deviation over trials, 0 for a single trial.
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub overall: SplitStats,
    pub easy: SplitStats,
    pub hard: SplitStats,
    pub view_dep: SplitStats,
    pub view_indep: SplitStats,
}

impl Splits {
    pub fn rows(&self) -> [(&'static str, &SplitStats); 5] {
        [
            ("Overall", &self.overall),
            ("Easy", &self.easy),
            ("Hard", &self.hard),
            ("View-Dep.", &self.view_dep),
            ("View-Ind.", &self.view_indep),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatementOutcome {
    pub line: usize,
    pub scene_id: String,
    pub utterance: String,
    pub gold: ObjectId,
    /// First-trial prediction.
    pub predicted: Option<ObjectId>,
    pub correct: bool,
    pub correct_trials: usize,
    pub hard: bool,
    pub view_dependent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<GroundingPath>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_ref: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub trials: usize,
    /// Statements scored.
    pub n_statements: usize,
    /// Statements excluded by `skip`.
    pub n_skipped: usize,
    pub splits: Splits,
    pub malformed_lines: Vec<LineError>,
    pub records: Vec<StatementOutcome>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    /// Accuracy table in percent, `mean ± std` per split.
    pub fn table(&self) -> String {
        let mut out = format!("{:<10} {:>6}  accuracy (%)\n", "split", "n");
        for (name, s) in self.splits.rows() {
            let _ = writeln!(out, "{:<10} {:>6}  {:.2} ± {:.2}", name, s.count, 100.0 * s.mean, 100.0 * s.std);
        }
        let _ = writeln!(
            out,
            "statements {}, skipped {}, malformed lines {}, trials {}",
            self.n_statements,
            self.n_skipped,
            self.malformed_lines.len(),
            self.trials
        );
        out
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    // Identical trials report the exact value and a zero spread.
    if values.iter().all(|v| *v == values[0]) {
        return (values[0], 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `(hard, view_dependent)`, from tags when present, otherwise from the
/// scene (same-class distractors) and the parsed statement.
pub fn split_of(record: &StatementRecord, scene: &Scene, grounder: &Grounder) -> (bool, bool) {
    let tag = |yes: &str, no: &str| {
        if record.tags.contains(yes) {
            Some(true)
        } else if record.tags.contains(no) {
            Some(false)
        } else {
            None
        }
    };
    let hard = tag("hard", "easy").unwrap_or_else(|| {
        scene
            .object(record.target_id)
            .map(|t| scene.objects().iter().filter(|o| o.label() == t.label()).count() >= 3)
            .unwrap_or(false)
    });
    let view = tag("view_dep", "view_indep").unwrap_or_else(|| match grounder.parse(&record.utterance) {
        Ok(p) => p.is_view_dependent(),
        Err(_) => {
            const WORDS: [&str; 6] = ["left", "right", "front", "behind", "facing", "back"];
            record
                .utterance
                .to_lowercase()
                .split(|c: char| !c.is_alphanumeric())
                .any(|w| WORDS.contains(&w))
        }
    });
    (hard, view)
}

fn ground_once(
    grounder: &Grounder,
    scene: &Scene,
    utterance: &str,
    external: Option<&ExternalReasonerConfig>,
) -> Result<GroundingResult, ReasonerError> {
    match external {
        None => grounder.resolve_utterance(utterance, scene),
        Some(config) => {
            let mut backend = config.backend_for(utterance)?;
            run_external(config, backend.as_mut(), grounder, scene, utterance)
        }
    }
}

#[derive(Serialize)]
struct TraceFile<'a> {
    scene_id: &'a str,
    utterance: &'a str,
    trace: &'a [ToolRecord],
}

/// Runs every statement `trials` times. Statements run in parallel; the
/// report is assembled in file order and carries no timestamps, so the
/// deterministic path gives byte-identical JSON across runs.
pub fn evaluate(
    scenes: &BTreeMap<String, Scene>,
    statements: &[NumberedStatement],
    malformed: Vec<LineError>,
    options: &EvalOptions,
    grounder: &Grounder,
) -> Result<EvalReport, EvalError> {
    if options.trials == 0 {
        return Err(EvalError::InvalidOptions("trials must be at least 1".into()));
    }
    if let Some(config) = &options.external {
        config.validate()?;
    }
    for s in statements {
        if !scenes.contains_key(&s.record.scene_id) {
            return Err(EvalError::UnknownScene {
                line: s.line,
                scene_id: s.record.scene_id.clone(),
            });
        }
    }
    if let Some(dir) = &options.trace_dir {
        std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    }
    let stripped: BTreeMap<&str, Scene> = if options.no_captions {
        scenes.iter().map(|(k, s)| (k.as_str(), s.without_captions())).collect()
    } else {
        BTreeMap::new()
    };
    let scene_for = |id: &str| stripped.get(id).unwrap_or_else(|| &scenes[id]);
    let active: Vec<&NumberedStatement> = statements.iter().filter(|s| !(options.skip && s.record.skip)).collect();
    let n_skipped = statements.len() - active.len();

    let run_one = |s: &NumberedStatement| -> Result<(StatementOutcome, Vec<bool>), EvalError> {
        let r = &s.record;
        let scene = scene_for(&r.scene_id);
        let (hard, view_dependent) = split_of(r, scene, grounder);
        let mut hits = Vec::with_capacity(options.trials);
        let mut first: Option<Result<GroundingResult, ReasonerError>> = None;
        for _ in 0..options.trials {
            let result = ground_once(grounder, scene, &r.utterance, options.external.as_ref());
            hits.push(result.as_ref().is_ok_and(|g| g.target_id == Some(r.target_id)));
            first.get_or_insert(result);
        }
        let first = first.expect("trials >= 1");
        let mut trace_ref = None;
        if let (Some(dir), Ok(g)) = (&options.trace_dir, &first) {
            let name = format!("line-{:06}.json", s.line);
            let file = TraceFile {
                scene_id: &r.scene_id,
                utterance: &r.utterance,
                trace: &g.trace,
            };
            let path = dir.join(&name);
            let body = serde_json::to_string_pretty(&file).expect("traces serialize");
            std::fs::write(&path, body).map_err(io_error(&path))?;
            trace_ref = Some(name);
        }
        let outcome = StatementOutcome {
            line: s.line,
            scene_id: r.scene_id.clone(),
            utterance: r.utterance.clone(),
            gold: r.target_id,
            predicted: first.as_ref().ok().and_then(|g| g.target_id),
            correct: hits[0],
            correct_trials: hits.iter().filter(|h| **h).count(),
            hard,
            view_dependent,
            path: first.as_ref().ok().map(|g| g.path),
            error: first.as_ref().err().map(|e| match e {
                ReasonerError::OutOfGrammar(_) if options.external.is_none() => format!("needs external reasoner: {e}"),
                _ => e.to_string(),
            }),
            trace_ref,
        };
        Ok((outcome, hits))
    };

    let results: Vec<Result<(StatementOutcome, Vec<bool>), EvalError>> = match &options.external {
        None => active.par_iter().map(|s| run_one(s)).collect(),
        Some(config) => rayon::ThreadPoolBuilder::new()
            .num_threads(config.max_concurrent)
            .build()
            .map_err(|e| EvalError::InvalidOptions(e.to_string()))?
            .install(|| active.par_iter().map(|s| run_one(s)).collect()),
    };
    let mut records = Vec::with_capacity(results.len());
    let mut hits = Vec::with_capacity(results.len());
    for r in results {
        let (o, h) = r?;
        records.push(o);
        hits.push(h);
    }

    let split = |pick: &dyn Fn(&StatementOutcome) -> bool| -> SplitStats {
        let members: Vec<usize> = (0..records.len()).filter(|i| pick(&records[*i])).collect();
        let per_trial: Vec<f64> = if members.is_empty() {
            Vec::new()
        } else {
            (0..options.trials)
                .map(|t| members.iter().filter(|i| hits[**i][t]).count() as f64 / members.len() as f64)
                .collect()
        };
        let (mean, std) = mean_std(&per_trial);
        SplitStats {
            count: members.len(),
            mean,
            std,
        }
    };
    let splits = Splits {
        overall: split(&|_| true),
        easy: split(&|o| !o.hard),
        hard: split(&|o| o.hard),
        view_dep: split(&|o| o.view_dependent),
        view_indep: split(&|o| !o.view_dependent),
    };
    Ok(EvalReport {
        trials: options.trials,
        n_statements: records.len(),
        n_skipped,
        splits,
        malformed_lines: malformed,
        records,
    })
}

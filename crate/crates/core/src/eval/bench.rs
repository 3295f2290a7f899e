use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate, io_error, statements_to_jsonl, EvalError, EvalOptions, EvalReport, NumberedStatement, StatementRecord};
use crate::reasoner::Grounder;
use crate::scene::{generate_scene, save_scene, GeneratorConfig, GroundTruth, Scene, SceneError};
use crate::statement::{generate_statement, AttributeMode, StatementConfig, StatementError};

/// Requested share of view-dependent and hard statements. `None` leaves the
/// split to the generator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitMix {
    pub view_dep: Option<f64>,
    pub hard: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub n_scenes: usize,
    pub n_statements: usize,
    pub mix: SplitMix,
    pub scene: GeneratorConfig,
    pub statement: StatementConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n_scenes: 20,
            n_statements: 200,
            mix: SplitMix::default(),
            scene: GeneratorConfig::default(),
            statement: StatementConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Benchmark {
    pub scenes: Vec<(Scene, GroundTruth)>,
    pub statements: Vec<StatementRecord>,
}

impl Benchmark {
    pub fn scene_map(&self) -> BTreeMap<String, Scene> {
        self.scenes.iter().map(|(s, _)| (s.scene_id().to_string(), s.clone())).collect()
    }

    pub fn numbered(&self) -> Vec<NumberedStatement> {
        self.statements
            .iter()
            .enumerate()
            .map(|(i, record)| NumberedStatement {
                line: i + 1,
                record: record.clone(),
            })
            .collect()
    }
}

fn count_for(share: Option<f64>, n: usize) -> Option<usize> {
    share.map(|s| (s * n as f64).round() as usize)
}

/// `n` flags with `count` set, in seeded random order.
fn flags(count: Option<usize>, n: usize, rng: &mut ChaCha8Rng) -> Vec<Option<bool>> {
    match count {
        None => vec![None; n],
        Some(k) => {
            let mut v: Vec<Option<bool>> = (0..n).map(|i| Some(i < k)).collect();
            v.shuffle(rng);
            v
        }
    }
}

fn check_mix(config: &BenchmarkConfig) -> Result<(), EvalError> {
    let bad = |m: String| Err(EvalError::InfeasibleMix(m));
    for (name, share) in [("view_dep", config.mix.view_dep), ("hard", config.mix.hard)] {
        if share.is_some_and(|s| !(0.0..=1.0).contains(&s)) {
            return bad(format!("{name} share must be in [0, 1]"));
        }
    }
    let kinds = &config.statement.relations;
    if kinds.is_empty() {
        return bad("no relation kinds enabled".into());
    }
    let n = config.n_statements;
    if let Some(v) = count_for(config.mix.view_dep, n) {
        if v > 0 && !kinds.iter().any(|k| k.is_view_dependent()) {
            return bad("view-dependent share requested but no directional relation is enabled".into());
        }
        if v < n && kinds.iter().all(|k| k.is_view_dependent()) {
            return bad("view-independent share requested but only directional relations are enabled".into());
        }
    }
    if count_for(config.mix.hard, n).is_some_and(|h| h > 0) && config.scene.object_count.1 < 3 {
        return bad("hard statements need scenes with at least 3 objects".into());
    }
    if n > 0 && config.n_scenes == 0 {
        return bad("statements requested with zero scenes".into());
    }
    Ok(())
}

/// Seeded scenes plus statements with the requested split mix. Statement `i`
/// is drawn from scene `i mod n_scenes`, moving on to later scenes when that
/// one cannot host the required split.
pub fn generate_benchmark(config: &BenchmarkConfig, seed: u64) -> Result<Benchmark, EvalError> {
    check_mix(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scenes = Vec::with_capacity(config.n_scenes);
    for i in 0..config.n_scenes {
        let (scene, truth) = fresh_scene(&config.scene, &mut rng)?;
        let id = format!("scene_{i:04}");
        let scene = rename(scene, &id)?;
        scenes.push((scene, GroundTruth { scene_id: id, ..truth }));
    }
    let n = config.n_statements;
    let view = flags(count_for(config.mix.view_dep, n), n, &mut rng);
    let hard = flags(count_for(config.mix.hard, n), n, &mut rng);
    let mut statements = Vec::with_capacity(n);
    for i in 0..n {
        let statement_config = StatementConfig {
            view_dependent: view[i].or(config.statement.view_dependent),
            hard: hard[i].or(config.statement.hard),
            ..config.statement.clone()
        };
        let statement_seed: u64 = rng.random();
        let mut found = None;
        for j in 0..scenes.len() {
            let (scene, truth) = &scenes[(i + j) % scenes.len()];
            match generate_statement(scene, truth, statement_seed, &statement_config) {
                Ok(s) => {
                    found = Some((scene.scene_id().to_string(), s));
                    break;
                }
                Err(StatementError::InvalidConfig(m)) => return Err(EvalError::Generation(m)),
                Err(_) => continue,
            }
        }
        let (scene_id, s) = found.ok_or_else(|| {
            EvalError::InfeasibleMix(format!(
                "no scene can host statement {i} (view_dep {:?}, hard {:?})",
                statement_config.view_dependent, statement_config.hard
            ))
        })?;
        statements.push(StatementRecord {
            scene_id,
            utterance: s.utterance,
            target_id: s.target_id,
            tags: s.tags,
            skip: false,
        });
    }
    Ok(Benchmark { scenes, statements })
}

/// Crowded seeds that cannot place every object are replaced by the next
/// draw, up to a fixed budget.
fn fresh_scene(config: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Result<(Scene, GroundTruth), EvalError> {
    const SEED_ATTEMPTS: usize = 32;
    let mut last = None;
    for _ in 0..SEED_ATTEMPTS {
        match generate_scene(config, rng.random()) {
            Ok(v) => return Ok(v),
            Err(e @ SceneError::PlacementFailed { .. }) => last = Some(e),
            Err(e) => return Err(e.into()),
        }
    }
    Err(last.expect("at least one attempt").into())
}

fn rename(scene: Scene, id: &str) -> Result<Scene, EvalError> {
    Ok(Scene::new(id, scene.objects().to_vec(), scene.free_space().clone())?)
}

/// Writes `scenes/<id>.json` (no captions), `scenes/<id>_captions.json`,
/// `scenes/<id>_truth.json` and `statements.jsonl` under `dir`.
pub fn write_benchmark(benchmark: &Benchmark, dir: &Path) -> Result<(), EvalError> {
    let scene_dir = dir.join("scenes");
    std::fs::create_dir_all(&scene_dir).map_err(io_error(&scene_dir))?;
    for (scene, truth) in &benchmark.scenes {
        let id = scene.scene_id();
        save_scene(&scene.without_captions(), scene_dir.join(format!("{id}.json")))?;
        let captions: BTreeMap<u32, &str> =
            scene.objects().iter().filter_map(|o| o.caption().map(|c| (o.id().0, c))).collect();
        let write = |name: String, body: String| {
            let path = scene_dir.join(name);
            std::fs::write(&path, body + "\n").map_err(io_error(&path))
        };
        write(format!("{id}_captions.json"), serde_json::to_string_pretty(&captions).expect("serializes"))?;
        write(format!("{id}_truth.json"), serde_json::to_string_pretty(truth).expect("serializes"))?;
    }
    let path = dir.join("statements.jsonl");
    std::fs::write(&path, statements_to_jsonl(&benchmark.statements)).map_err(io_error(&path))
}

/// Indices of `n` records drawn so that each tag combination keeps its share
/// (largest remainder apportionment, seeded draw within each stratum).
/// Returned in ascending order.
pub fn stratified_sample(records: &[StatementRecord], n: usize, seed: u64) -> Vec<usize> {
    let n = n.min(records.len());
    let mut strata: BTreeMap<Vec<&str>, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        strata.entry(r.tags.iter().map(String::as_str).collect()).or_default().push(i);
    }
    let total = records.len() as f64;
    let mut quota: Vec<(usize, f64)> = strata
        .values()
        .map(|members| {
            let exact = n as f64 * members.len() as f64 / total;
            (exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut left = n - quota.iter().map(|q| q.0).sum::<usize>();
    let mut order: Vec<usize> = (0..quota.len()).collect();
    order.sort_by(|a, b| quota[*b].1.total_cmp(&quota[*a].1).then(a.cmp(b)));
    for i in order {
        if left == 0 {
            break;
        }
        quota[i].0 += 1;
        left -= 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = strata
        .values()
        .zip(&quota)
        .flat_map(|(members, (k, _))| {
            let mut m = members.clone();
            m.shuffle(&mut rng);
            m.truncate(*k);
            m
        })
        .collect();
    picked.sort_unstable();
    picked
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub captions_on: EvalReport,
    pub captions_off: EvalReport,
    /// Overall accuracy difference, percentage points.
    pub delta_pp: f64,
}

/// Generates a suite where every hard statement needs a color, material or
/// shape to single out its target, then evaluates it with and without
/// captions. A missing hard share defaults to one half.
pub fn captions_ablation(
    config: &BenchmarkConfig,
    seed: u64,
    grounder: &Grounder,
) -> Result<(Benchmark, AblationReport), EvalError> {
    let config = BenchmarkConfig {
        mix: SplitMix {
            hard: config.mix.hard.or(Some(0.5)),
            ..config.mix
        },
        statement: StatementConfig {
            attribute_mode: AttributeMode::RequireForHard,
            ..config.statement.clone()
        },
        ..config.clone()
    };
    let bench = generate_benchmark(&config, seed)?;
    let scenes = bench.scene_map();
    let statements = bench.numbered();
    let on = evaluate(&scenes, &statements, Vec::new(), &EvalOptions::deterministic(1), grounder)?;
    let off_options = EvalOptions {
        no_captions: true,
        ..EvalOptions::deterministic(1)
    };
    let off = evaluate(&scenes, &statements, Vec::new(), &off_options, grounder)?;
    let delta_pp = 100.0 * (on.splits.overall.mean - off.splits.overall.mean);
    Ok((
        bench,
        AblationReport {
            captions_on: on,
            captions_off: off,
            delta_pp,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    use crate::statement::RelationKind;

    fn record(tags: &[&str]) -> StatementRecord {
        StatementRecord {
            scene_id: "s".into(),
            utterance: "u".into(),
            target_id: crate::scene::ObjectId(0),
            tags: tags.iter().map(|t| t.to_string()).collect::<BTreeSet<_>>(),
            skip: false,
        }
    }

    #[test]
    fn stratified_keeps_shares() {
        let mut records: Vec<StatementRecord> = (0..30).map(|_| record(&["easy", "view_indep"])).collect();
        records.extend((0..10).map(|_| record(&["hard", "view_dep"])));
        let picked = stratified_sample(&records, 20, 3);
        assert_eq!(picked.len(), 20);
        assert_eq!(picked.iter().filter(|i| **i >= 30).count(), 5);
        assert_eq!(picked, stratified_sample(&records, 20, 3));
        assert!(picked.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn infeasible_mixes() {
        let config = BenchmarkConfig {
            n_statements: 8,
            n_scenes: 2,
            mix: SplitMix {
                view_dep: Some(0.25),
                hard: None,
            },
            statement: StatementConfig {
                relations: vec![RelationKind::Near, RelationKind::Closest],
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(matches!(generate_benchmark(&config, 1), Err(EvalError::InfeasibleMix(_))));
        let config = BenchmarkConfig {
            mix: SplitMix {
                view_dep: Some(1.5),
                hard: None,
            },
            ..Default::default()
        };
        assert!(matches!(generate_benchmark(&config, 1), Err(EvalError::InfeasibleMix(_))));
    }

    #[test]
    fn mix_counts_and_determinism() {
        let config = BenchmarkConfig {
            n_scenes: 6,
            n_statements: 40,
            mix: SplitMix {
                view_dep: Some(0.25),
                hard: None,
            },
            ..Default::default()
        };
        let a = generate_benchmark(&config, 11).unwrap();
        let vd = a.statements.iter().filter(|s| s.tags.contains("view_dep")).count();
        assert_eq!(vd, 10);
        let b = generate_benchmark(&config, 11).unwrap();
        assert_eq!(a.statements, b.statements);
    }
}

mod common;

use std::collections::BTreeSet;

use ground3d::eval::{generate_benchmark, BenchmarkConfig};
use ground3d::filter::{filter_scene, program_mentions, SynonymTable};
use ground3d::reasoner::{build_prompt, IN_CONTEXT_EXAMPLE};
use ground3d::toolbox::rank_closest;
use ground3d::{Grounder, ObjectId, SceneObject};

fn benchmark() -> ground3d::eval::Benchmark {
    let config = BenchmarkConfig {
        n_scenes: 25,
        n_statements: 300,
        ..Default::default()
    };
    generate_benchmark(&config, 31).unwrap()
}

#[test]
fn target_is_kept_and_filtering_is_transparent() {
    let grounder = Grounder::default();
    let bench = benchmark();
    let scenes = bench.scene_map();
    for s in &bench.statements {
        let scene = &scenes[&s.scene_id];
        let full = grounder.resolve_utterance(&s.utterance, scene).unwrap();
        let target = full.target_id.expect("generated statements resolve");
        assert!(full.filter.kept_ids.contains(&target), "{}", s.utterance);

        let reduced = scene.restricted_to(&full.filter.kept_ids);
        let again = grounder.resolve_utterance(&s.utterance, &reduced).unwrap();
        assert_eq!(again.target_id, Some(target), "{}", s.utterance);
        assert_eq!(again.ranked.ids(), full.ranked.ids(), "{}", s.utterance);
    }
}

#[test]
fn kept_ids_grow_with_mentions() {
    let grounder = Grounder::default();
    let bench = benchmark();
    let scenes = bench.scene_map();
    let synonyms = SynonymTable::builtin();
    for s in &bench.statements {
        let scene = &scenes[&s.scene_id];
        let mentions = program_mentions(&grounder.parse(&s.utterance).unwrap());
        let mut previous: BTreeSet<ObjectId> = BTreeSet::new();
        for n in 1..=mentions.len() {
            let kept = filter_scene(scene, &mentions[..n], synonyms).kept_ids;
            assert!(previous.is_subset(&kept), "{}: dropped ids after adding a mention", s.utterance);
            previous = kept;
        }
        let all = filter_scene(scene, &mentions, synonyms);
        assert_eq!(all.dropped_count, scene.objects().len() - all.kept_ids.len());
    }
}

#[test]
fn negated_best_match_is_never_returned() {
    let grounder = Grounder::default();
    let mut checked = 0;
    for (scene, _) in common::scenes(500, 120, (6, 30)) {
        let counts = scene.label_counts();
        let Some((&target, _)) = counts.iter().find(|(_, &n)| n >= 2) else { continue };
        let Some((&other, _)) = counts.iter().find(|(l, &n)| n == 1 && **l != target) else { continue };
        let Some((&third, _)) = counts.iter().find(|(l, &n)| n == 1 && **l != target && **l != other) else { continue };

        let positive = format!("the {target} near the {other}");
        let negated = format!("{positive}. NOT the {target} closest to the {third}");
        let before = grounder.resolve_utterance(&positive, &scene).unwrap();
        let after = grounder.resolve_utterance(&negated, &scene).unwrap();

        let pool: Vec<&SceneObject> = before.ranked.ids().iter().map(|id| scene.object(*id).unwrap()).collect();
        let anchor = scene.objects().iter().find(|o| o.label() == third).unwrap();
        let excluded = rank_closest(&pool, &[anchor]).unwrap().top().unwrap();
        assert_ne!(after.target_id, Some(excluded), "{negated}");
        assert!(!after.ranked.contains(excluded));
        assert_eq!(after.ranked.len(), pool.len() - 1);
        checked += 1;
    }
    assert!(checked >= 30, "only {checked} scenes had a usable layout");
}

#[test]
fn prompt_grows_linearly_with_kept_objects() {
    let (scene, _) = common::scenes(900, 1, (40, 50)).remove(0);
    let ids: Vec<ObjectId> = scene.objects().iter().map(|o| o.id()).collect();
    let points: Vec<(f64, f64)> = (0..=ids.len())
        .map(|n| {
            let kept: BTreeSet<ObjectId> = ids[..n].iter().copied().collect();
            let prompt = build_prompt(&scene, "the chair near the table", &kept, IN_CONTEXT_EXAMPLE);
            (n as f64, prompt.len() as f64)
        })
        .collect();
    let n = points.len() as f64;
    let (mx, my) = (points.iter().map(|p| p.0).sum::<f64>() / n, points.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = sxy * sxy / (sxx * syy);
    assert!(slope > 20.0 && slope < 400.0, "bytes per object {slope}");
    assert!(r2 > 0.98, "r^2 {r2}");
    let empty = build_prompt(&scene, "the chair near the table", &BTreeSet::new(), IN_CONTEXT_EXAMPLE);
    let rows = empty.split("\n\nObjects:\n").nth(1).unwrap();
    assert!(rows.starts_with("\nStatement:"), "no object rows expected");
}

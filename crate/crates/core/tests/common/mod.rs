//! Shared fixtures for the integration suites: seeded scenes, a brute-force
//! oracle for every ranking formula, rigid transforms, and the acceptance
//! checks.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use ground3d::eval::{captions_ablation, evaluate, generate_benchmark, BenchmarkConfig, EvalOptions};
use ground3d::reasoner::external::{run_external, ExternalReasonerConfig, ReplayBackend};
use ground3d::scene::{generate_scene, FreeSpaceGrid, GeneratorConfig, GroundTruth, Vec2, Vec3};
use ground3d::statement::{format_program, RelationKind};
use ground3d::toolbox::{execute, ToolCall, ToolRecord, ToolboxParams};
use ground3d::{object_to_waypoint, Grounder, ObjectId, ReasonerError, Scene, SceneObject};

pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seeded generator scene with an object count in `count`; seeds that
/// cannot place every object are skipped.
pub fn scenes(first_seed: u64, n: usize, count: (usize, usize)) -> Vec<(Scene, GroundTruth)> {
    let config = GeneratorConfig {
        object_count: count,
        classes_per_scene: (4, 9),
        room: [10.0, 10.0],
        ..GeneratorConfig::default()
    };
    (first_seed..)
        .filter_map(|seed| generate_scene(&config, seed).ok())
        .take(n)
        .collect()
}

fn ids_json(objs: &[&SceneObject]) -> Value {
    json!(objs.iter().map(|o| o.id().0).collect::<Vec<_>>())
}

// ---------------------------------------------------------------------------
// Oracle: the documented formulas, written out on plain arrays.

const FLOOR: f64 = -1e9;

fn center(o: &SceneObject) -> [f64; 3] {
    let c = o.center();
    [c.x, c.y, c.z]
}

fn half(o: &SceneObject) -> [f64; 3] {
    let e = o.extent();
    [e.x, e.y, e.z]
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let mut sq = 0.0;
    for i in 0..3 {
        let d = a[i] - b[i];
        sq += d * d;
    }
    sq.sqrt()
}

/// Candidate center to the anchor box surface; center to center when the
/// candidate center is inside the box.
pub fn oracle_distance(c: &SceneObject, a: &SceneObject) -> f64 {
    let (p, ac, ah) = (center(c), center(a), half(a));
    let mut nearest = [0.0; 3];
    for i in 0..3 {
        let (lo, hi) = (ac[i] - ah[i], ac[i] + ah[i]);
        nearest[i] = if p[i] < lo {
            lo
        } else if p[i] > hi {
            hi
        } else {
            p[i]
        };
    }
    let d = dist(p, nearest);
    if d > 0.0 {
        d
    } else {
        dist(p, ac)
    }
}

fn hdist(a: &SceneObject, b: &SceneObject) -> f64 {
    let (p, q) = (center(a), center(b));
    let (dx, dy) = (p[0] - q[0], p[1] - q[1]);
    (dx * dx + dy * dy).sqrt()
}

fn sort_desc(mut v: Vec<(u32, f64)>) -> Vec<(u32, f64)> {
    for e in &mut v {
        e.1 += 0.0;
    }
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    v
}

#[derive(Clone, Copy, Debug)]
pub struct OracleView {
    pub position: [f64; 2],
    pub forward: [f64; 2],
}

/// Exhaustive scan over every traversable cell in row-major order; the first
/// strictly nearer cell within the standoff annulus wins.
pub fn oracle_viewpoint(scene: &Scene, focus: [f64; 2], params: &ToolboxParams) -> Option<OracleView> {
    let g = scene.free_space();
    let mut best: Option<(f64, [f64; 2])> = None;
    for row in 0..g.height() {
        for col in 0..g.width() {
            if !g.cells()[row * g.width() + col] {
                continue;
            }
            let x = g.origin().x + (col as f64 + 0.5) * g.resolution();
            let y = g.origin().y + (row as f64 + 0.5) * g.resolution();
            let (dx, dy) = (x - focus[0], y - focus[1]);
            let d = (dx * dx + dy * dy).sqrt();
            if d < params.standoff || d > params.search_radius {
                continue;
            }
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, [x, y]));
            }
        }
    }
    best.map(|(d, p)| OracleView {
        position: p,
        forward: [(focus[0] - p[0]) / d, (focus[1] - p[1]) / d],
    })
}

pub fn oracle_centroid(objs: &[&SceneObject]) -> [f64; 2] {
    let mut sorted = objs.to_vec();
    sorted.sort_by_key(|o| o.id());
    let (mut x, mut y) = (0.0, 0.0);
    for o in &sorted {
        x += center(o)[0];
        y += center(o)[1];
    }
    [x / sorted.len() as f64, y / sorted.len() as f64]
}

/// Full ranking for `tool` as `(id, score)` best first.
pub fn oracle_rank(
    tool: &str,
    cands: &[&SceneObject],
    anchors: &[&SceneObject],
    k: u32,
    view: Option<OracleView>,
    p: &ToolboxParams,
) -> Vec<(u32, f64)> {
    let score = |f: &dyn Fn(&SceneObject) -> f64| sort_desc(cands.iter().map(|c| (c.id().0, f(c))).collect());
    match tool {
        "rank_near" => score(&|c| {
            let d = oracle_distance(c, anchors[0]);
            if d <= p.near_radius {
                p.near_radius - d
            } else {
                0.0
            }
        }),
        "rank_closest" => score(&|c| -oracle_distance(c, anchors[0])),
        "rank_farthest" => score(&|c| oracle_distance(c, anchors[0])),
        "rank_ordinal_closest" => {
            let closest = score(&|c| -oracle_distance(c, anchors[0]));
            if k <= 1 {
                return closest;
            }
            let n = closest.len();
            (0..n).map(|i| (closest[(i + k as usize - 1) % n].0, -(i as f64))).collect()
        }
        "rank_between" => {
            let (a, b) = (center(anchors[0]), center(anchors[1]));
            let (sx, sy) = (b[0] - a[0], b[1] - a[1]);
            let len = (sx * sx + sy * sy).sqrt();
            let (mx, my) = ((a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0);
            score(&|c| {
                let q = center(c);
                let (px, py) = (q[0] - mx, q[1] - my);
                if len < 1e-9 {
                    return -(px * px + py * py).sqrt();
                }
                let (ux, uy) = (sx / len, sy / len);
                let along = px * ux + py * uy;
                let (lx, ly) = (px - ux * along, py - uy * along);
                let lateral = (lx * lx + ly * ly).sqrt();
                let overshoot = (along.abs() - len / 2.0).max(0.0);
                -(lateral + p.between_alpha * overshoot)
            })
        }
        "rank_above" | "rank_below" | "rank_on_top_of" => {
            let a = anchors[0];
            let (atop, abot) = (center(a)[2] + half(a)[2], center(a)[2] - half(a)[2]);
            score(&|c| {
                let (ctop, cbot) = (center(c)[2] + half(c)[2], center(c)[2] - half(c)[2]);
                let overlap = (0..2).all(|i| (center(c)[i] - center(a)[i]).abs() < half(c)[i] + half(a)[i]);
                let pass = match tool {
                    "rank_above" => cbot >= atop - p.vertical_gap,
                    "rank_below" => ctop <= abot + p.vertical_gap,
                    _ => cbot >= atop - p.vertical_gap && cbot - atop <= p.contact_tolerance && overlap,
                };
                if pass {
                    -hdist(c, a)
                } else {
                    FLOOR
                }
            })
        }
        "rank_left" | "rank_right" | "rank_front" | "rank_behind" => {
            let v = view.expect("directional ranking needs a viewpoint");
            let [fx, fy] = v.forward;
            let (rx, ry) = (fy, -fx);
            let origin = match anchors.first() {
                Some(a) => [center(a)[0], center(a)[1]],
                None => v.position,
            };
            score(&|c| {
                let (vx, vy) = (center(c)[0] - origin[0], center(c)[1] - origin[1]);
                let lateral = vx * rx + vy * ry;
                let depth = vx * fx + vy * fy;
                match tool {
                    "rank_left" => -lateral,
                    "rank_right" => lateral,
                    "rank_front" => depth,
                    _ => -depth,
                }
            })
        }
        other => panic!("no oracle for {other}"),
    }
}

pub fn record_pairs(r: &ToolRecord) -> Vec<(u32, f64)> {
    r.result_ids.iter().map(|i| i.0).zip(r.scores.iter().copied()).collect()
}

/// Same order, and scores agree to `tol`.
pub fn same_ranking(got: &[(u32, f64)], want: &[(u32, f64)], tol: f64) -> Result<(), String> {
    let (gi, wi): (Vec<u32>, Vec<u32>) = (got.iter().map(|e| e.0).collect(), want.iter().map(|e| e.0).collect());
    if gi != wi {
        return Err(format!("order {gi:?} != {wi:?}"));
    }
    for (g, w) in got.iter().zip(want) {
        if (g.1 - w.1).abs() > tol * (1.0 + w.1.abs()) {
            return Err(format!("score of {} is {} not {}", g.0, g.1, w.1));
        }
    }
    Ok(())
}

/// `got` lists the same ids as `reference`, ordered by the reference scores
/// best first, with neighbours whose reference scores differ by at most
/// `tol` allowed in either order.
pub fn order_consistent(got: &[u32], reference: &[(u32, f64)], tol: f64) -> Result<(), String> {
    let score = |id: u32| reference.iter().find(|e| e.0 == id).map(|e| e.1);
    let mut a: Vec<u32> = got.to_vec();
    let mut b: Vec<u32> = reference.iter().map(|e| e.0).collect();
    a.sort_unstable();
    b.sort_unstable();
    if a != b {
        return Err(format!("id sets differ: {got:?} vs {reference:?}"));
    }
    for w in got.windows(2) {
        let (x, y) = (score(w[0]).unwrap(), score(w[1]).unwrap());
        let slack = tol * (1.0 + x.abs().max(y.abs()));
        if x < y - slack {
            return Err(format!("{} ({x}) ranked above {} ({y})", w[0], w[1]));
        }
    }
    Ok(())
}

pub const RANK_TOOLS: [&str; 14] = [
    "rank_near",
    "rank_closest",
    "rank_farthest",
    "rank_ordinal_closest",
    "rank_ordinal_closest",
    "rank_between",
    "rank_above",
    "rank_below",
    "rank_on_top_of",
    "rank_left",
    "rank_right",
    "rank_front",
    "rank_behind",
    "rank_left",
];

pub fn is_directional(tool: &str) -> bool {
    matches!(tool, "rank_left" | "rank_right" | "rank_front" | "rank_behind")
}

/// A random, valid call for `tool` on `scene`: disjoint anchors and a
/// non-empty candidate set in random order.
pub struct Instance<'a> {
    pub tool: &'static str,
    pub cands: Vec<&'a SceneObject>,
    pub anchors: Vec<&'a SceneObject>,
    pub k: u32,
    pub view: Option<OracleView>,
}

pub fn random_view(scene: &Scene, r: &mut ChaCha8Rng) -> OracleView {
    let g = scene.free_space();
    let free: Vec<_> = g.free_cells().collect();
    let c = g.cell_center(*free.choose(r).expect("free cells"));
    let t: f64 = r.random_range(0.0..std::f64::consts::TAU);
    OracleView {
        position: [c.x, c.y],
        forward: [t.cos(), t.sin()],
    }
}

pub fn instance<'a>(scene: &'a Scene, tool: &'static str, r: &mut ChaCha8Rng) -> Option<Instance<'a>> {
    let mut objs: Vec<&SceneObject> = scene.objects().iter().collect();
    objs.shuffle(r);
    let n_anchors = match tool {
        "rank_between" => 2,
        t if is_directional(t) => r.random_range(0..=1),
        _ => 1,
    };
    if objs.len() <= n_anchors {
        return None;
    }
    let anchors: Vec<&SceneObject> = objs.drain(..n_anchors).collect();
    let keep = r.random_range(1..=objs.len());
    let cands: Vec<&SceneObject> = objs.into_iter().take(keep).collect();
    let k = if tool == "rank_ordinal_closest" { r.random_range(1..=cands.len() as u32) } else { 0 };
    let view = is_directional(tool).then(|| random_view(scene, r));
    Some(Instance {
        tool,
        cands,
        anchors,
        k,
        view,
    })
}

pub fn call_for(inst: &Instance) -> ToolCall {
    let mut args = json!({"candidates": ids_json(&inst.cands), "anchors": ids_json(&inst.anchors)});
    if inst.tool == "rank_ordinal_closest" {
        args["k"] = json!(inst.k);
    }
    if let Some(v) = inst.view {
        args["viewpoint"] = json!({"position": v.position, "forward": v.forward});
    }
    ToolCall::new(inst.tool, args)
}

fn normalized(v: OracleView) -> OracleView {
    let [x, y] = v.forward;
    let n = (x * x + y * y).sqrt();
    OracleView {
        forward: [x / n, y / n],
        ..v
    }
}

pub fn oracle_for(inst: &Instance, p: &ToolboxParams) -> Vec<(u32, f64)> {
    oracle_rank(inst.tool, &inst.cands, &inst.anchors, inst.k, inst.view.map(normalized), p)
}

// ---------------------------------------------------------------------------
// Transforms.

/// Quarter turns about +z followed by an xy translation. The grid becomes
/// an all-free grid covering the moved room so explicit viewpoints stay
/// valid.
pub fn transform_scene(scene: &Scene, quarter: u8, shift: [f64; 2], scale: f64) -> Scene {
    let objects = scene
        .objects()
        .iter()
        .map(|o| {
            let (c, e) = (o.center(), o.extent());
            let [x, y] = rotate([c.x, c.y], quarter);
            let (ex, ey) = if quarter % 2 == 1 { (e.y, e.x) } else { (e.x, e.y) };
            let mut moved = SceneObject::new(
                o.id(),
                o.label(),
                Vec3::new((x + shift[0]) * scale, (y + shift[1]) * scale, c.z * scale),
                Vec3::new(ex * scale, ey * scale, e.z * scale),
            )
            .unwrap();
            if let Some(cap) = o.caption() {
                moved = moved.with_caption(cap);
            }
            moved
        })
        .collect();
    let res = scene.free_space().resolution() * scale;
    let span = 80.0 * scale;
    let cells = (2.0 * span / res).ceil() as usize;
    let grid = FreeSpaceGrid::all_free(Vec2::new(-span, -span), res, cells, cells).unwrap();
    Scene::new(scene.scene_id(), objects, grid).unwrap()
}

pub fn rotate([x, y]: [f64; 2], quarter: u8) -> [f64; 2] {
    match quarter % 4 {
        0 => [x, y],
        1 => [-y, x],
        2 => [-x, -y],
        _ => [y, -x],
    }
}

pub fn transform_view(v: OracleView, quarter: u8, shift: [f64; 2], scale: f64) -> OracleView {
    let [x, y] = rotate(v.position, quarter);
    OracleView {
        position: [(x + shift[0]) * scale, (y + shift[1]) * scale],
        forward: rotate(v.forward, quarter),
    }
}

pub fn remap<'a>(scene: &'a Scene, objs: &[&SceneObject]) -> Vec<&'a SceneObject> {
    objs.iter().map(|o| scene.object(o.id()).unwrap()).collect()
}

// ---------------------------------------------------------------------------
// Acceptance checks. Each returns a one-line detail on success.

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

pub fn check_oracle_equivalence(n_scenes: usize) -> Check {
    let params = ToolboxParams::default();
    let (result, elapsed) = timed(|| -> Check {
        let mut compared = 0usize;
        let mut viewpoints = 0usize;
        for (i, (scene, _)) in scenes(10_000, n_scenes, (5, 50)).iter().enumerate() {
            let mut r = rng(i as u64);
            for tool in RANK_TOOLS {
                for _ in 0..2 {
                    let Some(inst) = instance(scene, tool, &mut r) else { continue };
                    let got = execute(scene, &call_for(&inst), &params)
                        .map_err(|e| format!("scene {i} {tool}: {e}"))?;
                    same_ranking(&record_pairs(&got), &oracle_for(&inst, &params), 0.0)
                        .map_err(|e| format!("scene {i} {tool}: {e}"))?;
                    compared += 1;
                }
            }
            // Sampled viewpoints against the exhaustive scan, then a
            // directional ranking from the sampled pose.
            let objs: Vec<&SceneObject> = scene.objects().iter().collect();
            let anchor = *objs.choose(&mut r).unwrap();
            let want = oracle_viewpoint(scene, [center(anchor)[0], center(anchor)[1]], &params);
            let got = execute(scene, &ToolCall::new("sample_viewpoint", json!({"view_anchor": anchor.id().0})), &params);
            match (got, want) {
                (Ok(rec), Some(w)) => {
                    let s = &rec.scores;
                    if [s[0], s[1], s[2], s[3]] != [w.position[0], w.position[1], w.forward[0], w.forward[1]] {
                        return Err(format!("scene {i}: viewpoint {s:?} != {w:?}"));
                    }
                }
                (Err(_), None) => {}
                (g, w) => return Err(format!("scene {i}: viewpoint {g:?} vs oracle {w:?}")),
            }
            let cands: Vec<&SceneObject> = objs.iter().copied().filter(|o| o.id() != anchor.id()).collect();
            let focus = oracle_centroid(&cands);
            if let Some(view) = oracle_viewpoint(scene, focus, &params) {
                let call = ToolCall::new("rank_behind", json!({"candidates": ids_json(&cands), "anchors": []}));
                let got = execute(scene, &call, &params).map_err(|e| format!("scene {i}: {e}"))?;
                same_ranking(&record_pairs(&got), &oracle_rank("rank_behind", &cands, &[], 0, Some(view), &params), 0.0)
                    .map_err(|e| format!("scene {i} sampled rank_behind: {e}"))?;
            }
            viewpoints += 1;
        }
        Ok(format!("{compared} rankings and {viewpoints} sampled viewpoints over {n_scenes} scenes, all 12 relations"))
    });
    let detail = result?;
    if elapsed > Duration::from_secs(60) {
        return Err(format!("{detail}, but took {elapsed:?} (limit 60 s)"));
    }
    Ok(format!("{detail}, {:.2} s", elapsed.as_secs_f64()))
}

pub fn check_end_to_end(n: usize) -> Check {
    let grounder = Grounder::default();
    let config = BenchmarkConfig {
        n_scenes: 50,
        n_statements: n,
        ..Default::default()
    };
    let (bench, gen_time) = timed(|| generate_benchmark(&config, 2024));
    let bench = bench.map_err(|e| e.to_string())?;
    let (report, eval_time) =
        timed(|| evaluate(&bench.scene_map(), &bench.numbered(), vec![], &EvalOptions::deterministic(1), &grounder));
    let report = report.map_err(|e| e.to_string())?;
    let elapsed = gen_time + eval_time;
    let mut kinds = BTreeSet::new();
    let mut tags = BTreeSet::new();
    for s in &bench.statements {
        let p = grounder.parse(&s.utterance).map_err(|e| format!("{:?}: {e}", s.utterance))?;
        kinds.extend(p.terms.iter().map(|t| t.relation.kind()));
        tags.extend(s.tags.iter().cloned());
    }
    let missing: Vec<_> = RelationKind::ALL.iter().filter(|k| !kinds.contains(k)).collect();
    if !missing.is_empty() {
        return Err(format!("relations not covered: {missing:?}"));
    }
    if tags.len() != 4 {
        return Err(format!("split tags covered: {tags:?}"));
    }
    let acc = report.splits.overall.mean;
    let detail = format!(
        "accuracy {:.2}% on {n} statements, 12 relations, 4 split tags; generated in {:.2} s, grounded in {:.2} s",
        100.0 * acc,
        gen_time.as_secs_f64(),
        eval_time.as_secs_f64()
    );
    if acc < 0.99 || elapsed > Duration::from_secs(10) {
        return Err(detail);
    }
    Ok(detail)
}

pub fn check_determinism() -> Check {
    let grounder = Grounder::default();
    let config = BenchmarkConfig {
        n_scenes: 20,
        n_statements: 300,
        ..Default::default()
    };
    let bench = generate_benchmark(&config, 77).map_err(|e| e.to_string())?;
    let scenes = bench.scene_map();
    let run = || evaluate(&scenes, &bench.numbered(), vec![], &EvalOptions::deterministic(3), &grounder);
    let a = run().map_err(|e| e.to_string())?;
    let b = run().map_err(|e| e.to_string())?;
    for (name, s) in a.splits.rows() {
        if s.std != 0.0 {
            return Err(format!("{name} std {}", s.std));
        }
    }
    if a.to_json() != b.to_json() {
        return Err("two deterministic runs produced different reports".into());
    }
    let mut replayed = 0;
    for s in &bench.statements {
        let scene = &scenes[&s.scene_id];
        let result = grounder.resolve_utterance(&s.utterance, scene).map_err(|e| e.to_string())?;
        match grounder.replay(scene, &result.trace) {
            Ok(None) => replayed += 1,
            Ok(Some(i)) => return Err(format!("{:?}: trace step {i} diverged", s.utterance)),
            Err(e) => return Err(format!("{:?}: replay failed: {e}", s.utterance)),
        }
    }
    Ok(format!("std 0 on all 5 splits over 3 trials; {replayed}/{} traces replay exactly; reports byte-identical", bench.statements.len()))
}

/// Reflects xy across the line through the viewpoint along its forward axis.
fn mirror_point(p: [f64; 2], v: &OracleView) -> [f64; 2] {
    let [fx, fy] = v.forward;
    let (dx, dy) = (p[0] - v.position[0], p[1] - v.position[1]);
    let along = dx * fx + dy * fy;
    let (px, py) = (fx * along, fy * along);
    [v.position[0] + 2.0 * px - dx, v.position[1] + 2.0 * py - dy]
}

fn mirror_scene(scene: &Scene, v: &OracleView) -> Scene {
    let objects = scene
        .objects()
        .iter()
        .map(|o| {
            let c = o.center();
            let [x, y] = mirror_point([c.x, c.y], v);
            SceneObject::new(o.id(), o.label(), Vec3::new(x, y, c.z), o.extent()).unwrap()
        })
        .collect();
    let grid = FreeSpaceGrid::all_free(Vec2::new(-40.0, -40.0), 0.5, 160, 160).unwrap();
    Scene::new(scene.scene_id(), objects, grid).unwrap()
}

pub fn check_mirror_symmetry(n: usize) -> Check {
    let params = ToolboxParams::default();
    let all = scenes(20_000, n, (5, 30));
    let mut reversed = 0;
    for (i, (scene, _)) in all.iter().enumerate() {
        let mut r = rng(i as u64 + 7);
        let inst = instance(scene, "rank_left", &mut r).ok_or("scene too small")?;
        let view = normalized(inst.view.unwrap());
        let run = |tool: &str, s: &Scene, cands: &[&SceneObject], anchors: &[&SceneObject], v: OracleView| {
            let mut args = json!({"candidates": ids_json(cands), "anchors": ids_json(anchors)});
            args["viewpoint"] = json!({"position": v.position, "forward": v.forward});
            execute(s, &ToolCall::new(tool, args), &params).map(|r| record_pairs(&r))
        };
        let left = run("rank_left", scene, &inst.cands, &inst.anchors, view).map_err(|e| e.to_string())?;
        let right = run("rank_right", scene, &inst.cands, &inst.anchors, view).map_err(|e| e.to_string())?;
        // Exact reversal whenever lateral projections are distinct.
        let distinct = left.windows(2).all(|w| w[0].1 != w[1].1);
        if distinct {
            let mut rev: Vec<u32> = right.iter().map(|e| e.0).collect();
            rev.reverse();
            if rev != left.iter().map(|e| e.0).collect::<Vec<_>>() {
                return Err(format!("instance {i}: rank_left is not the reverse of rank_right"));
            }
            reversed += 1;
        }
        // Mirroring the scene across the view axis swaps left and right.
        let mirrored = mirror_scene(scene, &view);
        let mirrored_left = run("rank_left", &mirrored, &remap(&mirrored, &inst.cands), &remap(&mirrored, &inst.anchors), view)
            .map_err(|e| e.to_string())?;
        let ids: Vec<u32> = mirrored_left.iter().map(|e| e.0).collect();
        order_consistent(&ids, &right, 1e-9).map_err(|e| format!("instance {i}: mirrored left vs right: {e}"))?;
    }
    Ok(format!("{n} directional instances; {reversed} without lateral ties reversed exactly; mirrored scenes swap left and right"))
}

pub fn check_rigid_invariance(n: usize) -> Check {
    let params = ToolboxParams::default();
    let mut compared = 0;
    for (i, (scene, _)) in scenes(30_000, n, (5, 40)).iter().enumerate() {
        let mut r = rng(i as u64 + 99);
        let quarter = r.random_range(0..4u8);
        let shift = [r.random_range(-25.0..25.0), r.random_range(-25.0..25.0)];
        let moved = transform_scene(scene, quarter, shift, 1.0);
        for tool in RANK_TOOLS {
            let Some(inst) = instance(scene, tool, &mut r) else { continue };
            let base = execute(scene, &call_for(&inst), &params).map_err(|e| e.to_string())?;
            let moved_inst = Instance {
                tool,
                cands: remap(&moved, &inst.cands),
                anchors: remap(&moved, &inst.anchors),
                k: inst.k,
                view: inst.view.map(|v| transform_view(v, quarter, shift, 1.0)),
            };
            let got = execute(&moved, &call_for(&moved_inst), &params).map_err(|e| e.to_string())?;
            let ids: Vec<u32> = got.result_ids.iter().map(|i| i.0).collect();
            let fail = |e: String| format!("scene {i} {tool} (quarter {quarter}): {e}");
            if tool == "rank_ordinal_closest" {
                // Index scores are not continuous in the geometry; compare the
                // distance of the k-th closest instead.
                let dist_of = |s: &Scene, id: u32| oracle_distance(s.object(ObjectId(id)).unwrap(), s.object(inst.anchors[0].id()).unwrap());
                let (a, b) = (dist_of(scene, base.result_ids[0].0), dist_of(&moved, ids[0]));
                if (a - b).abs() > 1e-9 * (1.0 + a) {
                    return Err(fail(format!("k-th closest distance {b} != {a}")));
                }
            } else {
                order_consistent(&ids, &record_pairs(&base), 1e-9).map_err(fail)?;
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} rank orders preserved under quarter turns plus translation over {n} scenes"))
}

pub fn check_captions_ablation() -> Check {
    let grounder = Grounder::default();
    let config = BenchmarkConfig {
        n_scenes: 30,
        n_statements: 200,
        ..Default::default()
    };
    let (_, report) = captions_ablation(&config, 404, &grounder).map_err(|e| e.to_string())?;
    let on = report.captions_on.splits.overall.mean;
    let off = report.captions_off.splits.overall.mean;
    let detail = format!("captions on {:.1}%, off {:.1}%, difference {:.1} pp", 100.0 * on, 100.0 * off, report.delta_pp);
    if on < 1.0 || report.delta_pp < 30.0 || on < off {
        return Err(detail);
    }
    Ok(detail)
}

pub fn scan_waypoint(scene: &Scene, id: ObjectId) -> Option<[f64; 2]> {
    let o = scene.object(id)?;
    let c = center(o);
    let g = scene.free_space();
    let mut best: Option<(f64, [f64; 2])> = None;
    for row in 0..g.height() {
        for col in 0..g.width() {
            if !g.cells()[row * g.width() + col] {
                continue;
            }
            let x = g.origin().x + (col as f64 + 0.5) * g.resolution();
            let y = g.origin().y + (row as f64 + 0.5) * g.resolution();
            let d2 = (x - c[0]) * (x - c[0]) + (y - c[1]) * (y - c[1]);
            if best.is_none_or(|(bd, _)| d2 < bd) {
                best = Some((d2, [x, y]));
            }
        }
    }
    best.map(|b| b.1)
}

pub fn check_waypoints(n: usize) -> Check {
    let mut checked = 0;
    for (i, (scene, _)) in scenes(40_000, n, (5, 40)).iter().enumerate() {
        for o in scene.objects() {
            let got = object_to_waypoint(scene, o.id()).map_err(|e| format!("scene {i}: {e}"))?;
            let want = scan_waypoint(scene, o.id()).ok_or("scene without free cells")?;
            if [got.x, got.y] != want {
                return Err(format!("scene {i} object {}: {got:?} != scan {want:?}", o.id()));
            }
            let g = scene.free_space();
            if !g.cell_of(got).is_some_and(|c| g.is_free(c)) {
                return Err(format!("scene {i} object {}: waypoint not traversable", o.id()));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} objects over {n} scenes match the exhaustive scan; all waypoints traversable"))
}

/// Random UTF-8 strings and word salads drawn from the grammar's own words.
pub fn fuzz_input(r: &mut ChaCha8Rng) -> String {
    const WORDS: &[&str] = &[
        "the", "a", "an", "chair", "table", "closet", "door", "lamp", "beds", "bed", "between", "and", "or", "not",
        "NOT", "closest", "to", "second", "third", "from", "left", "right", "of", "on", "top", "above", "below",
        "under", "in", "front", "behind", "facing", "if", "you", "are", "when", "near", "next", "farthest", "red",
        "wooden", "tall", "largest", "smaller", "that", "is", "which", ",", ".", ";", "|", "&", "+", "!", "(", ")",
        "@", "{", "}", "=", "color=red", "chair{", "near(", "0", "99999999999999999999", "twentieth", "'s", "-",
    ];
    match r.random_range(0..3) {
        0 => {
            let len = r.random_range(0..48);
            (0..len)
                .map(|_| match r.random_range(0..4) {
                    0 => char::from(r.random_range(0x20u8..0x7f)),
                    1 => char::from_u32(r.random_range(0x80..0x2FFF)).unwrap_or('?'),
                    2 => *[' ', ',', '.', '|', '(', ')', '@', '{', '}', '=', '&', '!', '+', '\n', '\t'].choose(r).unwrap(),
                    _ => char::from_u32(r.random_range(0x1F300..0x1F6FF)).unwrap_or('x'),
                })
                .collect()
        }
        _ => {
            let len = r.random_range(0..24);
            let sep = if r.random_bool(0.8) { " " } else { "" };
            (0..len).map(|_| *WORDS.choose(r).unwrap()).collect::<Vec<_>>().join(sep)
        }
    }
}

pub fn check_parser(n_fuzz: usize) -> Check {
    let grounder = Grounder::default();
    let bench = generate_benchmark(
        &BenchmarkConfig {
            n_scenes: 30,
            n_statements: 1000,
            ..Default::default()
        },
        5150,
    )
    .map_err(|e| e.to_string())?;
    for s in &bench.statements {
        let p = grounder.parse(&s.utterance).map_err(|e| format!("{:?}: {e}", s.utterance))?;
        let canonical = format_program(&p);
        let back = grounder.parse(&canonical).map_err(|e| format!("{canonical:?}: {e}"))?;
        if back != p {
            return Err(format!("round trip changed {:?}", s.utterance));
        }
    }
    let quoted = [
        ("the chair closest to the closet door", "chair | closest(closet door)"),
        ("the second chair from the window", "chair | closest#2(window)"),
        ("the lamp to the left of the desk. NOT the lamp between the beds", "lamp | left_of(desk) ! between(bed, bed)"),
    ];
    for (text, want) in quoted {
        let got = grounder.parse(text).map(|p| format_program(&p)).map_err(|e| format!("{text:?}: {e}"))?;
        if got != want {
            return Err(format!("{text:?} parsed to {got:?}, expected {want:?}"));
        }
    }
    let previous = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut r = rng(1);
    let mut panics = 0usize;
    let mut accepted = 0usize;
    for _ in 0..n_fuzz {
        let input = fuzz_input(&mut r);
        match std::panic::catch_unwind(|| grounder.parse(&input).is_ok()) {
            Ok(ok) => accepted += ok as usize,
            Err(_) => panics += 1,
        }
    }
    std::panic::set_hook(previous);
    if panics > 0 {
        return Err(format!("{panics} panics in {n_fuzz} fuzz inputs"));
    }
    Ok(format!(
        "{} generator statements parse and round-trip; 3 quoted patterns match; {n_fuzz} fuzz inputs, 0 panics ({accepted} accepted)",
        bench.statements.len()
    ))
}

/// Two chairs and a door; chair 1 is closer to the door.
pub fn protocol_scene() -> Scene {
    let mk = |id: u32, label: &str, x: f64| {
        SceneObject::new(ObjectId(id), label, Vec3::new(x, 2.0, 0.45), Vec3::new(0.25, 0.25, 0.45)).unwrap()
    };
    let grid = FreeSpaceGrid::all_free(Vec2::zeros(), 0.5, 12, 8).unwrap();
    Scene::new("protocol", vec![mk(1, "chair", 1.5), mk(2, "chair", 4.5), mk(3, "door", 0.2)], grid).unwrap()
}

pub fn replay_config() -> ExternalReasonerConfig {
    ExternalReasonerConfig {
        max_rounds: 3,
        ..Default::default()
    }
}

pub fn converse(replies: &[&str]) -> (Result<ground3d::GroundingResult, ReasonerError>, ReplayBackend) {
    let scene = protocol_scene();
    let mut backend = ReplayBackend::new(replies.iter().copied());
    let result = run_external(&replay_config(), &mut backend, &Grounder::default(), &scene, "the chair that is nearest the door");
    (result, backend)
}

pub const CLOSEST_CALL: &str =
    r#"{"tool_calls": [{"tool": "rank_closest", "args": {"candidates": [1, 2], "anchors": [3]}}]}"#;

pub fn check_external_protocol() -> Check {
    let (happy, backend) = converse(&[CLOSEST_CALL, r#"{"answer": 1}"#]);
    let happy = happy.map_err(|e| format!("happy path: {e}"))?;
    if happy.target_id != Some(ObjectId(1)) || happy.trace.len() != 1 || backend.requests.len() != 2 {
        return Err(format!("happy path: {happy:?}"));
    }
    let (retry, _) = converse(&["let me think", r#"{"answer": 1}"#]);
    if retry.ok().and_then(|r| r.target_id) != Some(ObjectId(1)) {
        return Err("single malformed reply was not retried".into());
    }
    let (twice, _) = converse(&["not json", "{\"tool_calls\": 5}"]);
    if !matches!(twice, Err(ReasonerError::MalformedToolCall(_))) {
        return Err(format!("malformed twice: {twice:?}"));
    }
    let (limit, _) = converse(&[CLOSEST_CALL, CLOSEST_CALL, CLOSEST_CALL, r#"{"answer": 1}"#]);
    if !matches!(limit, Err(ReasonerError::RoundLimit(3))) {
        return Err(format!("round limit: {limit:?}"));
    }
    let (bad, _) = converse(&[r#"{"answer": 42}"#]);
    if !matches!(bad, Err(ReasonerError::UnknownAnswer(ObjectId(42)))) {
        return Err(format!("bad answer id: {bad:?}"));
    }
    Ok("happy path, malformed retry, malformed twice, round limit and unknown answer id behave as specified, offline".into())
}

//! Relevance filtering: find the object classes a statement mentions and
//! keep only the scene objects that could be referred to.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::scene::{ObjectId, Scene, SceneError, SceneObject, Vocabulary};
use crate::statement::{normalize_class, singularize, ObjectDescriptor, Parser, RelationProgram, SizeComparative};

const BUILTIN_SYNONYMS: &str = include_str!("../data/synonyms.json");

static BUILTIN: LazyLock<SynonymTable> =
    LazyLock::new(|| SynonymTable::from_json(BUILTIN_SYNONYMS).expect("bundled synonym table is valid"));

/// Class synonym groups. Every name in a group maps to the group's key.
#[derive(Clone, Debug, Default)]
pub struct SynonymTable {
    canonical: BTreeMap<String, String>,
}

/// How strongly a label matches a mention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum MatchTier {
    /// Same class or synonym.
    Exact,
    /// Same head noun ("closet door" and "door").
    HeadNoun,
    /// One name contains the other.
    Substring,
}

impl SynonymTable {
    pub fn builtin() -> &'static SynonymTable {
        &BUILTIN
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let groups: BTreeMap<String, Vec<String>> = serde_json::from_str(text)?;
        let mut canonical = BTreeMap::new();
        for (class, synonyms) in groups {
            let key = normalize_class(&class);
            for name in synonyms.iter().map(|s| normalize_class(s)).chain([key.clone()]) {
                canonical.entry(name).or_insert_with(|| key.clone());
            }
        }
        Ok(Self { canonical })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SceneError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Group key for a class name; unknown names map to themselves.
    pub fn canonical(&self, name: &str) -> String {
        let n = normalize_class(name);
        self.canonical.get(&n).cloned().unwrap_or(n)
    }

    /// Every class name and synonym in the table.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.canonical.keys().map(String::as_str)
    }

    /// Best tier at which `label` matches the mentioned class, if any.
    pub fn match_tier(&self, mention: &str, label: &str) -> Option<MatchTier> {
        let (m, l) = (normalize_class(mention), normalize_class(label));
        if m.is_empty() || l.is_empty() {
            return None;
        }
        if self.canonical(&m) == self.canonical(&l) {
            return Some(MatchTier::Exact);
        }
        let head = |s: &str| s.rsplit(' ').next().unwrap_or("").to_string();
        let (hm, hl) = (head(&m), head(&l));
        if hm == hl || self.canonical(&hm) == self.canonical(&hl) {
            return Some(MatchTier::HeadNoun);
        }
        if l.contains(&m) || m.contains(&l) {
            return Some(MatchTier::Substring);
        }
        None
    }

    /// Objects of the mentioned class: exact or synonym matches if any,
    /// otherwise head-noun matches, otherwise substring matches. Result is
    /// in pool order.
    pub fn select_class<'a>(&self, pool: &[&'a SceneObject], class_name: &str) -> Vec<&'a SceneObject> {
        let tiers: Vec<Option<MatchTier>> = pool.iter().map(|o| self.match_tier(class_name, o.label())).collect();
        for tier in [MatchTier::Exact, MatchTier::HeadNoun, MatchTier::Substring] {
            let hits: Vec<&SceneObject> = pool
                .iter()
                .zip(&tiers)
                .filter(|(_, t)| **t == Some(tier))
                .map(|(o, _)| *o)
                .collect();
            if !hits.is_empty() {
                return hits;
            }
        }
        Vec::new()
    }

    /// Mentions in a free-form utterance. Statements in the template grammar
    /// yield the parsed descriptors; anything else is scanned for known class
    /// names (the table plus `extra_classes`), longest match first, and the
    /// attribute words right before each name are attached.
    pub fn extract_mentions<'c>(
        &self,
        utterance: &str,
        vocab: &Vocabulary,
        extra_classes: impl IntoIterator<Item = &'c str>,
    ) -> Vec<ObjectDescriptor> {
        if utterance.trim().is_empty() {
            return Vec::new();
        }
        if let Ok(program) = Parser::new(vocab).parse(utterance) {
            return program_mentions(&program);
        }
        let mut classes: BTreeSet<Vec<String>> = self.names().map(split_words).collect();
        classes.extend(extra_classes.into_iter().map(|c| split_words(&normalize_class(c))));
        let longest = classes.iter().map(Vec::len).max().unwrap_or(0);

        let words: Vec<String> = utterance
            .split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '\''))
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect();
        let mut out: Vec<ObjectDescriptor> = Vec::new();
        let mut i = 0;
        while i < words.len() {
            let hit = (1..=longest.min(words.len() - i)).rev().find_map(|n| {
                let mut phrase: Vec<String> = words[i..i + n].to_vec();
                let last = phrase.pop().expect("n >= 1");
                phrase.push(singularize(&last).0);
                classes.contains(&phrase).then_some((n, phrase.join(" ")))
            });
            let Some((n, class_name)) = hit else {
                i += 1;
                continue;
            };
            let mut d = ObjectDescriptor::new(class_name);
            let mut j = i;
            while j > 0 {
                let w = &words[j - 1];
                if let Some(size) = SizeComparative::from_word(w) {
                    d.size_comparative.get_or_insert(size);
                } else if let Some(kind) = vocab.classify(w) {
                    d.attributes.assign(kind, &vocab.normalize(w));
                } else {
                    break;
                }
                j -= 1;
            }
            d.attributes.extra.reverse();
            if !out.contains(&d) {
                out.push(d);
            }
            i += n;
        }
        out
    }
}

fn split_words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// Target, anchors and view anchors of a program, without duplicates.
pub fn program_mentions(program: &RelationProgram) -> Vec<ObjectDescriptor> {
    let mut out: Vec<ObjectDescriptor> = Vec::new();
    for d in program.descriptors() {
        if !out.contains(d) {
            out.push(d.clone());
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub mentioned: Vec<ObjectDescriptor>,
    pub kept_ids: BTreeSet<ObjectId>,
    pub dropped_count: usize,
    /// Some mention matched nothing, so the whole scene was kept.
    pub soft_failed: bool,
}

/// Keeps every object whose label matches some mention exactly, by synonym
/// or by head noun, widening to substring matches for a mention that has
/// none. A mention that matches nothing at all, or an empty mention list,
/// keeps the whole scene.
pub fn filter_scene(scene: &Scene, mentions: &[ObjectDescriptor], synonyms: &SynonymTable) -> FilterReport {
    let all = scene.ids();
    let mut kept = BTreeSet::new();
    let mut soft_failed = mentions.is_empty();
    for m in mentions {
        let tiers: Vec<(ObjectId, Option<MatchTier>)> = scene
            .objects()
            .iter()
            .map(|o| (o.id(), synonyms.match_tier(&m.class_name, o.label())))
            .collect();
        let mut hits: Vec<ObjectId> = tiers
            .iter()
            .filter(|(_, t)| matches!(t, Some(MatchTier::Exact | MatchTier::HeadNoun)))
            .map(|(id, _)| *id)
            .collect();
        if hits.is_empty() {
            hits = tiers.iter().filter(|(_, t)| t.is_some()).map(|(id, _)| *id).collect();
        }
        if hits.is_empty() {
            soft_failed = true;
        }
        kept.extend(hits);
    }
    if soft_failed {
        kept = all.clone();
    }
    FilterReport {
        mentioned: mentions.to_vec(),
        dropped_count: all.len() - kept.len(),
        kept_ids: kept,
        soft_failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{FreeSpaceGrid, Vec2, Vec3};
    use crate::statement::parse;

    fn scene(labels: &[&str]) -> Scene {
        let objects = labels
            .iter()
            .enumerate()
            .map(|(i, l)| SceneObject::new(ObjectId(i as u32 + 1), l, Vec3::new(i as f64, 0.0, 0.5), Vec3::repeat(0.2)).unwrap())
            .collect();
        Scene::new("t", objects, FreeSpaceGrid::all_free(Vec2::zeros(), 1.0, 4, 4).unwrap()).unwrap()
    }

    #[test]
    fn mentions_from_programs() {
        let p = parse("the chair closest to the closet door").unwrap();
        assert_eq!(program_mentions(&p), vec![ObjectDescriptor::new("chair"), ObjectDescriptor::new("closet door")]);
        let t = SynonymTable::builtin();
        assert!(t.extract_mentions("", Vocabulary::builtin(), []).is_empty());
        let m = t.extract_mentions("the tall recycling bin to the left if you are facing the door", Vocabulary::builtin(), []);
        assert_eq!(m, vec![ObjectDescriptor::new("recycling bin").with_extra("tall"), ObjectDescriptor::new("door")]);
    }

    #[test]
    fn mentions_from_free_text() {
        let t = SynonymTable::builtin();
        let m = t.extract_mentions("Go grab the big red Sofas over by some potted plants!", Vocabulary::builtin(), ["armchair"]);
        assert_eq!(
            m,
            vec![ObjectDescriptor::new("sofa").with_color("red").with_extra("big"), ObjectDescriptor::new("potted plant")]
        );
        let m = t.extract_mentions("is the armchair by a plant?", Vocabulary::builtin(), ["armchair"]);
        assert_eq!(m, vec![ObjectDescriptor::new("armchair"), ObjectDescriptor::new("plant")]);
    }

    #[test]
    fn filter_counts() {
        let s = scene(&["chair", "chair", "chair", "table", "lamp"]);
        let t = SynonymTable::builtin();
        let r = filter_scene(&s, &[ObjectDescriptor::new("chair"), ObjectDescriptor::new("table")], t);
        assert_eq!(r.kept_ids.len(), 4);
        assert_eq!(r.dropped_count, 1);
        assert!(!r.soft_failed);
        let all = filter_scene(&s, &[], t);
        assert_eq!(all.kept_ids.len(), 5);
        assert!(all.soft_failed);
        let missing = filter_scene(&s, &[ObjectDescriptor::new("chair"), ObjectDescriptor::new("piano")], t);
        assert_eq!(missing.kept_ids.len(), 5);
    }

    #[test]
    fn synonyms_and_tiers() {
        let s = scene(&["couch", "door", "closet door", "trash can"]);
        let t = SynonymTable::builtin();
        let r = filter_scene(&s, &[ObjectDescriptor::new("sofa")], t);
        assert_eq!(r.kept_ids, BTreeSet::from([ObjectId(1)]));
        let doors = filter_scene(&s, &[ObjectDescriptor::new("door")], t);
        assert_eq!(doors.kept_ids, BTreeSet::from([ObjectId(2), ObjectId(3)]));
        let pool: Vec<&SceneObject> = s.objects().iter().collect();
        let ids = |v: Vec<&SceneObject>| v.iter().map(|o| o.id().0).collect::<Vec<_>>();
        assert_eq!(ids(t.select_class(&pool, "door")), vec![2]);
        assert_eq!(ids(t.select_class(&pool, "closet door")), vec![3]);
        assert_eq!(ids(t.select_class(&pool, "front door")), vec![2, 3]);
        assert_eq!(ids(t.select_class(&pool, "trash")), vec![4]);
        assert_eq!(ids(t.select_class(&pool, "garbage bin")), vec![4]);
    }
}

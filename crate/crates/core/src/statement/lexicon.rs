//! Word tables for the statement grammar: relation phrases, fillers, view
//! clauses, ordinals and plural handling.

use super::program::Relation;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhraseKind {
    Fixed(Relation),
    /// "<ordinal> closest to": ordinal value taken from the `#` slot.
    Ordinal,
    /// "from", only valid after an ordinal target ("the second chair from").
    OrdinalFrom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnchorUse {
    Required,
    /// Viewer-relative form, e.g. "to the left".
    Forbidden,
    Optional,
}

#[derive(Clone, Copy, Debug)]
pub struct RelationPhrase {
    /// `#` matches any ordinal word.
    pub words: &'static [&'static str],
    pub kind: PhraseKind,
    pub anchor: AnchorUse,
}

const fn req(words: &'static [&'static str], r: Relation) -> RelationPhrase {
    RelationPhrase {
        words,
        kind: PhraseKind::Fixed(r),
        anchor: AnchorUse::Required,
    }
}

const fn viewer(words: &'static [&'static str], r: Relation) -> RelationPhrase {
    RelationPhrase {
        words,
        kind: PhraseKind::Fixed(r),
        anchor: AnchorUse::Forbidden,
    }
}

const fn ordinal(words: &'static [&'static str]) -> RelationPhrase {
    RelationPhrase {
        words,
        kind: PhraseKind::Ordinal,
        anchor: AnchorUse::Required,
    }
}

/// Every relation phrase the grammar accepts. Anything else in relation
/// position is out of grammar.
pub const RELATION_PHRASES: &[RelationPhrase] = &[
    req(&["near"], Relation::Near),
    req(&["near", "to"], Relation::Near),
    req(&["next", "to"], Relation::Near),
    req(&["close", "to"], Relation::Near),
    req(&["beside"], Relation::Near),
    req(&["adjacent", "to"], Relation::Near),
    req(&["closest", "to"], Relation::Closest),
    req(&["nearest", "to"], Relation::Closest),
    req(&["closest"], Relation::Closest),
    req(&["nearest"], Relation::Closest),
    req(&["farthest", "from"], Relation::Farthest),
    req(&["furthest", "from"], Relation::Farthest),
    req(&["farthest", "away", "from"], Relation::Farthest),
    req(&["furthest", "away", "from"], Relation::Farthest),
    ordinal(&["#", "closest", "to"]),
    ordinal(&["#", "nearest", "to"]),
    ordinal(&["#", "closest"]),
    ordinal(&["#", "nearest"]),
    RelationPhrase {
        words: &["from"],
        kind: PhraseKind::OrdinalFrom,
        anchor: AnchorUse::Required,
    },
    req(&["between"], Relation::Between),
    req(&["in", "between"], Relation::Between),
    req(&["above"], Relation::Above),
    req(&["over"], Relation::Above),
    req(&["below"], Relation::Below),
    req(&["under"], Relation::Below),
    req(&["beneath"], Relation::Below),
    req(&["underneath"], Relation::Below),
    req(&["on", "top", "of"], Relation::OnTopOf),
    req(&["on"], Relation::OnTopOf),
    req(&["atop"], Relation::OnTopOf),
    req(&["upon"], Relation::OnTopOf),
    req(&["to", "the", "left", "of"], Relation::LeftOf),
    req(&["left", "of"], Relation::LeftOf),
    req(&["on", "the", "left", "of"], Relation::LeftOf),
    req(&["on", "the", "left", "side", "of"], Relation::LeftOf),
    req(&["to", "the", "left", "side", "of"], Relation::LeftOf),
    viewer(&["to", "the", "left"], Relation::LeftOf),
    viewer(&["on", "the", "left"], Relation::LeftOf),
    viewer(&["on", "the", "left", "side"], Relation::LeftOf),
    req(&["to", "the", "right", "of"], Relation::RightOf),
    req(&["right", "of"], Relation::RightOf),
    req(&["on", "the", "right", "of"], Relation::RightOf),
    req(&["on", "the", "right", "side", "of"], Relation::RightOf),
    req(&["to", "the", "right", "side", "of"], Relation::RightOf),
    viewer(&["to", "the", "right"], Relation::RightOf),
    viewer(&["on", "the", "right"], Relation::RightOf),
    viewer(&["on", "the", "right", "side"], Relation::RightOf),
    req(&["in", "front", "of"], Relation::InFrontOf),
    req(&["in", "the", "front", "of"], Relation::InFrontOf),
    viewer(&["in", "front"], Relation::InFrontOf),
    RelationPhrase {
        words: &["behind"],
        kind: PhraseKind::Fixed(Relation::Behind),
        anchor: AnchorUse::Optional,
    },
    req(&["in", "back", "of"], Relation::Behind),
    req(&["at", "the", "back", "of"], Relation::Behind),
];

/// Words allowed between a noun phrase and its relation ("that is near").
pub const FILLERS: &[&[&str]] = &[
    &["that", "is"],
    &["which", "is"],
    &["that's"],
    &["located"],
    &["placed"],
    &["positioned"],
    &["situated"],
    &["sitting"],
    &["standing"],
    &["resting"],
    &["lying"],
];

/// Openers of a "when facing the X" clause.
pub const VIEW_PHRASES: &[&[&str]] = &[
    &["when", "facing"],
    &["while", "facing"],
    &["if", "facing"],
    &["if", "you", "are", "facing"],
    &["when", "you", "are", "facing"],
    &["while", "you", "are", "facing"],
    &["if", "you", "face"],
    &["when", "you", "face"],
    &["as", "you", "face"],
    &["facing"],
    &["when", "looking", "at"],
    &["while", "looking", "at"],
];

pub const ARTICLES: &[&str] = &["the", "a", "an"];

pub fn ordinal_value(word: &str) -> Option<u32> {
    const WORDS: [&str; 10] = [
        "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
    ];
    if let Some(i) = WORDS.iter().position(|w| *w == word) {
        return Some(i as u32 + 1);
    }
    let digits = word.trim_end_matches(|c: char| c.is_ascii_alphabetic());
    let suffix = &word[digits.len()..];
    if digits.is_empty() || !matches!(suffix, "st" | "nd" | "rd" | "th") {
        return None;
    }
    digits.parse::<u32>().ok().filter(|k| (1..=1000).contains(k))
}

pub fn ordinal_word(k: u32) -> String {
    const WORDS: [&str; 10] = [
        "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
    ];
    match WORDS.get(k.wrapping_sub(1) as usize) {
        Some(w) => w.to_string(),
        None => {
            let suffix = match (k % 10, k % 100) {
                (_, 11..=13) => "th",
                (1, _) => "st",
                (2, _) => "nd",
                (3, _) => "rd",
                _ => "th",
            };
            format!("{k}{suffix}")
        }
    }
}

const IRREGULAR_PLURALS: &[(&str, &str)] = &[
    ("people", "person"),
    ("men", "man"),
    ("women", "woman"),
    ("children", "child"),
    ("feet", "foot"),
    ("mice", "mouse"),
    ("knives", "knife"),
    ("leaves", "leaf"),
    ("shelves", "shelf"),
    ("bookshelves", "bookshelf"),
    ("clothes", "clothes"),
    ("series", "series"),
    ("species", "species"),
    ("glasses", "glasses"),
    ("blinds", "blinds"),
    ("stairs", "stairs"),
];

/// Singular form of a noun and whether it was plural.
pub fn singularize(word: &str) -> (String, bool) {
    if let Some((_, s)) = IRREGULAR_PLURALS.iter().find(|(p, _)| *p == word) {
        return (s.to_string(), *s != word);
    }
    if word.len() <= 3 || !word.ends_with('s') {
        return (word.to_string(), false);
    }
    for keep in ["ss", "us", "is"] {
        if word.ends_with(keep) {
            return (word.to_string(), false);
        }
    }
    if let Some(stem) = word.strip_suffix("ies") {
        if stem.len() >= 2 {
            return (format!("{stem}y"), true);
        }
    }
    for suffix in ["sses", "ches", "shes", "xes", "zes"] {
        if word.ends_with(suffix) {
            return (word[..word.len() - 2].to_string(), true);
        }
    }
    (word[..word.len() - 1].to_string(), true)
}

/// Lowercased class name with whitespace collapsed and its last word
/// singularized.
pub fn normalize_class(name: &str) -> String {
    let mut words: Vec<String> = name.split_whitespace().map(|w| w.to_lowercase()).collect();
    if let Some(last) = words.last_mut() {
        *last = singularize(last).0;
    }
    words.join(" ")
}

pub fn pluralize(word: &str) -> String {
    if let Some((p, _)) = IRREGULAR_PLURALS.iter().find(|(p, s)| *s == word && p != s) {
        return p.to_string();
    }
    if word.ends_with('y') && !word.ends_with("ay") && !word.ends_with("ey") && !word.ends_with("oy") {
        return format!("{}ies", &word[..word.len() - 1]);
    }
    if ["s", "x", "z", "ch", "sh"].iter().any(|s| word.ends_with(s)) {
        return format!("{word}es");
    }
    format!("{word}s")
}

//! Attribute extraction from object captions of the form
//! "The <name> is <color>, <material>, <shape>".

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use super::SceneError;

const BUILTIN_VOCABULARY: &str = include_str!("../../data/vocabulary.json");

static BUILTIN: LazyLock<Vocabulary> = LazyLock::new(|| {
    Vocabulary::from_json(BUILTIN_VOCABULARY).expect("bundled vocabulary is valid")
});

/// Visual attributes of an object. Values are lowercase and never empty.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectAttributes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<String>,
}

impl ObjectAttributes {
    pub fn is_empty(&self) -> bool {
        self.color.is_none() && self.material.is_none() && self.shape.is_none() && self.extra.is_empty()
    }

    /// Fills the slot for `kind`, or appends to `extra` when the slot is taken
    /// or `kind` is a modifier.
    pub fn assign(&mut self, kind: AttributeKind, word: &str) {
        let slot = match kind {
            AttributeKind::Color => &mut self.color,
            AttributeKind::Material => &mut self.material,
            AttributeKind::Shape => &mut self.shape,
            AttributeKind::Modifier => {
                self.push_extra(word);
                return;
            }
        };
        if slot.is_none() {
            *slot = Some(word.to_string());
        } else {
            self.push_extra(word);
        }
    }

    pub fn push_extra(&mut self, word: &str) {
        if !word.is_empty() && !self.extra.iter().any(|e| e == word) {
            self.extra.push(word.to_string());
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AttributeKind {
    Color,
    Material,
    Shape,
    Modifier,
}

#[derive(Deserialize)]
struct VocabularyFile {
    colors: Vec<String>,
    materials: Vec<String>,
    shapes: Vec<String>,
    #[serde(default)]
    modifiers: Vec<String>,
    #[serde(default)]
    aliases: BTreeMap<String, String>,
}

/// Closed word lists for colors, materials, shapes and free modifiers, with
/// an alias map ("grey" → "gray").
#[derive(Clone, Debug)]
pub struct Vocabulary {
    colors: BTreeSet<String>,
    materials: BTreeSet<String>,
    shapes: BTreeSet<String>,
    modifiers: BTreeSet<String>,
    aliases: BTreeMap<String, String>,
}

impl Vocabulary {
    pub fn builtin() -> &'static Vocabulary {
        &BUILTIN
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let file: VocabularyFile = serde_json::from_str(text)?;
        let set = |v: Vec<String>| v.into_iter().map(|w| w.trim().to_lowercase()).filter(|w| !w.is_empty()).collect();
        Ok(Self {
            colors: set(file.colors),
            materials: set(file.materials),
            shapes: set(file.shapes),
            modifiers: set(file.modifiers),
            aliases: file
                .aliases
                .into_iter()
                .map(|(k, v)| (k.to_lowercase(), v.to_lowercase()))
                .collect(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SceneError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Lowercases and resolves aliases.
    pub fn normalize(&self, word: &str) -> String {
        let w = word.trim().to_lowercase();
        self.aliases.get(&w).cloned().unwrap_or(w)
    }

    pub fn classify(&self, word: &str) -> Option<AttributeKind> {
        let w = self.normalize(word);
        if self.colors.contains(&w) {
            Some(AttributeKind::Color)
        } else if self.materials.contains(&w) {
            Some(AttributeKind::Material)
        } else if self.shapes.contains(&w) {
            Some(AttributeKind::Shape)
        } else if self.modifiers.contains(&w) {
            Some(AttributeKind::Modifier)
        } else {
            None
        }
    }

    pub fn words(&self, kind: AttributeKind) -> impl Iterator<Item = &str> {
        match kind {
            AttributeKind::Color => &self.colors,
            AttributeKind::Material => &self.materials,
            AttributeKind::Shape => &self.shapes,
            AttributeKind::Modifier => &self.modifiers,
        }
        .iter()
        .map(String::as_str)
    }

    /// Extracts attributes from a templated caption. Never fails; text that
    /// does not follow "<name> is <descriptors>" yields no attributes.
    pub fn parse_caption(&self, caption: &str) -> ObjectAttributes {
        let mut attrs = ObjectAttributes::default();
        let text = caption.trim().to_lowercase();
        let Some(split) = text.find(" is ") else {
            return attrs;
        };
        let (name, descriptors) = (&text[..split], &text[split + 4..]);

        for word in words(name) {
            if let Some(kind) = self.classify(word) {
                attrs.assign(kind, &self.normalize(word));
            }
        }

        for descriptor in descriptors.split([',', ';', '.']).flat_map(|d| d.split(" and ")) {
            let tokens: Vec<&str> = words(descriptor).collect();
            if tokens.is_empty() {
                continue;
            }
            let mut hit = false;
            for word in &tokens {
                if let Some(kind) = self.classify(word) {
                    attrs.assign(kind, &self.normalize(word));
                    hit = true;
                }
            }
            if !hit {
                attrs.push_extra(&tokens.join(" "));
            }
        }
        attrs
    }
}

fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !(c.is_alphanumeric() || c == '-')))
        .filter(|w| !w.is_empty())
}

/// [`Vocabulary::parse_caption`] with the bundled vocabulary.
pub fn parse_caption_attributes(caption: &str) -> ObjectAttributes {
    Vocabulary::builtin().parse_caption(caption)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_caption() {
        let a = parse_caption_attributes("The chair is red, wooden, square");
        assert_eq!(a.color.as_deref(), Some("red"));
        assert_eq!(a.material.as_deref(), Some("wooden"));
        assert_eq!(a.shape.as_deref(), Some("square"));
        assert!(a.extra.is_empty());
    }

    #[test]
    fn empty_and_untemplated() {
        assert!(parse_caption_attributes("").is_empty());
        assert!(parse_caption_attributes("a photo of something").is_empty());
    }

    #[test]
    fn name_modifiers_go_to_extra() {
        let a = parse_caption_attributes("The tall recycling bin is blue, plastic, cylindrical");
        assert_eq!(a.color.as_deref(), Some("blue"));
        assert_eq!(a.material.as_deref(), Some("plastic"));
        assert_eq!(a.shape.as_deref(), Some("cylindrical"));
        assert_eq!(a.extra, vec!["tall".to_string()]);
    }

    #[test]
    fn aliases_and_free_descriptors() {
        let a = parse_caption_attributes("The sofa is dark grey, made of wood and used for sitting.");
        assert_eq!(a.color.as_deref(), Some("gray"));
        assert_eq!(a.material.as_deref(), Some("wooden"));
        assert_eq!(a.extra, vec!["dark".to_string(), "used for sitting".to_string()]);
    }
}

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scene::ObjectAttributes;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeComparative {
    Largest,
    Smallest,
    Larger,
    Smaller,
}

impl SizeComparative {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Largest => "largest",
            Self::Smallest => "smallest",
            Self::Larger => "larger",
            Self::Smaller => "smaller",
        }
    }

    pub fn from_word(word: &str) -> Option<Self> {
        Some(match word {
            "largest" | "biggest" => Self::Largest,
            "smallest" => Self::Smallest,
            "larger" | "bigger" => Self::Larger,
            "smaller" => Self::Smaller,
            _ => return None,
        })
    }
}

/// A noun phrase: class name plus the attributes stated for it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectDescriptor {
    pub class_name: String,
    #[serde(default, skip_serializing_if = "ObjectAttributes::is_empty")]
    pub attributes: ObjectAttributes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_comparative: Option<SizeComparative>,
}

impl ObjectDescriptor {
    pub fn new(class_name: impl Into<String>) -> Self {
        Self {
            class_name: class_name.into(),
            attributes: ObjectAttributes::default(),
            size_comparative: None,
        }
    }

    pub fn with_color(mut self, color: &str) -> Self {
        self.attributes.color = Some(color.to_string());
        self
    }

    pub fn with_material(mut self, material: &str) -> Self {
        self.attributes.material = Some(material.to_string());
        self
    }

    pub fn with_shape(mut self, shape: &str) -> Self {
        self.attributes.shape = Some(shape.to_string());
        self
    }

    pub fn with_extra(mut self, word: &str) -> Self {
        self.attributes.push_extra(word);
        self
    }

    pub fn with_size(mut self, size: SizeComparative) -> Self {
        self.size_comparative = Some(size);
        self
    }

    pub fn bare(&self) -> Self {
        Self::new(self.class_name.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Near,
    Closest,
    Farthest,
    /// k-th closest, `k >= 2`.
    OrdinalClosest(u32),
    Between,
    Above,
    Below,
    OnTopOf,
    LeftOf,
    RightOf,
    InFrontOf,
    Behind,
}

/// Relation kinds without the ordinal parameter, for enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Near,
    Closest,
    Farthest,
    OrdinalClosest,
    Between,
    Above,
    Below,
    OnTopOf,
    LeftOf,
    RightOf,
    InFrontOf,
    Behind,
}

impl RelationKind {
    pub const ALL: [RelationKind; 12] = [
        Self::Near,
        Self::Closest,
        Self::Farthest,
        Self::OrdinalClosest,
        Self::Between,
        Self::Above,
        Self::Below,
        Self::OnTopOf,
        Self::LeftOf,
        Self::RightOf,
        Self::InFrontOf,
        Self::Behind,
    ];

    pub fn is_view_dependent(self) -> bool {
        matches!(self, Self::LeftOf | Self::RightOf | Self::InFrontOf | Self::Behind)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Near => "near",
            Self::Closest => "closest",
            Self::Farthest => "farthest",
            Self::OrdinalClosest => "ordinal_closest",
            Self::Between => "between",
            Self::Above => "above",
            Self::Below => "below",
            Self::OnTopOf => "on_top_of",
            Self::LeftOf => "left_of",
            Self::RightOf => "right_of",
            Self::InFrontOf => "in_front_of",
            Self::Behind => "behind",
        }
    }
}

impl Relation {
    pub fn kind(self) -> RelationKind {
        match self {
            Self::Near => RelationKind::Near,
            Self::Closest => RelationKind::Closest,
            Self::Farthest => RelationKind::Farthest,
            Self::OrdinalClosest(_) => RelationKind::OrdinalClosest,
            Self::Between => RelationKind::Between,
            Self::Above => RelationKind::Above,
            Self::Below => RelationKind::Below,
            Self::OnTopOf => RelationKind::OnTopOf,
            Self::LeftOf => RelationKind::LeftOf,
            Self::RightOf => RelationKind::RightOf,
            Self::InFrontOf => RelationKind::InFrontOf,
            Self::Behind => RelationKind::Behind,
        }
    }

    pub fn is_view_dependent(self) -> bool {
        self.kind().is_view_dependent()
    }

    /// Canonical name used in rendered programs; ordinals render as
    /// `closest#k`.
    pub fn name(self) -> String {
        match self {
            Self::OrdinalClosest(k) => format!("closest#{k}"),
            other => other.kind().as_str().to_string(),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        if let Some(k) = name.strip_prefix("closest#") {
            let k: u32 = k.parse().ok()?;
            return (k >= 2).then_some(Self::OrdinalClosest(k));
        }
        Some(match name {
            "near" => Self::Near,
            "closest" => Self::Closest,
            "farthest" => Self::Farthest,
            "between" => Self::Between,
            "above" => Self::Above,
            "below" => Self::Below,
            "on_top_of" => Self::OnTopOf,
            "left_of" => Self::LeftOf,
            "right_of" => Self::RightOf,
            "in_front_of" => Self::InFrontOf,
            "behind" => Self::Behind,
            _ => return None,
        })
    }

    /// Allowed anchor counts. Directional relations may take no anchor, in
    /// which case the observer's viewpoint is the reference.
    pub fn accepts_anchor_count(self, n: usize) -> bool {
        match self {
            Self::Between => n == 2,
            r if r.is_view_dependent() => n <= 1,
            _ => n == 1,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationTerm {
    pub relation: Relation,
    pub anchors: Vec<ObjectDescriptor>,
    /// Referent of "when facing the X".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view_anchor: Option<ObjectDescriptor>,
}

impl RelationTerm {
    pub fn new(relation: Relation, anchors: Vec<ObjectDescriptor>) -> Self {
        Self {
            relation,
            anchors,
            view_anchor: None,
        }
    }

    pub fn facing(mut self, view_anchor: ObjectDescriptor) -> Self {
        self.view_anchor = Some(view_anchor);
        self
    }

    pub fn is_well_formed(&self) -> bool {
        let ordinal_ok = !matches!(self.relation, Relation::OrdinalClosest(k) if k < 2);
        let view_ok = self.view_anchor.is_none() || self.relation.is_view_dependent();
        ordinal_ok && view_ok && self.relation.accepts_anchor_count(self.anchors.len())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combinator {
    #[default]
    Intersect,
    Union,
}

/// Parsed referring expression.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationProgram {
    pub target: ObjectDescriptor,
    pub terms: Vec<RelationTerm>,
    #[serde(default)]
    pub combinator: Combinator,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub negated_terms: Vec<RelationTerm>,
}

impl RelationProgram {
    pub fn new(target: ObjectDescriptor, terms: Vec<RelationTerm>) -> Self {
        Self {
            target,
            terms,
            combinator: Combinator::Intersect,
            negated_terms: Vec::new(),
        }
    }

    pub fn with_negated(mut self, term: RelationTerm) -> Self {
        self.negated_terms.push(term);
        self
    }

    /// Union with fewer than two terms is meaningless; such programs are
    /// stored with the default combinator.
    pub fn with_combinator(mut self, combinator: Combinator) -> Self {
        self.combinator = if self.terms.len() < 2 { Combinator::Intersect } else { combinator };
        self
    }

    pub fn is_view_dependent(&self) -> bool {
        self.terms.iter().chain(&self.negated_terms).any(|t| t.relation.is_view_dependent())
    }

    /// Every descriptor in the program: target first, then anchors and view
    /// anchors in order of appearance.
    pub fn descriptors(&self) -> Vec<&ObjectDescriptor> {
        let mut out = vec![&self.target];
        for term in self.terms.iter().chain(&self.negated_terms) {
            out.extend(term.anchors.iter());
            out.extend(term.view_anchor.iter());
        }
        out
    }
}

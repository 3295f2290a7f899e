use serde::{Deserialize, Serialize};

use crate::scene::{AttributeKind, ObjectAttributes, ObjectId, SceneObject, Vocabulary};
use crate::statement::{ObjectDescriptor, SizeComparative};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeFilter {
    /// Surviving candidate ids in input order.
    pub kept: Vec<ObjectId>,
    /// A stated attribute matched nothing, so that step kept its input.
    pub soft_failed: bool,
}

/// Keeps candidates whose caption attributes match the descriptor's color,
/// material and shape, then applies its size comparative. `larger` and
/// `smaller` keep sizes strictly above or below the candidate mean. Free
/// modifiers ("tall") are not matched.
pub fn filter_by_attributes(
    candidates: &[&SceneObject],
    descriptor: &ObjectDescriptor,
    vocab: &Vocabulary,
) -> AttributeFilter {
    let wanted = &descriptor.attributes;
    let stated: Vec<(AttributeKind, String)> = [
        (AttributeKind::Color, &wanted.color),
        (AttributeKind::Material, &wanted.material),
        (AttributeKind::Shape, &wanted.shape),
    ]
    .into_iter()
    .filter_map(|(kind, v)| v.as_ref().map(|v| (kind, vocab.normalize(v))))
    .collect();

    let mut soft_failed = false;
    let mut kept: Vec<&SceneObject> = candidates.to_vec();
    if !stated.is_empty() {
        let matching: Vec<&SceneObject> = candidates
            .iter()
            .copied()
            .filter(|o| {
                let attrs = vocab.parse_caption(o.caption().unwrap_or(""));
                stated.iter().all(|(kind, v)| slot(&attrs, *kind) == Some(v.as_str()))
            })
            .collect();
        if matching.is_empty() {
            soft_failed = true;
        } else {
            kept = matching;
        }
    }

    if let Some(size) = descriptor.size_comparative {
        if !kept.is_empty() {
            let by_size = |a: &&SceneObject, b: &&SceneObject| a.size().total_cmp(&b.size()).then(b.id().cmp(&a.id()));
            let selected: Vec<&SceneObject> = match size {
                SizeComparative::Largest => kept.iter().copied().max_by(by_size).into_iter().collect(),
                SizeComparative::Smallest => kept
                    .iter()
                    .copied()
                    .min_by(|a, b| a.size().total_cmp(&b.size()).then(a.id().cmp(&b.id())))
                    .into_iter()
                    .collect(),
                SizeComparative::Larger | SizeComparative::Smaller => {
                    let mean = kept.iter().map(|o| o.size()).sum::<f64>() / kept.len() as f64;
                    kept.iter()
                        .copied()
                        .filter(|o| if size == SizeComparative::Larger { o.size() > mean } else { o.size() < mean })
                        .collect()
                }
            };
            if selected.is_empty() {
                soft_failed = true;
            } else {
                kept = selected;
            }
        }
    }

    AttributeFilter {
        kept: kept.iter().map(|o| o.id()).collect(),
        soft_failed,
    }
}

fn slot(a: &ObjectAttributes, kind: AttributeKind) -> Option<&str> {
    match kind {
        AttributeKind::Color => a.color.as_deref(),
        AttributeKind::Material => a.material.as_deref(),
        AttributeKind::Shape => a.shape.as_deref(),
        AttributeKind::Modifier => None,
    }
}

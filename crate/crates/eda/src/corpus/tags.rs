//! Dialogue act tag inventory.
//!
//! The inventory is data, not code: the shipped default covers the 24 tags
//! observed in the annotated emotion corpora plus the reserved `xx` tag, and
//! alternative inventories (e.g. the full 42-class Switchboard set) load from
//! a JSON file of `{code, name}` pairs.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EdaError, Result};
use crate::rng::fnv1a;

/// Reserved code for utterances the ensemble could not determine.
/// Present in every inventory and never a training target.
pub const XX: &str = "xx";

/// One dialogue act tag: a short code and a human-readable name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueActTag {
    pub code: String,
    pub name: String,
}

/// Ordered dialogue act tag set with dense index lookup.
///
/// Indices run `0..len()`. The reserved [`XX`] tag is always present; the
/// remaining tags form the *class* space of the annotators, in inventory
/// order (see [`TagInventory::class_codes`]).
#[derive(Debug, Clone)]
pub struct TagInventory {
    tags: Vec<DialogueActTag>,
    by_code: HashMap<String, usize>,
    classes: Vec<String>,
    class_by_code: HashMap<String, usize>,
}

impl TagInventory {
    /// Build an inventory, validating uniqueness and the presence of `xx`.
    pub fn new(tags: Vec<DialogueActTag>) -> Result<Self> {
        if tags.is_empty() {
            return Err(EdaError::EmptyInput("tag inventory"));
        }
        let mut by_code = HashMap::new();
        for (i, tag) in tags.iter().enumerate() {
            if tag.code.is_empty() {
                return Err(EdaError::InvalidConfig("empty tag code".into()));
            }
            if by_code.insert(tag.code.clone(), i).is_some() {
                return Err(EdaError::InvalidConfig(format!(
                    "duplicate tag code \"{}\"",
                    tag.code
                )));
            }
        }
        if !by_code.contains_key(XX) {
            return Err(EdaError::InvalidConfig(format!(
                "tag inventory must contain the reserved \"{XX}\" tag"
            )));
        }
        let classes: Vec<String> = tags
            .iter()
            .filter(|t| t.code != XX)
            .map(|t| t.code.clone())
            .collect();
        if classes.is_empty() {
            return Err(EdaError::InvalidConfig(
                "tag inventory needs at least one non-xx tag".into(),
            ));
        }
        let class_by_code = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        Ok(Self {
            tags,
            by_code,
            classes,
            class_by_code,
        })
    }

    /// Total number of tags, `xx` included.
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Number of trainable classes (`xx` excluded).
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn tags(&self) -> &[DialogueActTag] {
        &self.tags
    }

    /// Canonical index of a code, `xx` included.
    pub fn index(&self, code: &str) -> Option<usize> {
        self.by_code.get(code).copied()
    }

    pub fn code(&self, index: usize) -> &str {
        &self.tags[index].code
    }

    pub fn contains(&self, code: &str) -> bool {
        self.by_code.contains_key(code)
    }

    /// Class codes in inventory order, `xx` excluded.
    pub fn class_codes(&self) -> &[String] {
        &self.classes
    }

    /// Class index of a code (`None` for `xx` and unknown codes).
    pub fn class_index(&self, code: &str) -> Option<usize> {
        self.class_by_code.get(code).copied()
    }

    pub fn class_code(&self, class: usize) -> &str {
        &self.classes[class]
    }

    /// Stable content hash, used to pair checkpoints with their inventory.
    pub fn content_hash(&self) -> u64 {
        let mut buf = Vec::new();
        for tag in &self.tags {
            buf.extend_from_slice(tag.code.as_bytes());
            buf.push(0x1f);
            buf.extend_from_slice(tag.name.as_bytes());
            buf.push(0x1e);
        }
        fnv1a(&buf)
    }

    /// Parse an inventory from a JSON array of `{code, name}` objects.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let tags: Vec<DialogueActTag> = serde_json::from_slice(bytes)
            .map_err(|e| EdaError::InvalidConfig(format!("inventory json: {e}")))?;
        Self::new(tags)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.tags).expect("inventory serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| EdaError::io(path.display().to_string(), e))?;
        Self::from_json(&bytes)
    }
}

/// The default 25-tag inventory (24 annotation targets plus `xx`).
pub fn default_inventory() -> TagInventory {
    let tags = [
        ("sd", "Statement-non-opinion"),
        ("sv", "Statement-opinion"),
        ("qy", "Yes-No-Question"),
        ("qw", "Wh-Question"),
        ("b", "Acknowledge (Backchannel)"),
        ("ad", "Action-directive"),
        ("fc", "Conventional-closing"),
        ("ba", "Appreciation or Assessment"),
        ("aa", "Agree or Accept"),
        ("nn", "No-Answer"),
        ("ny", "Yes-Answer"),
        ("br", "Signal-non-understanding"),
        ("^q", "Quotation"),
        ("na", "Affirmative non-yes answers"),
        ("qh", "Rhetorical-Question"),
        ("bh", "Rhetorical Backchannel"),
        ("h", "Hedge"),
        ("qo", "Open-question"),
        ("ft", "Thanking"),
        ("qy^d", "Declarative Yes-No-Question"),
        ("bf", "Reformulate"),
        ("fp", "Conventional-opening"),
        ("fa", "Apology"),
        ("fo", "Other Forward Function"),
        (XX, "Non-determinable"),
    ];
    TagInventory::new(
        tags.iter()
            .map(|(code, name)| DialogueActTag {
                code: (*code).into(),
                name: (*name).into(),
            })
            .collect(),
    )
    .expect("default inventory is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_has_25_tags_and_24_classes() {
        let inv = default_inventory();
        assert_eq!(inv.len(), 25);
        assert_eq!(inv.num_classes(), 24);
        assert!(inv.contains(XX));
        assert!(inv.class_index(XX).is_none());
    }

    #[test]
    fn index_is_dense_bijection() {
        let inv = default_inventory();
        for i in 0..inv.len() {
            assert_eq!(inv.index(inv.code(i)), Some(i));
        }
    }

    #[test]
    fn missing_xx_rejected() {
        let tags = vec![DialogueActTag {
            code: "sd".into(),
            name: "Statement".into(),
        }];
        assert!(TagInventory::new(tags).is_err());
    }

    #[test]
    fn duplicate_code_rejected() {
        let tags = vec![
            DialogueActTag {
                code: "sd".into(),
                name: "a".into(),
            },
            DialogueActTag {
                code: "sd".into(),
                name: "b".into(),
            },
            DialogueActTag {
                code: XX.into(),
                name: "x".into(),
            },
        ];
        assert!(TagInventory::new(tags).is_err());
    }

    #[test]
    fn json_round_trip() {
        let inv = default_inventory();
        let json = inv.to_json();
        let back = TagInventory::from_json(json.as_bytes()).unwrap();
        assert_eq!(back.tags(), inv.tags());
        assert_eq!(back.content_hash(), inv.content_hash());
    }

    #[test]
    fn content_hash_sensitive_to_names() {
        let mut tags: Vec<DialogueActTag> = default_inventory().tags().to_vec();
        tags[0].name = "Changed".into();
        let other = TagInventory::new(tags).unwrap();
        assert_ne!(other.content_hash(), default_inventory().content_hash());
    }
}

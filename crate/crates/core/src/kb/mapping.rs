use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::builtin::BUILTIN_ENTITIES;
use super::identifier::Identifier;
use super::{KbError, KnowledgeBase, FEEDBACK};

pub const DEFAULT_VICINITY: usize = 100;

fn default_vicinity() -> usize {
    DEFAULT_VICINITY
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuasiGroup {
    pub entities: Vec<String>,
    #[serde(default = "default_vicinity")]
    pub vicinity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CustomIdentifierRef {
    pub entity_type: String,
    pub path: PathBuf,
}

/// Which entity types are sensitive, directly or in combination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SensitivityMapping {
    #[serde(default)]
    pub direct: Vec<String>,
    #[serde(default)]
    pub quasi: Vec<QuasiGroup>,
    #[serde(default)]
    pub custom_identifiers: Vec<CustomIdentifierRef>,
}

impl SensitivityMapping {
    /// Every built-in entity type mapped as directly sensitive.
    pub fn all_builtins_direct() -> Self {
        SensitivityMapping {
            direct: BUILTIN_ENTITIES.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, KbError> {
        let m: SensitivityMapping = serde_json::from_slice(bytes).map_err(KbError::MappingJson)?;
        m.validate_shape()?;
        Ok(m)
    }

    pub fn validate_shape(&self) -> Result<(), KbError> {
        for q in &self.quasi {
            let distinct: BTreeSet<_> = q.entities.iter().collect();
            if distinct.len() < 2 {
                return Err(KbError::QuasiTooSmall(q.entities.clone()));
            }
            if q.vicinity == 0 {
                return Err(KbError::ZeroVicinity(q.entities.clone()));
            }
        }
        Ok(())
    }

    /// Custom identifiers are directly sensitive unless they only appear in
    /// quasi groups.
    pub fn is_direct(&self, entity: &str) -> bool {
        self.direct.iter().any(|d| d == entity)
            || (self.custom_identifiers.iter().any(|c| c.entity_type == entity)
                && !self.quasi.iter().any(|q| q.entities.iter().any(|e| e == entity)))
    }

    /// All entity names the mapping refers to.
    pub fn referenced_entities(&self) -> BTreeSet<&str> {
        self.direct
            .iter()
            .map(String::as_str)
            .chain(self.quasi.iter().flat_map(|q| q.entities.iter().map(String::as_str)))
            .chain(self.custom_identifiers.iter().map(|c| c.entity_type.as_str()))
            .collect()
    }
}

/// The identifiers a run needs: everything the mapping names, their
/// dependencies, and the feedback pseudo-identifier when feedback forces
/// any token sensitive. Alphabetical by name.
pub fn minimal_identifier_set(
    mapping: &SensitivityMapping,
    kb: &KnowledgeBase,
) -> Result<Vec<Arc<Identifier>>, KbError> {
    let mut names: BTreeSet<String> = BTreeSet::new();
    let mut pending: Vec<String> = mapping
        .referenced_entities()
        .into_iter()
        .map(str::to_string)
        .collect();
    while let Some(name) = pending.pop() {
        if names.contains(&name) {
            continue;
        }
        let id = kb
            .get(&name)
            .ok_or_else(|| KbError::UnresolvedEntity(name.clone()))?;
        pending.extend(id.dependencies().iter().map(|d| d.to_string()));
        names.insert(name);
    }
    let mut out: Vec<Arc<Identifier>> = names
        .iter()
        .map(|n| kb.get(n).expect("resolved above").clone())
        .collect();
    if let Some(fb) = kb.feedback_identifier() {
        out.push(fb);
    }
    out.sort_by(|a, b| a.name().cmp(b.name()));
    debug_assert!(out.iter().filter(|i| i.name() == FEEDBACK).count() <= 1);
    Ok(out)
}

use std::collections::BTreeSet;
use std::path::Path;

use super::builtin::BUILTIN_ENTITIES;
use super::identifier::{normalize_term, Identifier};
use super::{KbError, FEEDBACK};

fn read(path: &Path) -> Result<String, KbError> {
    std::fs::read_to_string(path).map_err(|source| KbError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Normalizes, deduplicates and sorts newline-separated terms.
pub fn normalize_terms(source: &str) -> BTreeSet<String> {
    source
        .lines()
        .map(normalize_term)
        .filter(|t| !t.is_empty())
        .collect()
}

/// Ingests an external term list as a dictionary artifact for `entity_type`.
/// Returns the number of stored terms.
pub fn ingest_augment(source: &Path, entity_type: &str, output: &Path) -> Result<usize, KbError> {
    if BUILTIN_ENTITIES.contains(&entity_type) || entity_type == FEEDBACK {
        return Err(KbError::DuplicateEntity(entity_type.to_string()));
    }
    let terms = normalize_terms(&read(source)?);
    if terms.is_empty() {
        return Err(KbError::EmptySource(source.display().to_string()));
    }
    let mut body = String::new();
    for t in &terms {
        body.push_str(t);
        body.push('\n');
    }
    std::fs::write(output, body).map_err(|source| KbError::Io {
        path: output.display().to_string(),
        source,
    })?;
    Ok(terms.len())
}

/// Loads a stored artifact as a dictionary identifier.
pub fn load_dictionary_artifact(path: &Path, entity_type: &str) -> Result<Identifier, KbError> {
    let terms = normalize_terms(&read(path)?);
    Identifier::dictionary(entity_type, terms)
}

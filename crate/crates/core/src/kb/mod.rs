//! Knowledge base: identifiers, sensitivity mappings, feedback and augment
//! artifacts.
//!
//! The knowledge base is immutable during an analyze run. Feedback and
//! augment runs change it only through files read at the start of the next
//! run.

mod augment;
pub mod builtin;
mod feedback;
mod identifier;
mod luhn;
mod mapping;

use std::path::Path;
use std::sync::Arc;

pub use augment::{ingest_augment, load_dictionary_artifact, normalize_terms};
pub use builtin::{load_builtin_identifiers, BUILTIN_ENTITIES};
pub use feedback::FeedbackStore;
pub use identifier::{normalize_term, Identifier, IdentifierKind, RegexMatcher, Validator};
pub use luhn::{luhn_check, luhn_check_digit, LuhnError};
pub use mapping::{
    minimal_identifier_set, CustomIdentifierRef, QuasiGroup, SensitivityMapping, DEFAULT_VICINITY,
};

/// Entity type of tokens forced sensitive by feedback.
pub const FEEDBACK: &str = "FEEDBACK";

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("identifier `{0}` is already defined")]
    DuplicateEntity(String),
    #[error("entity `{0}` does not resolve to a loaded identifier")]
    UnresolvedEntity(String),
    #[error("identifier `{name}`: min_len {min_len} / max_len {max_len} unsatisfiable")]
    BadLengthBounds {
        name: String,
        min_len: usize,
        max_len: usize,
    },
    #[error("identifier `{name}`: {source}")]
    BadPattern {
        name: String,
        source: Box<regex::Error>,
    },
    #[error("dictionary `{0}` has no terms")]
    EmptyDictionary(String),
    #[error("augment source {0} contains no terms")]
    EmptySource(String),
    #[error("quasi group {0:?} needs at least two distinct entities")]
    QuasiTooSmall(Vec<String>),
    #[error("quasi group {0:?} has vicinity 0")]
    ZeroVicinity(Vec<String>),
    #[error("token `{0}` is marked both sensitive and non-sensitive")]
    ConflictingFeedback(String),
    #[error("sensitivity mapping: {0}")]
    MappingJson(serde_json::Error),
    #[error("feedback store: {0}")]
    FeedbackJson(serde_json::Error),
    #[error("report: {0}")]
    Report(#[from] crate::report::ReportError),
    #[error("io on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Built-in and custom identifiers plus feedback state.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    identifiers: Vec<Arc<Identifier>>,
    feedback: FeedbackStore,
}

impl Default for KnowledgeBase {
    fn default() -> Self {
        Self::builtin()
    }
}

impl KnowledgeBase {
    pub fn builtin() -> Self {
        KnowledgeBase {
            identifiers: load_builtin_identifiers().into_iter().map(Arc::new).collect(),
            feedback: FeedbackStore::default(),
        }
    }

    pub fn add_identifier(&mut self, id: Identifier) -> Result<(), KbError> {
        if id.name() == FEEDBACK || self.get(id.name()).is_some() {
            return Err(KbError::DuplicateEntity(id.name().to_string()));
        }
        self.identifiers.push(Arc::new(id));
        Ok(())
    }

    /// Loads the custom dictionaries a mapping lists. Relative artifact paths
    /// resolve against `base_dir`.
    pub fn load_custom(&mut self, mapping: &SensitivityMapping, base_dir: &Path) -> Result<(), KbError> {
        for c in &mapping.custom_identifiers {
            let path = if c.path.is_absolute() {
                c.path.clone()
            } else {
                base_dir.join(&c.path)
            };
            self.add_identifier(load_dictionary_artifact(&path, &c.entity_type)?)?;
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Arc<Identifier>> {
        self.identifiers.iter().find(|i| i.name() == name)
    }

    /// All loaded identifiers (built-in and custom), alphabetical, plus the
    /// feedback pseudo-identifier when it is active.
    pub fn all_identifiers(&self) -> Vec<Arc<Identifier>> {
        let mut out = self.identifiers.clone();
        out.extend(self.feedback_identifier());
        out.sort_by(|a, b| a.name().cmp(b.name()));
        out
    }

    pub fn feedback(&self) -> &FeedbackStore {
        &self.feedback
    }

    pub fn feedback_mut(&mut self) -> &mut FeedbackStore {
        &mut self.feedback
    }

    pub fn set_feedback(&mut self, fb: FeedbackStore) {
        self.feedback = fb;
    }

    pub(crate) fn feedback_identifier(&self) -> Option<Arc<Identifier>> {
        if self.feedback.force_sensitive.is_empty() {
            return None;
        }
        Some(Arc::new(
            Identifier::exact(FEEDBACK, &self.feedback.force_sensitive)
                .expect("non-empty force set"),
        ))
    }
}

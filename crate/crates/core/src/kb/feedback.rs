use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::KbError;
use crate::keys::RunKey;
use crate::report::parse_marked_report;

/// Page-level report rows (`PAGE:<index>`) describe early-exit regions, not
/// tokens, and never take part in feedback.
const PAGE_ROW_PREFIX: &str = "PAGE:";

/// Reviewer corrections carried between runs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackStore {
    /// (token text, entity type) pairs treated as non-sensitive.
    #[serde(default)]
    pub suppress: BTreeSet<(String, String)>,
    /// Token texts always treated as sensitive.
    #[serde(default)]
    pub force_sensitive: BTreeSet<String>,
}

impl FeedbackStore {
    pub fn is_empty(&self) -> bool {
        self.suppress.is_empty() && self.force_sensitive.is_empty()
    }

    pub fn is_suppressed(&self, token: &str, entity: &str) -> bool {
        // Avoid allocating a tuple for the common empty case.
        !self.suppress.is_empty() && self.suppress.contains(&(token.to_string(), entity.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, KbError> {
        match std::fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(KbError::FeedbackJson),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(source) => Err(KbError::Io {
                path: path.display().to_string(),
                source,
            }),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), KbError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|source| KbError::Io {
                path: dir.display().to_string(),
                source,
            })?;
        }
        let json = serde_json::to_vec_pretty(self).expect("feedback store serializes");
        std::fs::write(path, json).map_err(|source| KbError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Folds reviewer-marked reports into the store. Rows marked `N` in the
    /// sensitive report become suppressions; rows marked `N` in the
    /// non-sensitive report become forced-sensitive tokens. A token marked
    /// both ways in one ingest is rejected; across ingests the newer mark
    /// replaces the older one.
    pub fn apply_feedback(
        &mut self,
        sensitive_report: &[u8],
        non_sensitive_report: &[u8],
        key: Option<&RunKey>,
    ) -> Result<(), KbError> {
        let suppress: BTreeSet<(String, String)> = parse_marked_report(sensitive_report, key)?
            .into_iter()
            .filter(|r| !r.token.starts_with(PAGE_ROW_PREFIX))
            .map(|r| (r.token, r.entity_type))
            .collect();
        let force: BTreeSet<String> = parse_marked_report(non_sensitive_report, key)?
            .into_iter()
            .filter(|r| !r.token.starts_with(PAGE_ROW_PREFIX))
            .map(|r| r.token)
            .collect();
        if let Some((t, _)) = suppress.iter().find(|(t, _)| force.contains(t)) {
            return Err(KbError::ConflictingFeedback(t.clone()));
        }
        self.suppress.retain(|(t, _)| !force.contains(t));
        self.force_sensitive
            .retain(|t| !suppress.iter().any(|(s, _)| s == t));
        self.suppress.extend(suppress);
        self.force_sensitive.extend(force);
        Ok(())
    }
}

#![allow(dead_code)]

use dumpscrub::dumpgen::{generate_dump, DumpGenConfig, GroundTruthEntry};
use dumpscrub::engine::{analyze_bytes, Analysis, AnalyzeSettings};
use dumpscrub::kb::{KnowledgeBase, SensitivityMapping};
use dumpscrub::keys::RunKey;
use dumpscrub::parser::{HEADER_SIZE, PAGE_SIZE};
use dumpscrub::redactor::ExtentKind;

pub fn dump_config(total_size: u64, pct_sensitive_pages: f64, seed: u64) -> DumpGenConfig {
    DumpGenConfig {
        total_size,
        pct_sensitive_pages,
        seed,
        ..Default::default()
    }
}

pub fn generate(cfg: &DumpGenConfig) -> (Vec<u8>, Vec<GroundTruthEntry>) {
    generate_dump(cfg).expect("valid generator config")
}

pub fn test_key() -> RunKey {
    RunKey::derive(b"integration", None)
}

pub fn analyze(dump: &[u8], mapping: &SensitivityMapping, settings: &AnalyzeSettings) -> Analysis {
    analyze_bytes(dump, &KnowledgeBase::builtin(), mapping, settings, Some(&test_key())).expect("analyze")
}

/// Absolute file offset of a planted entity.
pub fn planted_offset(e: &GroundTruthEntry) -> usize {
    e.page_index * PAGE_SIZE + HEADER_SIZE + e.byte_offset
}

/// (start, len) of every token-level redaction.
pub fn token_extents(a: &Analysis) -> Vec<(usize, usize)> {
    a.extents
        .iter()
        .filter(|e| matches!(e.kind, ExtentKind::Token { .. }))
        .map(|e| (e.start, e.len))
        .collect()
}

/// Recall and precision of token redactions against the manifest.
pub fn score(a: &Analysis, manifest: &[GroundTruthEntry]) -> (f64, f64) {
    let truth: std::collections::BTreeSet<(usize, usize)> =
        manifest.iter().map(|e| (planted_offset(e), e.byte_len)).collect();
    let found = token_extents(a);
    let found_set: std::collections::BTreeSet<_> = found.iter().copied().collect();
    let hits = found.iter().filter(|x| truth.contains(x)).count();
    let recall = if truth.is_empty() {
        1.0
    } else {
        truth.intersection(&found_set).count() as f64 / truth.len() as f64
    };
    let precision = if found.is_empty() { 1.0 } else { hits as f64 / found.len() as f64 };
    (recall, precision)
}

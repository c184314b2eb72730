//! Token classification. Identifiers are tried in most-recently-used order
//! and the first match wins. Quasi-sensitive findings are settled per group
//! by [`resolve_vicinity`] once every unit of the group is classified.

mod vicinity;

use std::sync::Arc;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::encoding::Encoding;
use crate::kb::{minimal_identifier_set, Identifier, KbError, KnowledgeBase, SensitivityMapping, FEEDBACK};
use crate::parser::{decode_classes, tokenize_decoded, ParsedToken, Segment, TokenSpan};
pub use vicinity::{resolve_vicinity, QuasiSet, VicinityUnit};
use vicinity::{OnlineQuasi, SkipOracle};

/// How much of a unit is classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessingMode {
    /// Every token; only sensitive tokens are redacted.
    Concise,
    /// Stop at the first sensitive token; the whole unit is redacted.
    Boolean,
    /// No classification; the whole unit is redacted.
    Skip,
}

impl ProcessingMode {
    pub fn name(self) -> &'static str {
        match self {
            ProcessingMode::Concise => "concise",
            ProcessingMode::Boolean => "boolean",
            ProcessingMode::Skip => "skip",
        }
    }
}

/// Optimization switches. Each defaults to on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Options {
    pub min_identifiers: bool,
    pub quasi_skip: bool,
    pub mru: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            min_identifiers: true,
            quasi_skip: true,
            mru: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Direct,
    Quasi,
    Feedback,
    /// Loaded but not named by the mapping.
    Unmapped,
}

/// A token matched by an identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub token: ParsedToken,
    /// Token ordinal within its group.
    pub position: usize,
    /// Segment (page or line) ordinal within its group.
    pub segment: usize,
    pub file_offset: usize,
    /// Index into [`Plan::identifiers`].
    pub identifier: usize,
    /// Feedback marked this (token, entity) pair non-sensitive.
    pub suppressed: bool,
}

/// Immutable per-run classification state shared by all workers.
#[derive(Debug)]
pub struct Plan {
    identifiers: Vec<Arc<Identifier>>,
    feedback: Option<usize>,
    classes: Vec<Class>,
    quasi: Vec<QuasiSet>,
    groups_of: Vec<Vec<usize>>,
    deferred: Vec<bool>,
    suppress: FxHashMap<usize, FxHashSet<Box<[u8]>>>,
    options: Options,
    unit: VicinityUnit,
}

impl Plan {
    pub fn new(
        kb: &KnowledgeBase,
        mapping: &SensitivityMapping,
        options: Options,
        unit: VicinityUnit,
    ) -> Result<Self, KbError> {
        mapping.validate_shape()?;
        let mut identifiers = minimal_identifier_set(mapping, kb)?;
        if !options.min_identifiers {
            identifiers = kb.all_identifiers();
        }
        let index: FxHashMap<&str, usize> = identifiers.iter().enumerate().map(|(i, id)| (id.name(), i)).collect();
        let feedback = index.get(FEEDBACK).copied();
        let quasi: Vec<QuasiSet> = mapping
            .quasi
            .iter()
            .map(|q| {
                let mut members: Vec<usize> = q.entities.iter().map(|e| index[e.as_str()]).collect();
                members.sort_unstable();
                members.dedup();
                QuasiSet {
                    members,
                    vicinity: q.vicinity,
                }
            })
            .collect();
        let mut groups_of = vec![Vec::new(); identifiers.len()];
        for (g, set) in quasi.iter().enumerate() {
            for &m in &set.members {
                groups_of[m].push(g);
            }
        }
        let classes: Vec<Class> = identifiers
            .iter()
            .enumerate()
            .map(|(i, id)| {
                if Some(i) == feedback {
                    Class::Feedback
                } else if mapping.is_direct(id.name()) {
                    Class::Direct
                } else if !groups_of[i].is_empty() {
                    Class::Quasi
                } else {
                    Class::Unmapped
                }
            })
            .collect();

        // Defer quasi-only identifiers, regex first, while every quasi group
        // keeps at least one member that is always evaluated.
        let mut deferred = vec![false; identifiers.len()];
        if options.quasi_skip {
            let mut candidates: Vec<usize> = (0..identifiers.len()).filter(|&i| classes[i] == Class::Quasi).collect();
            candidates.sort_by_key(|&i| (identifiers[i].is_dictionary(), identifiers[i].name().to_string()));
            for c in candidates {
                let keeps_anchor = groups_of[c]
                    .iter()
                    .all(|&g| quasi[g].members.iter().any(|&m| m != c && !deferred[m]));
                if keeps_anchor {
                    deferred[c] = true;
                }
            }
        }

        let mut suppress: FxHashMap<usize, FxHashSet<Box<[u8]>>> = FxHashMap::default();
        for (token, entity) in &kb.feedback().suppress {
            if let Some(&i) = index.get(entity.as_str()) {
                suppress.entry(i).or_default().insert(token.as_bytes().into());
            }
        }
        Ok(Plan {
            identifiers,
            feedback,
            classes,
            quasi,
            groups_of,
            deferred,
            suppress,
            options,
            unit,
        })
    }

    pub fn identifiers(&self) -> &[Arc<Identifier>] {
        &self.identifiers
    }

    pub fn identifier_count(&self) -> usize {
        self.identifiers.len()
    }

    pub fn entity(&self, i: usize) -> &str {
        self.identifiers[i].name()
    }

    pub fn index_of(&self, entity: &str) -> Option<usize> {
        self.identifiers.iter().position(|i| i.name() == entity)
    }

    pub fn class(&self, i: usize) -> Class {
        self.classes[i]
    }

    pub fn quasi_sets(&self) -> &[QuasiSet] {
        &self.quasi
    }

    pub fn groups_of(&self, i: usize) -> &[usize] {
        &self.groups_of[i]
    }

    pub fn is_deferred(&self, i: usize) -> bool {
        self.deferred[i]
    }

    pub fn options(&self) -> Options {
        self.options
    }

    pub fn vicinity_unit(&self) -> VicinityUnit {
        self.unit
    }

    /// Longest token any evaluated identifier accepts.
    pub fn max_token_len(&self) -> usize {
        self.identifiers.iter().map(|i| i.max_len()).max().unwrap_or(0)
    }

    fn is_suppressed(&self, i: usize, token: &[u8]) -> bool {
        self.suppress.get(&i).is_some_and(|s| s.contains(token))
    }

    /// Fresh evaluation order over the identifiers `sweep` covers, feedback
    /// excluded, alphabetical.
    pub fn mru(&self, sweep: Sweep) -> MruState {
        let order = (0..self.identifiers.len())
            .filter(|&i| Some(i) != self.feedback)
            .filter(|&i| match sweep {
                Sweep::All => true,
                Sweep::First => !self.deferred[i],
                Sweep::Deferred => self.deferred[i],
            })
            .collect();
        MruState {
            order,
            promote: self.options.mru,
        }
    }
}

/// Which identifiers an [`MruState`] covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    All,
    First,
    Deferred,
}

/// Identifier evaluation order. A match moves the identifier to the front.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MruState {
    order: Vec<usize>,
    promote: bool,
}

impl MruState {
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    fn promote(&mut self, at: usize) {
        if self.promote && at > 0 {
            self.order[..=at].rotate_right(1);
        }
    }
}

/// Result of classifying one token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Match {
    pub identifier: usize,
    pub suppressed: bool,
}

/// Classifies one token: forced-sensitive feedback first, then identifiers
/// in MRU order with the length pre-filter, then suppression. Returns the
/// match and the number of identifier evaluations performed.
pub fn classify_token(plan: &Plan, token: &[u8], mru: &mut MruState) -> (Option<Match>, u64) {
    let mut evaluations = 0;
    let mut hit = None;
    if let Some(fb) = plan.feedback {
        evaluations += 1;
        if plan.identifiers[fb].matches(token) {
            hit = Some(fb);
        }
    }
    if hit.is_none() {
        for at in 0..mru.order.len() {
            let i = mru.order[at];
            let id = &plan.identifiers[i];
            if !id.length_admits(token.len()) {
                continue;
            }
            evaluations += 1;
            if id.matches_unbounded(token) {
                mru.promote(at);
                hit = Some(i);
                break;
            }
        }
    }
    let m = hit.map(|identifier| Match {
        identifier,
        suppressed: plan.is_suppressed(identifier, token),
    });
    (m, evaluations)
}

/// A run of consecutive segments from one group.
#[derive(Debug, Clone, Copy)]
pub struct UnitSpec<'a> {
    pub group_id: u32,
    pub segments: &'a [Segment],
    /// Ordinal of the first segment within its group.
    pub first_segment: usize,
    pub starts_group: bool,
    pub ends_group: bool,
}

/// Token counts keyed by text, for tokens without a finding.
pub type TokenCounts = FxHashMap<Box<str>, u64>;

#[derive(Debug, Clone, Default)]
pub struct UnitOutcome {
    pub mode: Option<ProcessingMode>,
    /// Tokens in the unit (tokens seen up to the exit point in boolean mode).
    pub token_count: usize,
    /// Findings with unit-local positions, ordered by position.
    pub findings: Vec<Finding>,
    pub unidentified: TokenCounts,
    /// The whole unit is sensitive (boolean hit or skip).
    pub whole_unit: bool,
    /// Entity that triggered a boolean exit.
    pub trigger: Option<String>,
    pub evaluations: u64,
    pub tokens_classified: u64,
    pub bytes_classified: u64,
}

fn count_token(counts: &mut TokenCounts, text: &[u8]) {
    let s = std::str::from_utf8(text).expect("decoded tokens are ASCII");
    match counts.get_mut(s) {
        Some(c) => *c += 1,
        None => {
            counts.insert(s.into(), 1);
        }
    }
}

struct Pending {
    position: usize,
    segment: usize,
    page_index: usize,
    byte_offset: usize,
    file_offset: usize,
    text: std::ops::Range<usize>,
}

/// Classifies one unit in `mode`.
pub fn process_unit(plan: &Plan, bytes: &[u8], encoding: Encoding, unit: UnitSpec<'_>, mode: ProcessingMode) -> UnitOutcome {
    let mut out = UnitOutcome {
        mode: Some(mode),
        ..Default::default()
    };
    match mode {
        ProcessingMode::Skip => {
            out.whole_unit = true;
            out.trigger = Some("SKIP".to_string());
        }
        ProcessingMode::Boolean => boolean_unit(plan, bytes, encoding, unit, &mut out),
        ProcessingMode::Concise => concise_unit(plan, bytes, encoding, unit, &mut out),
    }
    out
}

fn make_finding(
    unit: &UnitSpec<'_>,
    seg_ord: usize,
    seg: &Segment,
    span: TokenSpan,
    text: &[u8],
    position: usize,
    m: Match,
) -> Finding {
    let (o, l) = (span.offset as usize, span.len as usize);
    Finding {
        token: ParsedToken {
            text: String::from_utf8(text.to_vec()).expect("decoded tokens are ASCII"),
            page_index: seg.page_index,
            byte_offset: o,
            byte_len: l,
            group_id: unit.group_id,
        },
        position,
        segment: seg_ord,
        file_offset: seg.start + o,
        identifier: m.identifier,
        suppressed: m.suppressed,
    }
}

fn concise_unit(plan: &Plan, bytes: &[u8], encoding: Encoding, unit: UnitSpec<'_>, out: &mut UnitOutcome) {
    let classes = encoding.classes();
    let any_deferred = plan.deferred.iter().any(|&d| d);
    let mut mru = plan.mru(if any_deferred { Sweep::First } else { Sweep::All });
    let deferred_len = |len: usize| {
        plan.deferred
            .iter()
            .enumerate()
            .any(|(i, &d)| d && plan.identifiers[i].length_admits(len))
    };
    let mut decoded = Vec::new();
    let mut spans = Vec::new();
    let mut pending: Vec<Pending> = Vec::new();
    let mut arena: Vec<u8> = Vec::new();
    let mut position = 0;
    for (k, seg) in unit.segments.iter().enumerate() {
        decode_classes(&bytes[seg.start..seg.end], classes, &mut decoded);
        spans.clear();
        tokenize_decoded(&decoded, &mut spans);
        out.bytes_classified += seg.len() as u64;
        for &span in &spans {
            let (o, l) = (span.offset as usize, span.len as usize);
            let text = &decoded[o..o + l];
            let (m, evals) = classify_token(plan, text, &mut mru);
            out.evaluations += evals;
            out.tokens_classified += 1;
            match m {
                Some(m) => out
                    .findings
                    .push(make_finding(&unit, unit.first_segment + k, seg, span, text, position, m)),
                None if any_deferred && deferred_len(l) => {
                    let start = arena.len();
                    arena.extend_from_slice(text);
                    pending.push(Pending {
                        position,
                        segment: unit.first_segment + k,
                        page_index: seg.page_index,
                        byte_offset: o,
                        file_offset: seg.start + o,
                        text: start..arena.len(),
                    });
                }
                None => count_token(&mut out.unidentified, text),
            }
            position += 1;
        }
    }
    out.token_count = position;
    if pending.is_empty() {
        return;
    }

    // Second sweep: deferred identifiers, only where a finding could matter.
    let oracle = SkipOracle::new(plan, &out.findings, position, unit.starts_group, unit.ends_group);
    let mut mru = plan.mru(Sweep::Deferred);
    let mut late = Vec::new();
    for p in &pending {
        let text = &arena[p.text.clone()];
        let mut hit = None;
        for at in 0..mru.order.len() {
            let i = mru.order[at];
            let id = &plan.identifiers[i];
            // Page vicinity uses the group segment ordinal.
            if !id.length_admits(text.len()) || !oracle.must_evaluate(i, p.position, p.segment) {
                continue;
            }
            out.evaluations += 1;
            if id.matches_unbounded(text) {
                mru.promote(at);
                hit = Some(i);
                break;
            }
        }
        match hit {
            Some(identifier) => late.push(Finding {
                token: ParsedToken {
                    text: String::from_utf8(text.to_vec()).expect("decoded tokens are ASCII"),
                    page_index: p.page_index,
                    byte_offset: p.byte_offset,
                    byte_len: text.len(),
                    group_id: unit.group_id,
                },
                position: p.position,
                segment: p.segment,
                file_offset: p.file_offset,
                identifier,
                suppressed: plan.is_suppressed(identifier, text),
            }),
            None => count_token(&mut out.unidentified, text),
        }
    }
    if !late.is_empty() {
        out.findings.extend(late);
        out.findings.sort_by_key(|f| f.position);
    }
}

fn boolean_unit(plan: &Plan, bytes: &[u8], encoding: Encoding, unit: UnitSpec<'_>, out: &mut UnitOutcome) {
    let classes = encoding.classes();
    let mut mru = plan.mru(Sweep::All);
    let mut online = OnlineQuasi::new(plan);
    let mut decoded = Vec::new();
    let mut spans = Vec::new();
    let mut position = 0;
    for (k, seg) in unit.segments.iter().enumerate() {
        decode_classes(&bytes[seg.start..seg.end], classes, &mut decoded);
        spans.clear();
        tokenize_decoded(&decoded, &mut spans);
        for &span in &spans {
            let (o, l) = (span.offset as usize, span.len as usize);
            let text = &decoded[o..o + l];
            let (m, evals) = classify_token(plan, text, &mut mru);
            out.evaluations += evals;
            out.tokens_classified += 1;
            position += 1;
            let Some(m) = m else {
                count_token(&mut out.unidentified, text);
                continue;
            };
            let sensitive = !m.suppressed
                && match plan.class(m.identifier) {
                    Class::Direct | Class::Feedback => true,
                    Class::Quasi => online.push(m.identifier, position - 1, unit.first_segment + k),
                    Class::Unmapped => false,
                };
            out.findings.push(make_finding(
                &unit,
                unit.first_segment + k,
                seg,
                span,
                text,
                position - 1,
                m,
            ));
            if sensitive {
                out.bytes_classified += (o + l) as u64;
                out.token_count = position;
                out.whole_unit = true;
                out.trigger = Some(plan.entity(m.identifier).to_string());
                return;
            }
        }
        out.bytes_classified += seg.len() as u64;
    }
    out.token_count = position;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::builtin::{CREDIT_CARD, EMAIL, GENDER, ZIPCODE};
    use crate::kb::QuasiGroup;

    fn direct(entities: &[&str]) -> SensitivityMapping {
        SensitivityMapping {
            direct: entities.iter().map(|e| e.to_string()).collect(),
            ..Default::default()
        }
    }

    fn plan_for(mapping: &SensitivityMapping, options: Options) -> Plan {
        Plan::new(&KnowledgeBase::builtin(), mapping, options, VicinityUnit::Tokens).unwrap()
    }

    fn names(plan: &Plan, mru: &MruState) -> Vec<String> {
        mru.order().iter().map(|&i| plan.entity(i).to_string()).collect()
    }

    #[test]
    fn mru_promotion() {
        let plan = plan_for(&direct(&[CREDIT_CARD, EMAIL]), Options::default());
        let mut mru = plan.mru(Sweep::All);
        assert_eq!(names(&plan, &mru), [CREDIT_CARD, EMAIL]);
        let (m, _) = classify_token(&plan, b"alice@example.com", &mut mru);
        assert_eq!(plan.entity(m.unwrap().identifier), EMAIL);
        assert_eq!(names(&plan, &mru), [EMAIL, CREDIT_CARD]);
        // The next email is matched by the first identifier tried.
        let (m, evals) = classify_token(&plan, b"bob@example.com", &mut mru);
        assert!(m.is_some());
        assert_eq!(evals, 1);
        let before = mru.clone();
        let (m, _) = classify_token(&plan, b"zzz", &mut mru);
        assert!(m.is_none());
        assert_eq!(mru, before);
    }

    #[test]
    fn mru_off_keeps_order() {
        let options = Options {
            mru: false,
            ..Default::default()
        };
        let plan = plan_for(&direct(&[CREDIT_CARD, EMAIL]), options);
        let mut mru = plan.mru(Sweep::All);
        classify_token(&plan, b"alice@example.com", &mut mru);
        assert_eq!(names(&plan, &mru), [CREDIT_CARD, EMAIL]);
    }

    #[test]
    fn feedback_first_and_suppress_last() {
        let mut kb = KnowledgeBase::builtin();
        kb.feedback_mut().force_sensitive.insert("feedback-keyword-1".into());
        kb.feedback_mut()
            .suppress
            .insert(("alice@example.com".into(), EMAIL.into()));
        let plan = Plan::new(&kb, &direct(&[EMAIL]), Options::default(), VicinityUnit::Tokens).unwrap();
        let mut mru = plan.mru(Sweep::All);
        let (m, _) = classify_token(&plan, b"feedback-keyword-1", &mut mru);
        assert_eq!(plan.entity(m.unwrap().identifier), FEEDBACK);
        assert_eq!(plan.class(m.unwrap().identifier), Class::Feedback);
        let (m, _) = classify_token(&plan, b"alice@example.com", &mut mru);
        assert!(m.unwrap().suppressed);
        let (m, _) = classify_token(&plan, b"bob@example.com", &mut mru);
        assert!(!m.unwrap().suppressed);
    }

    #[test]
    fn deferral_keeps_an_anchor() {
        let mapping = SensitivityMapping {
            quasi: vec![QuasiGroup {
                entities: vec![ZIPCODE.into(), GENDER.into()],
                vicinity: 10,
            }],
            ..Default::default()
        };
        let plan = plan_for(&mapping, Options::default());
        assert!(plan.is_deferred(plan.index_of(ZIPCODE).unwrap()));
        assert!(!plan.is_deferred(plan.index_of(GENDER).unwrap()));
        let off = plan_for(
            &mapping,
            Options {
                quasi_skip: false,
                ..Default::default()
            },
        );
        assert!(!off.is_deferred(off.index_of(ZIPCODE).unwrap()));
    }

    fn log_unit(text: &[u8]) -> (Vec<Segment>, usize) {
        let seg = Segment {
            page_index: 0,
            start: 0,
            end: text.len(),
        };
        (vec![seg], 0)
    }

    fn unit(segments: &[Segment]) -> UnitSpec<'_> {
        UnitSpec {
            group_id: 0,
            segments,
            first_segment: 0,
            starts_group: true,
            ends_group: true,
        }
    }

    fn thousand_tokens(sensitive_at: usize) -> Vec<u8> {
        let mut words: Vec<String> = (0..1000).map(|_| "word".to_string()).collect();
        words[sensitive_at] = "alice@example.com".into();
        words.join(" ").into_bytes()
    }

    #[test]
    fn boolean_exits_early() {
        let plan = plan_for(&direct(&[EMAIL]), Options::default());
        let bytes = thousand_tokens(2);
        let (segs, _) = log_unit(&bytes);
        let out = process_unit(&plan, &bytes, Encoding::Ascii, unit(&segs), ProcessingMode::Boolean);
        assert!(out.whole_unit);
        assert!(out.tokens_classified <= 3);
        assert_eq!(out.trigger.as_deref(), Some(EMAIL));
        let out = process_unit(&plan, &bytes, Encoding::Ascii, unit(&segs), ProcessingMode::Concise);
        assert_eq!(out.tokens_classified, 1000);
        assert_eq!(out.findings.len(), 1);
        assert_eq!(out.unidentified.get("word"), Some(&999));
        let out = process_unit(&plan, &bytes, Encoding::Ascii, unit(&segs), ProcessingMode::Skip);
        assert_eq!(out.evaluations, 0);
        assert!(out.whole_unit);
    }

    #[test]
    fn boolean_waits_for_quasi_partner() {
        let mapping = SensitivityMapping {
            quasi: vec![QuasiGroup {
                entities: vec![ZIPCODE.into(), GENDER.into()],
                vicinity: 3,
            }],
            ..Default::default()
        };
        let plan = plan_for(&mapping, Options::default());
        let bytes = b"98112 a1 a2 a3 a4 female a5 98113 a6 male".to_vec();
        let (segs, _) = log_unit(&bytes);
        let out = process_unit(&plan, &bytes, Encoding::Ascii, unit(&segs), ProcessingMode::Boolean);
        assert!(out.whole_unit);
        assert_eq!(out.token_count, 8);
        assert_eq!(out.trigger.as_deref(), Some(ZIPCODE));
    }

    #[test]
    fn quasi_skip_leaves_far_zips_unidentified() {
        let mapping = SensitivityMapping {
            quasi: vec![QuasiGroup {
                entities: vec![ZIPCODE.into(), GENDER.into()],
                vicinity: 2,
            }],
            ..Default::default()
        };
        let bytes = b"98112 a1 a2 a3 a4 a5 a6 a7 a8 a9 b1 male 98113".to_vec();
        let (segs, _) = log_unit(&bytes);
        let on = plan_for(&mapping, Options::default());
        let out_on = process_unit(&on, &bytes, Encoding::Ascii, unit(&segs), ProcessingMode::Concise);
        let off = plan_for(
            &mapping,
            Options {
                quasi_skip: false,
                ..Default::default()
            },
        );
        let out_off = process_unit(&off, &bytes, Encoding::Ascii, unit(&segs), ProcessingMode::Concise);
        let texts = |o: &UnitOutcome| o.findings.iter().map(|f| f.token.text.clone()).collect::<Vec<_>>();
        assert_eq!(texts(&out_off), ["98112", "male", "98113"]);
        assert_eq!(texts(&out_on), ["male", "98113"]);
        assert_eq!(out_on.unidentified.get("98112"), Some(&1));
        let sens = |p: &Plan, o: &UnitOutcome| {
            resolve_vicinity(&o.findings, p)
                .into_iter()
                .zip(&o.findings)
                .filter(|(s, _)| *s)
                .map(|(_, f)| f.token.text.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(sens(&on, &out_on), sens(&off, &out_off));
        assert_eq!(sens(&on, &out_on), ["male", "98113"]);
    }
}

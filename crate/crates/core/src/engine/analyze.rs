use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU8, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::budget::{BudgetParams, BudgetState, Sample, Transition};
use super::pool::run_parallel;
use super::EngineError;
use crate::classifier::{
    process_unit, resolve_vicinity, Options, Plan, ProcessingMode, UnitOutcome, UnitSpec, VicinityUnit,
};
use crate::encoding::Encoding;
use crate::kb::{KnowledgeBase, SensitivityMapping};
use crate::keys::RunKey;
use crate::parser::{InputKind, Layout};
use crate::redactor::{apply_redactions, overwrite_tokens, Extent, ExtentKind, RedactionPolicy, Redactor};
use crate::report::{Reports, Tally, UNIDENTIFIED};

/// Maximum segments (pages or log lines) per work unit.
pub const DEFAULT_CHUNK_PAGES: usize = 1024;

/// Processing mode requested for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessingChoice {
    #[default]
    Concise,
    Boolean,
    /// Start concise and adapt to `time_budget`.
    Dynamic,
}

impl std::str::FromStr for ProcessingChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "concise" => Ok(ProcessingChoice::Concise),
            "boolean" => Ok(ProcessingChoice::Boolean),
            "dynamic" => Ok(ProcessingChoice::Dynamic),
            other => Err(format!("unknown processing mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeSettings {
    pub kind: InputKind,
    pub encoding: Encoding,
    pub threads: usize,
    pub processing: ProcessingChoice,
    /// Seconds; required for dynamic processing.
    pub time_budget: Option<f64>,
    pub budget: BudgetParams,
    pub options: Options,
    pub vicinity_unit: VicinityUnit,
    pub redaction: RedactionPolicy,
    pub chunk_pages: usize,
}

impl Default for AnalyzeSettings {
    fn default() -> Self {
        AnalyzeSettings {
            kind: InputKind::Dump,
            encoding: Encoding::Ascii,
            threads: 1,
            processing: ProcessingChoice::Concise,
            time_budget: None,
            budget: BudgetParams::default(),
            options: Options::default(),
            vicinity_unit: VicinityUnit::Tokens,
            redaction: RedactionPolicy::default(),
            chunk_pages: DEFAULT_CHUNK_PAGES,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timings {
    pub parse_s: f64,
    pub plan_s: f64,
    pub classify_s: f64,
    pub resolve_s: f64,
    pub redact_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Stats {
    pub input_bytes: usize,
    pub pages: usize,
    pub groups: usize,
    pub units: usize,
    pub threads: usize,
    pub processing_mode: String,
    pub units_by_mode: BTreeMap<String, usize>,
    pub tokens_classified: u64,
    pub evaluations: u64,
    pub bytes_classified: u64,
    pub findings_by_entity: BTreeMap<String, u64>,
    pub sensitive_by_entity: BTreeMap<String, u64>,
    pub whole_unit_pages: u64,
    pub redacted_bytes: u64,
    pub mode_transitions: Vec<Transition>,
    pub timings: Timings,
}

impl Stats {
    /// The stats with wall-clock and thread-count dependent fields cleared.
    pub fn counts_only(&self) -> Stats {
        Stats {
            threads: 0,
            timings: Timings::default(),
            mode_transitions: Vec::new(),
            ..self.clone()
        }
    }

    pub fn sensitive_findings(&self) -> u64 {
        self.sensitive_by_entity.values().sum()
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub output: Vec<u8>,
    /// Redacted ranges in input order.
    pub extents: Vec<Extent>,
    pub reports: Reports,
    pub stats: Stats,
}

/// Rejects overwrite strings whose replicated or truncated forms contain a
/// token an enabled identifier accepts.
pub fn check_overwrite_strings(policy: &RedactionPolicy, plan: &Plan) -> Result<(), EngineError> {
    for s in policy.overwrite_strings() {
        for token in overwrite_tokens(s, plan.max_token_len() + s.chars().count()) {
            if let Some(id) = plan.identifiers().iter().find(|id| id.matches(token.as_bytes())) {
                return Err(EngineError::Config(
                    crate::redactor::RedactError::OverwriteMatchesIdentifier {
                        string: s.to_string(),
                        token,
                        identifier: id.name().to_string(),
                    }
                    .to_string(),
                ));
            }
        }
    }
    Ok(())
}

struct Unit<'a> {
    spec: UnitSpec<'a>,
    group: usize,
}

fn build_units(layout: &Layout, chunk: usize) -> Vec<Unit<'_>> {
    let chunk = chunk.max(1);
    let mut units = Vec::new();
    for (g, group) in layout.groups.iter().enumerate() {
        let n = group.segments.len();
        for (k, segments) in group.segments.chunks(chunk).enumerate() {
            let first = k * chunk;
            units.push(Unit {
                spec: UnitSpec {
                    group_id: group.group_id,
                    segments,
                    first_segment: first,
                    starts_group: first == 0,
                    ends_group: first + segments.len() == n,
                },
                group: g,
            });
        }
    }
    units
}

fn mode_code(m: ProcessingMode) -> u8 {
    match m {
        ProcessingMode::Concise => 0,
        ProcessingMode::Boolean => 1,
        ProcessingMode::Skip => 2,
    }
}

fn code_mode(c: u8) -> ProcessingMode {
    match c {
        0 => ProcessingMode::Concise,
        1 => ProcessingMode::Boolean,
        _ => ProcessingMode::Skip,
    }
}

/// Runs the analyze pipeline on in-memory input: parse, plan, classify in
/// parallel, resolve vicinity per group, redact and aggregate reports.
pub fn analyze_bytes(
    input: &[u8],
    kb: &KnowledgeBase,
    mapping: &SensitivityMapping,
    settings: &AnalyzeSettings,
    key: Option<&RunKey>,
) -> Result<Analysis, EngineError> {
    let t0 = Instant::now();
    let mut stats = Stats {
        input_bytes: input.len(),
        threads: settings.threads.max(1),
        ..Default::default()
    };
    if settings.processing == ProcessingChoice::Dynamic && settings.time_budget.is_none() {
        return Err(EngineError::Config("dynamic processing requires time_budget".into()));
    }

    let layout = Layout::of_input(input, settings.kind, settings.encoding)?;
    stats.pages = layout.page_count();
    stats.groups = layout.groups.len();
    stats.timings.parse_s = t0.elapsed().as_secs_f64();

    let t = Instant::now();
    let plan = Plan::new(kb, mapping, settings.options, settings.vicinity_unit)?;
    let redactor = Redactor::new(&settings.redaction, key, settings.kind, settings.encoding)
        .map_err(|e| EngineError::Config(e.to_string()))?;
    check_overwrite_strings(&settings.redaction, &plan)?;
    let units = build_units(&layout, settings.chunk_pages);
    stats.units = units.len();
    stats.timings.plan_s = t.elapsed().as_secs_f64();

    // Classification.
    let t = Instant::now();
    let fixed = match settings.processing {
        ProcessingChoice::Concise | ProcessingChoice::Dynamic => ProcessingMode::Concise,
        ProcessingChoice::Boolean => ProcessingMode::Boolean,
    };
    stats.processing_mode = match settings.processing {
        ProcessingChoice::Dynamic => "dynamic".to_string(),
        _ => fixed.name().to_string(),
    };
    let current = AtomicU8::new(mode_code(fixed));
    let parallelism = settings
        .threads
        .max(1)
        .min(std::thread::available_parallelism().map_or(1, |n| n.get()));
    let mut budget = settings.time_budget.map(|b| {
        let available = b * (1.0 - settings.budget.reserve);
        BudgetState::new(settings.budget, available, parallelism, units.len())
    });
    let dynamic = settings.processing == ProcessingChoice::Dynamic;
    let outcomes = run_parallel(
        &units,
        settings.threads,
        |_, u| {
            let mode = code_mode(current.load(Ordering::Relaxed));
            let started = Instant::now();
            let o = process_unit(&plan, input, settings.encoding, u.spec, mode);
            (o, started.elapsed())
        },
        |_, (o, dt): &(UnitOutcome, Duration)| {
            if let (true, Some(b)) = (dynamic, budget.as_mut()) {
                let sample = Sample {
                    mode: o.mode.expect("processed units carry their mode"),
                    seconds: dt.as_secs_f64(),
                };
                let next = b.update(sample, t0.elapsed().as_secs_f64());
                current.store(mode_code(next), Ordering::Relaxed);
            }
        },
    )?;
    if let Some(b) = &budget {
        stats.mode_transitions = b.transitions().to_vec();
    }
    stats.timings.classify_s = t.elapsed().as_secs_f64();

    // Per-group resolution.
    let t = Instant::now();
    let mut extents: Vec<Extent> = Vec::new();
    let mut sensitive = Tally::default();
    let mut non_sensitive = Tally::default();
    let mut i = 0;
    let mut outcomes: Vec<Option<UnitOutcome>> = outcomes.into_iter().map(|(o, _)| Some(o)).collect();
    while i < units.len() {
        let g = units[i].group;
        let mut j = i;
        while j < units.len() && units[j].group == g {
            j += 1;
        }
        let mut group_findings = Vec::new();
        let mut owner = Vec::new();
        let mut base = 0;
        for (k, slot) in outcomes[i..j].iter_mut().enumerate() {
            let o = slot.as_mut().expect("each unit resolved once");
            let mode = o.mode.expect("processed units carry their mode");
            *stats.units_by_mode.entry(mode.name().to_string()).or_default() += 1;
            stats.tokens_classified += o.tokens_classified;
            stats.evaluations += o.evaluations;
            stats.bytes_classified += o.bytes_classified;
            for mut f in std::mem::take(&mut o.findings) {
                f.position += base;
                *stats.findings_by_entity.entry(plan.entity(f.identifier).to_string()).or_default() += 1;
                group_findings.push(f);
                owner.push(i + k);
            }
            base += o.token_count;
        }
        let verdicts = resolve_vicinity(&group_findings, &plan);
        for ((f, sens), &u) in group_findings.into_iter().zip(verdicts).zip(&owner) {
            if outcomes[u].as_ref().is_some_and(|o| o.whole_unit) {
                continue;
            }
            let entity = plan.entity(f.identifier);
            if sens {
                *stats.sensitive_by_entity.entry(entity.to_string()).or_default() += 1;
                sensitive.add(&f.token.text, entity, 1);
                extents.push(Extent {
                    start: f.file_offset,
                    len: f.token.byte_len,
                    entity: entity.to_string(),
                    kind: ExtentKind::Token { text: f.token.text },
                });
            } else {
                non_sensitive.add(&f.token.text, entity, 1);
            }
        }
        for u in i..j {
            let o = outcomes[u].take().expect("each unit resolved once");
            if o.whole_unit {
                let trigger = o.trigger.as_deref().unwrap_or("SKIP");
                for seg in units[u].spec.segments {
                    stats.whole_unit_pages += 1;
                    sensitive.add(&format!("PAGE:{}", seg.page_index), trigger, 1);
                    if !seg.is_empty() {
                        extents.push(Extent {
                            start: seg.start,
                            len: seg.len(),
                            entity: trigger.to_string(),
                            kind: ExtentKind::Region,
                        });
                    }
                }
            } else {
                for (token, n) in o.unidentified {
                    non_sensitive.add(&token, UNIDENTIFIED, n);
                }
            }
        }
        i = j;
    }
    extents.sort_by_key(|e| e.start);
    stats.timings.resolve_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    stats.redacted_bytes = extents.iter().map(|e| e.len as u64).sum();
    let output = apply_redactions(input, &extents, &redactor)?;
    stats.timings.redact_s = t.elapsed().as_secs_f64();
    stats.timings.total_s = t0.elapsed().as_secs_f64();
    Ok(Analysis {
        output,
        extents,
        reports: Reports {
            sensitive: sensitive.into_rows(),
            non_sensitive: non_sensitive.into_rows(),
        },
        stats,
    })
}

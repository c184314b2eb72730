use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::analyze::{analyze_bytes, AnalyzeSettings, ProcessingChoice, Stats, DEFAULT_CHUNK_PAGES};
use super::bench::{run_bench, write_bench_csv, BenchConfig, BenchRow};
use super::budget::BudgetParams;
use super::EngineError;
use crate::classifier::{Options, VicinityUnit};
use crate::dumpgen::{generate_dump, write_manifest, DumpGenConfig};
use crate::encoding::Encoding;
use crate::kb::{ingest_augment, FeedbackStore, KnowledgeBase, SensitivityMapping};
use crate::keys::RunKey;
use crate::parser::InputKind;
use crate::redactor::{RedactionMethod, RedactionPolicy};
use crate::report::{write_reports, ReportPaths};

pub const FEEDBACK_FILE: &str = "feedback.json";
pub const STATS_SUFFIX: &str = ".stats.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    #[default]
    Analyze,
    Feedback,
    Augment,
    Generate,
    Bench,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    #[serde(rename = "type", default)]
    pub kind: InputKind,
    #[serde(default)]
    pub encoding: Encoding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportsConfig {
    pub sensitive: PathBuf,
    pub non_sensitive: PathBuf,
    /// Seal both reports with the run key.
    #[serde(default)]
    pub encrypt: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VicinityConfig {
    #[serde(default)]
    pub unit: VicinityUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    pub source: PathBuf,
    pub entity_type: String,
    pub output: PathBuf,
}

fn default_threads() -> usize {
    1
}

fn default_chunk_pages() -> usize {
    DEFAULT_CHUNK_PAGES
}

/// Run configuration, read from JSON. Relative paths resolve against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default)]
    pub processing_mode: ProcessingChoice,
    /// Seconds.
    #[serde(default)]
    pub time_budget: Option<f64>,
    #[serde(default)]
    pub input: Option<InputConfig>,
    /// Redacted output (analyze) or generated dump (generate).
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub reports: Option<ReportsConfig>,
    /// Mapping JSON; every built-in entity is directly sensitive without one.
    #[serde(default)]
    pub sensitivity_mapping: Option<PathBuf>,
    /// Directory holding persistent knowledge-base state.
    #[serde(default)]
    pub knowledge_base: Option<PathBuf>,
    #[serde(default)]
    pub redaction: RedactionPolicy,
    #[serde(default)]
    pub optimizations: Options,
    #[serde(default)]
    pub vicinity: VicinityConfig,
    #[serde(default)]
    pub budget: BudgetParams,
    #[serde(default = "default_chunk_pages")]
    pub chunk_pages: usize,
    #[serde(default)]
    pub augment: Option<AugmentConfig>,
    #[serde(default)]
    pub dumpgen: Option<DumpGenConfig>,
    /// Ground-truth manifest written next to a generated dump.
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub bench: Option<BenchConfig>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: RunMode::Analyze,
            threads: 1,
            processing_mode: ProcessingChoice::Concise,
            time_budget: None,
            input: None,
            output: None,
            reports: None,
            sensitivity_mapping: None,
            knowledge_base: None,
            redaction: RedactionPolicy::default(),
            optimizations: Options::default(),
            vicinity: VicinityConfig::default(),
            budget: BudgetParams::default(),
            chunk_pages: DEFAULT_CHUNK_PAGES,
            augment: None,
            dumpgen: None,
            manifest: None,
            bench: None,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub threads: Option<usize>,
    pub processing_mode: Option<ProcessingChoice>,
    pub time_budget: Option<f64>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> EngineError {
    EngineError::Config(msg.into())
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn required<'a, T>(v: &'a Option<T>, what: &str, mode: RunMode) -> Result<&'a T, EngineError> {
    v.as_ref()
        .ok_or_else(|| config_err(format!("`{what}` is required in {mode:?} mode")))
}

impl EngineConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self, EngineError> {
        serde_json::from_slice(bytes).map_err(|e| config_err(e.to_string()))
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let bytes = std::fs::read(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&bytes)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let mut paths: Vec<&mut PathBuf> = Vec::new();
        if let Some(i) = &mut self.input {
            paths.push(&mut i.path);
        }
        if let Some(r) = &mut self.reports {
            paths.push(&mut r.sensitive);
            paths.push(&mut r.non_sensitive);
        }
        if let Some(a) = &mut self.augment {
            paths.push(&mut a.source);
            paths.push(&mut a.output);
        }
        paths.extend(self.output.as_mut());
        paths.extend(self.sensitivity_mapping.as_mut());
        paths.extend(self.knowledge_base.as_mut());
        paths.extend(self.manifest.as_mut());
        paths.extend(self.redaction.key_file.as_mut());
        if let Some(b) = &mut self.bench {
            paths.push(&mut b.output);
        }
        for p in paths {
            resolve(base, p);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(t) = o.threads {
            self.threads = t;
        }
        if let Some(m) = o.processing_mode {
            self.processing_mode = m;
        }
        if let Some(b) = o.time_budget {
            self.time_budget = Some(b);
        }
        if let Some(s) = o.seed {
            if let Some(g) = &mut self.dumpgen {
                g.seed = s;
            }
            if let Some(b) = &mut self.bench {
                b.base.seed = s;
            }
        }
        if let Some(p) = &o.output {
            self.output = Some(p.clone());
        }
        if let Some(p) = &o.manifest {
            self.manifest = Some(p.clone());
        }
    }

    fn needs_key(&self) -> bool {
        self.redaction.method == RedactionMethod::Encrypt || self.reports.as_ref().is_some_and(|r| r.encrypt)
    }

    /// Checks the invariants that do not need any file to exist.
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.threads == 0 {
            return Err(config_err("threads must be at least 1"));
        }
        if self.chunk_pages == 0 {
            return Err(config_err("chunk_pages must be at least 1"));
        }
        if let Some(b) = self.time_budget {
            if !(b.is_finite() && b > 0.0) {
                return Err(config_err(format!("time_budget must be positive, got {b}")));
            }
        }
        let p = &self.budget;
        if !(p.ema_alpha > 0.0 && p.ema_alpha <= 1.0) {
            return Err(config_err("budget.ema_alpha must be in (0, 1]"));
        }
        if p.window == 0 || p.recompute_every == 0 {
            return Err(config_err("budget.window and budget.recompute_every must be at least 1"));
        }
        if !(p.hysteresis > 0.0 && p.hysteresis < 1.0) || !(0.0..1.0).contains(&p.reserve) {
            return Err(config_err("budget.hysteresis must be in (0, 1) and budget.reserve in [0, 1)"));
        }
        match self.mode {
            RunMode::Analyze => {
                if self.processing_mode == ProcessingChoice::Dynamic && self.time_budget.is_none() {
                    return Err(config_err("processing_mode dynamic requires time_budget"));
                }
                let input = required(&self.input, "input", self.mode)?;
                let output = required(&self.output, "output", self.mode)?;
                let reports = required(&self.reports, "reports", self.mode)?;
                let paths = [&input.path, output, &reports.sensitive, &reports.non_sensitive];
                for (i, a) in paths.iter().enumerate() {
                    if paths[i + 1..].contains(a) {
                        return Err(config_err(format!("path {} is used twice", a.display())));
                    }
                }
                self.redaction.validate(input.kind)?;
                if self.needs_key() && self.redaction.key_file.is_none() {
                    return Err(config_err("encryption requires redaction.key_file"));
                }
            }
            RunMode::Feedback => {
                required(&self.reports, "reports", self.mode)?;
                required(&self.knowledge_base, "knowledge_base", self.mode)?;
            }
            RunMode::Augment => {
                let a = required(&self.augment, "augment", self.mode)?;
                if a.source == a.output {
                    return Err(config_err("augment source and output must differ"));
                }
            }
            RunMode::Generate => {
                required(&self.dumpgen, "dumpgen", self.mode)?.validate()?;
                let out = required(&self.output, "output", self.mode)?;
                if self.manifest.as_ref() == Some(out) {
                    return Err(config_err("manifest and output must differ"));
                }
            }
            RunMode::Bench => {
                required(&self.bench, "bench", self.mode)?.validate()?;
            }
        }
        Ok(())
    }

    pub fn analyze_settings(&self) -> AnalyzeSettings {
        let input = self.input.clone().unwrap_or_default();
        AnalyzeSettings {
            kind: input.kind,
            encoding: input.encoding,
            threads: self.threads,
            processing: self.processing_mode,
            time_budget: self.time_budget,
            budget: self.budget,
            options: self.optimizations,
            vicinity_unit: self.vicinity.unit,
            redaction: self.redaction.clone(),
            chunk_pages: self.chunk_pages,
        }
    }

    pub fn load_key(&self) -> Result<Option<RunKey>, EngineError> {
        match &self.redaction.key_file {
            Some(p) => Ok(Some(RunKey::load(p, self.redaction.key_env.as_deref())?)),
            None => Ok(None),
        }
    }

    pub fn feedback_path(&self) -> Option<PathBuf> {
        self.knowledge_base.as_ref().map(|d| d.join(FEEDBACK_FILE))
    }

    /// The mapping in effect, and the knowledge base with its custom
    /// identifiers and feedback state loaded.
    pub fn load_knowledge(&self) -> Result<(KnowledgeBase, SensitivityMapping), EngineError> {
        let (mapping, base) = match &self.sensitivity_mapping {
            Some(p) => {
                let bytes = std::fs::read(p).map_err(|e| EngineError::io(p, e))?;
                let base = p.parent().unwrap_or(Path::new(".")).to_path_buf();
                (SensitivityMapping::from_json(&bytes)?, base)
            }
            None => (SensitivityMapping::all_builtins_direct(), PathBuf::from(".")),
        };
        let mut kb = KnowledgeBase::builtin();
        kb.load_custom(&mapping, &base)?;
        if let Some(p) = self.feedback_path() {
            kb.set_feedback(FeedbackStore::load(&p)?);
        }
        Ok((kb, mapping))
    }
}

/// What a run produced, for the CLI to print.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum RunSummary {
    Analyze { stats: Box<Stats> },
    Feedback { suppressed: usize, forced_sensitive: usize },
    Augment { entity_type: String, terms: usize },
    Generate { pages: usize, planted: usize },
    Bench { rows: Vec<BenchRow> },
}

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp-{}", std::process::id()));
    path.with_file_name(name)
}

/// Writes `bytes` to a temporary sibling and renames it into place, so a
/// failed run never leaves a partial file at `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), EngineError> {
    let tmp = temp_sibling(path);
    let res = std::fs::write(&tmp, bytes).and_then(|_| std::fs::rename(&tmp, path));
    if let Err(e) = res {
        let _ = std::fs::remove_file(&tmp);
        return Err(EngineError::io(path, e));
    }
    Ok(())
}

pub fn stats_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_os_string();
    s.push(STATS_SUFFIX);
    PathBuf::from(s)
}

fn run_analyze(cfg: &EngineConfig) -> Result<RunSummary, EngineError> {
    let input = cfg.input.as_ref().expect("validated");
    let output = cfg.output.as_ref().expect("validated");
    let reports = cfg.reports.as_ref().expect("validated");
    let key = cfg.load_key()?;
    let (kb, mapping) = cfg.load_knowledge()?;
    let bytes = std::fs::read(&input.path).map_err(|e| EngineError::io(&input.path, e))?;
    let analysis = analyze_bytes(&bytes, &kb, &mapping, &cfg.analyze_settings(), key.as_ref())?;
    drop(bytes);
    write_atomic(output, &analysis.output)?;
    let paths = ReportPaths {
        sensitive: reports.sensitive.clone(),
        non_sensitive: reports.non_sensitive.clone(),
    };
    let seal = if reports.encrypt { key.as_ref() } else { None };
    if let Err(e) = write_reports(&analysis.reports, &paths, seal) {
        let _ = std::fs::remove_file(output);
        return Err(e.into());
    }
    let json = serde_json::to_vec_pretty(&analysis.stats).expect("stats serialize");
    write_atomic(&stats_path(output), &json)?;
    Ok(RunSummary::Analyze {
        stats: Box::new(analysis.stats),
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>, EngineError> {
    std::fs::read(path).map_err(|e| EngineError::io(path, e))
}

fn run_feedback(cfg: &EngineConfig) -> Result<RunSummary, EngineError> {
    let reports = cfg.reports.as_ref().expect("validated");
    let store_path = cfg.feedback_path().expect("validated");
    let key = cfg.load_key()?;
    let mut store = FeedbackStore::load(&store_path)?;
    store.apply_feedback(&read_file(&reports.sensitive)?, &read_file(&reports.non_sensitive)?, key.as_ref())?;
    store.save(&store_path)?;
    Ok(RunSummary::Feedback {
        suppressed: store.suppress.len(),
        forced_sensitive: store.force_sensitive.len(),
    })
}

fn run_augment(cfg: &EngineConfig) -> Result<RunSummary, EngineError> {
    let a = cfg.augment.as_ref().expect("validated");
    let terms = ingest_augment(&a.source, &a.entity_type, &a.output)?;
    Ok(RunSummary::Augment {
        entity_type: a.entity_type.clone(),
        terms,
    })
}

fn run_generate(cfg: &EngineConfig) -> Result<RunSummary, EngineError> {
    let g = cfg.dumpgen.as_ref().expect("validated");
    let output = cfg.output.as_ref().expect("validated");
    let (dump, manifest) = generate_dump(g)?;
    write_atomic(output, &dump)?;
    if let Some(m) = &cfg.manifest {
        write_manifest(m, &manifest)?;
    }
    Ok(RunSummary::Generate {
        pages: g.page_count(),
        planted: manifest.len(),
    })
}

fn run_bench_mode(cfg: &EngineConfig) -> Result<RunSummary, EngineError> {
    let b = cfg.bench.as_ref().expect("validated");
    let rows = run_bench(b, &cfg.analyze_settings(), |_| {})?;
    write_bench_csv(&b.output, &rows)?;
    Ok(RunSummary::Bench { rows })
}

/// Validates `cfg` and executes its run mode.
pub fn run(cfg: &EngineConfig) -> Result<RunSummary, EngineError> {
    cfg.validate()?;
    match cfg.mode {
        RunMode::Analyze => run_analyze(cfg),
        RunMode::Feedback => run_feedback(cfg),
        RunMode::Augment => run_augment(cfg),
        RunMode::Generate => run_generate(cfg),
        RunMode::Bench => run_bench_mode(cfg),
    }
}

//! Benchmark harness: factor sweeps over generated dumps.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::analyze::{analyze_bytes, AnalyzeSettings, ProcessingChoice};
use super::EngineError;
use crate::dumpgen::DumpGenConfig;
use crate::kb::{KnowledgeBase, SensitivityMapping, BUILTIN_ENTITIES};
use crate::keys::RunKey;
use crate::redactor::{EncryptScheme, HashAlgo, HashLengthPolicy, RedactionMethod};

pub const MIB: u64 = 1 << 20;

/// One factor and the values it takes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "factor", content = "values", rename_all = "snake_case")]
pub enum Sweep {
    SizeMib(Vec<u64>),
    Threads(Vec<usize>),
    /// Fraction of pages carrying planted entities.
    SensitivePages(Vec<f64>),
    /// Number of built-in entity types mapped as directly sensitive.
    Identifiers(Vec<usize>),
    /// Fraction of payload bytes that are control data.
    ControlData(Vec<f64>),
    Redaction(Vec<RedactionVariant>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RedactionVariant {
    Overwrite,
    Sha256Fit,
    Ff1,
}

impl RedactionVariant {
    pub fn name(self) -> &'static str {
        match self {
            RedactionVariant::Overwrite => "overwrite",
            RedactionVariant::Sha256Fit => "sha256_fit",
            RedactionVariant::Ff1 => "ff1",
        }
    }
}

impl Sweep {
    pub fn factor(&self) -> &'static str {
        match self {
            Sweep::SizeMib(_) => "size_mib",
            Sweep::Threads(_) => "threads",
            Sweep::SensitivePages(_) => "sensitive_pages",
            Sweep::Identifiers(_) => "identifiers",
            Sweep::ControlData(_) => "control_data",
            Sweep::Redaction(_) => "redaction",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sweep::SizeMib(v) => v.len(),
            Sweep::Threads(v) => v.len(),
            Sweep::SensitivePages(v) => v.len(),
            Sweep::Identifiers(v) => v.len(),
            Sweep::ControlData(v) => v.len(),
            Sweep::Redaction(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn default_modes() -> Vec<ProcessingChoice> {
    vec![ProcessingChoice::Concise, ProcessingChoice::Boolean]
}

fn default_repetitions() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("bench.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Dump parameters every sweep point starts from.
    pub base: DumpGenConfig,
    /// Mapping for every point except identifier sweeps; all built-ins
    /// direct when absent.
    #[serde(default)]
    pub mapping: Option<SensitivityMapping>,
    #[serde(default = "default_modes")]
    pub modes: Vec<ProcessingChoice>,
    pub sweeps: Vec<Sweep>,
    /// Runs per (point, mode); the fastest is reported.
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let err = |m: String| Err(EngineError::Config(format!("bench: {m}")));
        self.base.validate()?;
        if self.repetitions == 0 {
            return err("repetitions must be at least 1".into());
        }
        if self.modes.is_empty() || self.modes.contains(&ProcessingChoice::Dynamic) {
            return err("modes must be a non-empty list of concise/boolean".into());
        }
        for s in &self.sweeps {
            if s.is_empty() {
                return err(format!("sweep `{}` has no values", s.factor()));
            }
            let bad = match s {
                Sweep::SizeMib(v) => v.contains(&0),
                Sweep::Threads(v) => v.contains(&0),
                Sweep::Identifiers(v) => v.iter().any(|&k| k == 0 || k > BUILTIN_ENTITIES.len()),
                Sweep::SensitivePages(v) | Sweep::ControlData(v) => v.iter().any(|x| !(0.0..=1.0).contains(x)),
                Sweep::Redaction(_) => false,
            };
            if bad {
                return err(format!("sweep `{}` has an out-of-range value", s.factor()));
            }
        }
        Ok(())
    }

    /// Number of rows the plan produces.
    pub fn row_count(&self) -> usize {
        self.sweeps.iter().map(Sweep::len).sum::<usize>() * self.modes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub factor: String,
    pub value: String,
    pub mode: String,
    pub seconds: f64,
}

/// One sweep point: the dump to generate and how to analyze it.
#[derive(Debug, Clone)]
pub struct BenchPoint {
    pub value: String,
    pub dump: DumpGenConfig,
    pub mapping: SensitivityMapping,
    pub settings: AnalyzeSettings,
}

/// Mapping with the first `k` built-in entity types directly sensitive.
pub fn first_identifiers(k: usize) -> SensitivityMapping {
    SensitivityMapping {
        direct: BUILTIN_ENTITIES[..k].iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x}")
}

/// Expands a sweep into its points.
pub fn sweep_points(cfg: &BenchConfig, sweep: &Sweep, base: &AnalyzeSettings) -> Vec<BenchPoint> {
    let mapping = cfg.mapping.clone().unwrap_or_else(SensitivityMapping::all_builtins_direct);
    let point = |value: String, f: &dyn Fn(&mut DumpGenConfig, &mut SensitivityMapping, &mut AnalyzeSettings)| {
        let mut p = BenchPoint {
            value,
            dump: cfg.base.clone(),
            mapping: mapping.clone(),
            settings: base.clone(),
        };
        f(&mut p.dump, &mut p.mapping, &mut p.settings);
        p
    };
    match sweep {
        Sweep::SizeMib(v) => v
            .iter()
            .map(|&m| point(m.to_string(), &|d, _, _| d.total_size = m * MIB))
            .collect(),
        Sweep::Threads(v) => v
            .iter()
            .map(|&t| point(t.to_string(), &|_, _, s| s.threads = t))
            .collect(),
        Sweep::SensitivePages(v) => v
            .iter()
            .map(|&x| point(fmt_f(x), &|d, _, _| d.pct_sensitive_pages = x))
            .collect(),
        Sweep::ControlData(v) => v
            .iter()
            .map(|&x| point(fmt_f(x), &|d, _, _| d.pct_control_data = x))
            .collect(),
        Sweep::Identifiers(v) => v
            .iter()
            .map(|&k| point(k.to_string(), &|_, m, _| *m = first_identifiers(k)))
            .collect(),
        Sweep::Redaction(v) => v
            .iter()
            .map(|&r| {
                point(r.name().to_string(), &|_, _, s| {
                    let p = &mut s.redaction;
                    match r {
                        RedactionVariant::Overwrite => p.method = RedactionMethod::Overwrite,
                        RedactionVariant::Sha256Fit => {
                            p.method = RedactionMethod::Hash;
                            p.hash_algo = HashAlgo::Sha256;
                            p.hash_length_policy = HashLengthPolicy::Fit;
                        }
                        RedactionVariant::Ff1 => {
                            p.method = RedactionMethod::Encrypt;
                            p.encrypt_scheme = EncryptScheme::FpeFf1;
                        }
                    }
                })
            })
            .collect(),
    }
}

/// Key used for encrypted bench points; bench output is discarded.
pub fn bench_key() -> RunKey {
    RunKey::derive(b"bench", None)
}

/// Best-of-`repetitions` wall time of one analyze run.
pub fn time_analyze(
    dump: &[u8],
    kb: &KnowledgeBase,
    mapping: &SensitivityMapping,
    settings: &AnalyzeSettings,
    repetitions: usize,
) -> Result<f64, EngineError> {
    let key = bench_key();
    let mut best = f64::INFINITY;
    for _ in 0..repetitions.max(1) {
        let t = Instant::now();
        let a = analyze_bytes(dump, kb, mapping, settings, Some(&key))?;
        best = best.min(t.elapsed().as_secs_f64());
        drop(a);
    }
    Ok(best)
}

/// Runs every sweep point in every mode. `on_row` sees rows as they finish.
pub fn run_bench(
    cfg: &BenchConfig,
    base: &AnalyzeSettings,
    mut on_row: impl FnMut(&BenchRow),
) -> Result<Vec<BenchRow>, EngineError> {
    cfg.validate()?;
    let kb = KnowledgeBase::builtin();
    let mut rows = Vec::with_capacity(cfg.row_count());
    for sweep in &cfg.sweeps {
        for p in sweep_points(cfg, sweep, base) {
            let (dump, _) = crate::dumpgen::generate_dump(&p.dump)?;
            for &mode in &cfg.modes {
                let settings = AnalyzeSettings {
                    processing: mode,
                    ..p.settings.clone()
                };
                let seconds = time_analyze(&dump, &kb, &p.mapping, &settings, cfg.repetitions)?;
                let row = BenchRow {
                    factor: sweep.factor().to_string(),
                    value: p.value.clone(),
                    mode: format!("{mode:?}").to_lowercase(),
                    seconds,
                };
                on_row(&row);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

pub fn write_bench_csv(path: &Path, rows: &[BenchRow]) -> Result<(), EngineError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| EngineError::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| EngineError::Config(e.to_string()))?;
    std::fs::write(path, bytes).map_err(|e| EngineError::io(path, e))
}

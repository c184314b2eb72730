//! Synthetic memory dumps with planted sensitive tokens and a ground-truth
//! manifest.
//!
//! Pages are laid out in the format [`crate::parser`] reads. Page `i`
//! belongs to address space `i % groups` so groups interleave across the
//! file, and every payload is filled to capacity.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::Encoding;
use crate::kb::builtin::{
    BUILTIN_ENTITIES, CREDIT_CARD, EMAIL, GENDER, IPV4, PERSON_NAME, PERSON_NAMES, PHONE_US, SSN,
    ZIPCODE,
};
use crate::kb::luhn_check_digit;
use crate::parser::{PageHeader, PAGE_SIZE, PAYLOAD_CAPACITY};

/// Pages per address-space group.
pub const PAGES_PER_GROUP: usize = 16;
pub const MANIFEST_HEADER: [&str; 5] = ["page_index", "byte_offset", "byte_len", "entity_type", "plaintext"];

const MIN_CONTROL_RUN: usize = 4;
const MAX_CONTROL_RUN: usize = 64;

/// Vocabulary for non-sensitive filler. No entry is a name, a gender term
/// or matches any built-in pattern.
pub const FILLER_WORDS: &[&str] = &[
    "buffer", "kernel", "stack", "thread", "module", "offset", "region", "handler", "queue",
    "status", "control", "block", "segment", "entry", "device", "driver", "cache", "index",
    "record", "signal", "timer", "vector", "table", "mutex", "socket", "channel", "cursor",
    "packet", "header", "opcode", "symbol", "sector", "volume", "system", "task", "job", "step",
    "pool", "lock", "page", "data", "node", "link", "slot", "trace", "event", "error", "return",
    "value", "state", "flag", "level", "ABEND", "R15", "PSW", "SVC13", "CSECT", "0x7f3a",
    "retry", "commit", "rollback", "storage", "address", "space", "dispatch", "batch", "dataset",
    "member", "library", "catalog", "extent", "track", "cylinder", "region.size", "io-wait",
    "cpu_time", "alloc", "free", "map", "unmap", "read", "write", "open", "close", "sync",
];

const EMAIL_DOMAINS: &[&str] = &["example", "mailhost", "corpnet", "acme-mail", "postbox"];
const EMAIL_TLDS: &[&str] = &["com", "org", "net", "io"];
const GENDER_PLANTS: &[&str] = &["male", "female", "nonbinary", "non-binary", "transgender"];

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("total_size {0} overflows the address space")]
    Overflow(u64),
    #[error("manifest: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest line {line}: {reason}")]
    Manifest { line: u64, reason: String },
    #[error("io on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> GenError {
    GenError::Invalid {
        field,
        reason: reason.into(),
    }
}

fn default_mix() -> BTreeMap<String, f64> {
    BUILTIN_ENTITIES.iter().map(|e| (e.to_string(), 1.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpGenConfig {
    pub total_size: u64,
    pub pct_sensitive_pages: f64,
    pub pct_sensitive_per_page: f64,
    pub pct_control_data: f64,
    #[serde(default)]
    pub encoding: Encoding,
    /// Entity type to relative weight.
    #[serde(default = "default_mix")]
    pub entity_mix: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
    /// Groups of entities planted side by side whenever one member is drawn
    /// and every member is in `entity_mix`.
    #[serde(default)]
    pub quasi_groups: Vec<Vec<String>>,
}

impl Default for DumpGenConfig {
    fn default() -> Self {
        DumpGenConfig {
            total_size: 1 << 20,
            pct_sensitive_pages: 0.1,
            pct_sensitive_per_page: 0.01,
            pct_control_data: 0.1,
            encoding: Encoding::Ascii,
            entity_mix: default_mix(),
            seed: 0,
            quasi_groups: Vec::new(),
        }
    }
}

impl DumpGenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.total_size < PAGE_SIZE as u64 || !self.total_size.is_multiple_of(PAGE_SIZE as u64) {
            return Err(invalid(
                "total_size",
                format!("{} is not a positive multiple of {PAGE_SIZE}", self.total_size),
            ));
        }
        if usize::try_from(self.total_size).is_err() {
            return Err(GenError::Overflow(self.total_size));
        }
        for (field, v) in [
            ("pct_sensitive_pages", self.pct_sensitive_pages),
            ("pct_sensitive_per_page", self.pct_sensitive_per_page),
            ("pct_control_data", self.pct_control_data),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(field, format!("{v} outside [0, 1]")));
            }
        }
        if self.pct_sensitive_per_page + self.pct_control_data > 1.0 + 1e-9 {
            return Err(invalid(
                "pct_control_data",
                "pct_sensitive_per_page + pct_control_data exceeds 1",
            ));
        }
        if self.pct_sensitive_pages > 0.0 {
            if self.entity_mix.is_empty() || self.entity_mix.values().all(|&w| w <= 0.0) {
                return Err(invalid("entity_mix", "no entity type with positive weight"));
            }
            if let Some(e) = self.entity_mix.keys().find(|e| !BUILTIN_ENTITIES.contains(&e.as_str())) {
                return Err(invalid("entity_mix", format!("no constructor for `{e}`")));
            }
            if let Some((e, w)) = self.entity_mix.iter().find(|(_, w)| !w.is_finite() || **w < 0.0) {
                return Err(invalid("entity_mix", format!("weight {w} for `{e}`")));
            }
        }
        Ok(())
    }

    pub fn page_count(&self) -> usize {
        (self.total_size / PAGE_SIZE as u64) as usize
    }

    pub fn sensitive_page_count(&self) -> usize {
        let n = self.page_count();
        ((self.pct_sensitive_pages * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub page_index: usize,
    pub byte_offset: usize,
    pub byte_len: usize,
    pub entity_type: String,
    pub plaintext: String,
}

fn digits(rng: &mut impl Rng, n: usize) -> String {
    (0..n).map(|_| char::from(b'0' + rng.random_range(0..10u8))).collect()
}

/// A fresh token of `entity` that the matching built-in identifier accepts.
pub fn plant_token(entity: &str, rng: &mut impl Rng) -> String {
    match entity {
        CREDIT_CARD => {
            let payload = format!("4{}", digits(rng, 14));
            let values: Vec<u8> = payload.bytes().map(|b| b - b'0').collect();
            let full = format!("{payload}{}", luhn_check_digit(&values));
            if rng.random_bool(0.3) {
                let b = full.as_bytes();
                (0..4)
                    .map(|i| std::str::from_utf8(&b[i * 4..i * 4 + 4]).unwrap())
                    .collect::<Vec<_>>()
                    .join("-")
            } else {
                full
            }
        }
        SSN => {
            let area = loop {
                let a = rng.random_range(1..900u32);
                if a != 666 {
                    break a;
                }
            };
            format!(
                "{area:03}-{:02}-{:04}",
                rng.random_range(1..100u32),
                rng.random_range(1..10_000u32)
            )
        }
        EMAIL => {
            let local: String = (0..rng.random_range(3..9))
                .map(|_| char::from(b'a' + rng.random_range(0..26u8)))
                .collect();
            format!(
                "{local}{}@{}.{}",
                rng.random_range(0..100u32),
                EMAIL_DOMAINS.choose(rng).unwrap(),
                EMAIL_TLDS.choose(rng).unwrap()
            )
        }
        PHONE_US => {
            let sep = if rng.random_bool(0.5) { '-' } else { '.' };
            let prefix = if rng.random_bool(0.2) { format!("1{sep}") } else { String::new() };
            format!(
                "{prefix}{}{}{sep}{}{}{sep}{}",
                rng.random_range(2..10u32),
                digits(rng, 2),
                rng.random_range(2..10u32),
                digits(rng, 2),
                digits(rng, 4)
            )
        }
        IPV4 => (0..4)
            .map(|_| rng.random_range(1..255u32).to_string())
            .collect::<Vec<_>>()
            .join("."),
        ZIPCODE => digits(rng, 5),
        GENDER => {
            let t = GENDER_PLANTS.choose(rng).unwrap();
            if rng.random_bool(0.5) {
                capitalize(t)
            } else {
                t.to_string()
            }
        }
        PERSON_NAME => capitalize(PERSON_NAMES.choose(rng).unwrap()),
        other => panic!("no constructor for entity type {other}"),
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
        None => String::new(),
    }
}

enum Item {
    Text(String),
    Plant(String, String),
    Control(usize),
}

struct Generator<'a> {
    cfg: &'a DumpGenConfig,
    rng: ChaCha8Rng,
    mix: Vec<&'a str>,
    weights: Option<WeightedIndex<f64>>,
    control_bytes: Vec<u8>,
}

impl<'a> Generator<'a> {
    fn new(cfg: &'a DumpGenConfig) -> Self {
        let mix: Vec<&str> = cfg
            .entity_mix
            .iter()
            .filter(|(_, &w)| w > 0.0)
            .map(|(e, _)| e.as_str())
            .collect();
        let weights = WeightedIndex::new(mix.iter().map(|e| cfg.entity_mix[*e])).ok();
        let classes = cfg.encoding.classes();
        Generator {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            mix,
            weights,
            control_bytes: (0..=255u8).filter(|&b| classes.class(b) == 0).collect(),
        }
    }

    fn draw_plants(&mut self) -> Vec<(String, String)> {
        let w = self.weights.as_ref().expect("validated entity mix");
        let entity = self.mix[w.sample(&mut self.rng)];
        let together = self.cfg.quasi_groups.iter().find(|g| {
            g.iter().any(|e| e == entity) && g.iter().all(|e| self.cfg.entity_mix.get(e).is_some_and(|&w| w > 0.0))
        });
        let entities: Vec<String> = match together {
            Some(g) => g.clone(),
            None => vec![entity.to_string()],
        };
        entities
            .into_iter()
            .map(|e| {
                let t = plant_token(&e, &mut self.rng);
                (e, t)
            })
            .collect()
    }

    fn push_text(&self, ascii: &[u8], out: &mut Vec<u8>) {
        self.cfg
            .encoding
            .encode_into(ascii, out)
            .expect("generator text is printable ASCII");
    }

    /// Fills one payload and returns its plants as (offset, entity, text).
    fn fill_payload(&mut self, sensitive: bool, out: &mut Vec<u8>) -> Vec<(usize, String, String)> {
        let cap = PAYLOAD_CAPACITY;
        let mut items: Vec<Item> = Vec::new();
        let mut used = 0usize;
        if sensitive {
            let target = ((self.cfg.pct_sensitive_per_page * cap as f64).round() as usize).max(1);
            let mut planted = 0;
            while planted < target {
                let plants = self.draw_plants();
                let len: usize = plants.iter().map(|(_, t)| t.len() + 1).sum();
                if planted > 0 && used + len > cap {
                    break;
                }
                planted += len;
                used += len;
                items.extend(plants.into_iter().map(|(e, t)| Item::Plant(e, t)));
            }
        }
        let mut control = ((self.cfg.pct_control_data * cap as f64).round() as usize).min(cap - used);
        while control > 0 {
            let mut run = self.rng.random_range(MIN_CONTROL_RUN..=MAX_CONTROL_RUN).min(control);
            if control - run > 0 && control - run < MIN_CONTROL_RUN {
                run = control;
            }
            items.push(Item::Control(run));
            used += run;
            control -= run;
        }
        let mut free = cap - used;
        let mut words = Vec::new();
        loop {
            let w = FILLER_WORDS.choose(&mut self.rng).unwrap();
            if w.len() + 1 > free {
                break;
            }
            free -= w.len() + 1;
            words.push(Item::Text(w.to_string()));
        }
        // Interleave the fixed items among the filler words.
        let n = items.len() + words.len();
        let mut slots: Vec<bool> = vec![false; n];
        for i in rand::seq::index::sample(&mut self.rng, n, items.len()) {
            slots[i] = true;
        }
        let mut items = items.into_iter();
        let mut words = words.into_iter();
        let mut text = Vec::with_capacity(cap);
        let mut plants = Vec::new();
        for is_item in slots {
            match if is_item { items.next() } else { words.next() }.unwrap() {
                Item::Text(w) => {
                    self.push_text(w.as_bytes(), &mut text);
                    self.push_text(b" ", &mut text);
                }
                Item::Plant(e, t) => {
                    plants.push((text.len(), e, t.clone()));
                    self.push_text(t.as_bytes(), &mut text);
                    self.push_text(b" ", &mut text);
                }
                Item::Control(len) => {
                    text.extend((0..len).map(|_| *self.control_bytes.choose(&mut self.rng).unwrap()));
                }
            }
        }
        while text.len() < cap {
            self.push_text(b" ", &mut text);
        }
        out.extend_from_slice(&text);
        plants
    }
}

/// Generates a dump and its ground-truth manifest, sorted by page and offset.
pub fn generate_dump(cfg: &DumpGenConfig) -> Result<(Vec<u8>, Vec<GroundTruthEntry>), GenError> {
    cfg.validate()?;
    let pages = cfg.page_count();
    let groups = pages.div_ceil(PAGES_PER_GROUP);
    let mut gen = Generator::new(cfg);
    let mut sensitive = vec![false; pages];
    for i in rand::seq::index::sample(&mut gen.rng, pages, cfg.sensitive_page_count()) {
        sensitive[i] = true;
    }
    let mut dump = Vec::with_capacity(pages * PAGE_SIZE);
    let mut manifest = Vec::new();
    let mut payload = Vec::with_capacity(PAYLOAD_CAPACITY);
    for (i, &is_sensitive) in sensitive.iter().enumerate() {
        let asid = (i % groups) as u32;
        let address = 0x1000_0000u64 + (i / groups) as u64 * PAGE_SIZE as u64;
        dump.extend_from_slice(&PageHeader::new(asid, address, PAYLOAD_CAPACITY as u16).encode());
        payload.clear();
        let plants = gen.fill_payload(is_sensitive, &mut payload);
        dump.extend_from_slice(&payload);
        manifest.extend(plants.into_iter().map(|(offset, entity, text)| GroundTruthEntry {
            page_index: i,
            byte_offset: offset,
            byte_len: text.len(),
            entity_type: entity,
            plaintext: text,
        }));
    }
    debug_assert_eq!(dump.len(), pages * PAGE_SIZE);
    Ok((dump, manifest))
}

pub fn render_manifest(manifest: &[GroundTruthEntry]) -> Result<Vec<u8>, GenError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(MANIFEST_HEADER)?;
    for e in manifest {
        w.serialize(e)?;
    }
    w.into_inner().map_err(|e| GenError::Io {
        path: "<memory>".into(),
        source: e.into_error(),
    })
}

pub fn write_manifest(path: &Path, manifest: &[GroundTruthEntry]) -> Result<(), GenError> {
    let body = render_manifest(manifest)?;
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&body))
        .map_err(|source| GenError::Io {
            path: path.display().to_string(),
            source,
        })
}

pub fn parse_manifest(bytes: &[u8]) -> Result<Vec<GroundTruthEntry>, GenError> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes);
    let mut records = r.records();
    match records.next() {
        Some(Ok(h)) if h.iter().eq(MANIFEST_HEADER) => {}
        _ => {
            return Err(GenError::Manifest {
                line: 1,
                reason: format!("header must be {}", MANIFEST_HEADER.join(",")),
            })
        }
    }
    records
        .map(|rec| {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            rec.deserialize(None).map_err(|e| GenError::Manifest {
                line,
                reason: e.to_string(),
            })
        })
        .collect()
}

pub fn read_manifest(path: &Path) -> Result<Vec<GroundTruthEntry>, GenError> {
    let bytes = std::fs::read(path).map_err(|source| GenError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_manifest(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::HEADER_SIZE;
    use crate::kb::KnowledgeBase;
    use crate::parser::{parse_dump, PageHeader};
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};
    use sha2::{Digest, Sha256};

    fn small(seed: u64) -> DumpGenConfig {
        DumpGenConfig {
            total_size: 64 * PAGE_SIZE as u64,
            pct_sensitive_pages: 0.25,
            pct_sensitive_per_page: 0.02,
            pct_control_data: 0.2,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn one_mebibyte_is_256_pages() {
        let cfg = DumpGenConfig {
            total_size: 1 << 20,
            ..Default::default()
        };
        let (dump, _) = generate_dump(&cfg).unwrap();
        assert_eq!(dump.len() / PAGE_SIZE, 256);
        assert_eq!(cfg.page_count(), 256);
    }

    #[test]
    fn no_sensitive_pages_means_empty_manifest() {
        let cfg = DumpGenConfig {
            pct_sensitive_pages: 0.0,
            ..small(1)
        };
        let (dump, manifest) = generate_dump(&cfg).unwrap();
        assert!(manifest.is_empty());
        let kb = KnowledgeBase::builtin();
        for g in parse_dump(&dump, Encoding::Ascii).unwrap() {
            for t in g.tokens {
                assert!(FILLER_WORDS.contains(&t.text.as_str()), "{}", t.text);
                for id in kb.all_identifiers() {
                    assert!(!id.matches(t.text.as_bytes()), "{} matched {}", t.text, id.name());
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_dump(&small(42)).unwrap();
        let b = generate_dump(&small(42)).unwrap();
        assert_eq!(Sha256::digest(&a.0), Sha256::digest(&b.0));
        assert_eq!(a.1, b.1);
        let c = generate_dump(&small(43)).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            DumpGenConfig { total_size: 100, ..small(0) },
            DumpGenConfig { total_size: 0, ..small(0) },
            DumpGenConfig { pct_control_data: 1.5, ..small(0) },
            DumpGenConfig { pct_sensitive_per_page: 0.6, pct_control_data: 0.6, ..small(0) },
            DumpGenConfig {
                entity_mix: [("NOPE".to_string(), 1.0)].into(),
                ..small(0)
            },
        ];
        for cfg in bad {
            assert!(matches!(generate_dump(&cfg), Err(GenError::Invalid { .. })), "{cfg:?}");
        }
    }

    fn check_dump(cfg: &DumpGenConfig) {
        let (dump, manifest) = generate_dump(cfg).unwrap();
        let kb = KnowledgeBase::builtin();
        let pages = cfg.page_count();
        assert_eq!(dump.len(), pages * PAGE_SIZE);

        // Headers decode and groups interleave.
        for i in 0..pages {
            let h = PageHeader::decode(&dump[i * PAGE_SIZE..(i + 1) * PAGE_SIZE], i).unwrap();
            assert_eq!(h.data_len as usize, PAYLOAD_CAPACITY);
        }

        // Sorted manifest, extents inside payloads, plant soundness.
        let keys: Vec<_> = manifest.iter().map(|e| (e.page_index, e.byte_offset)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        for e in &manifest {
            assert!(e.byte_offset + e.byte_len <= PAYLOAD_CAPACITY);
            let start = e.page_index * PAGE_SIZE + HEADER_SIZE + e.byte_offset;
            let raw = &dump[start..start + e.byte_len];
            assert_eq!(cfg.encoding.decode_graphic(raw).unwrap(), e.plaintext);
            assert!(kb.get(&e.entity_type).unwrap().matches(e.plaintext.as_bytes()));
        }

        // Ratio fidelity.
        let with_plants: std::collections::BTreeSet<_> = manifest.iter().map(|e| e.page_index).collect();
        let want = cfg.sensitive_page_count();
        assert!(with_plants.len().abs_diff(want) <= 1, "{} vs {want}", with_plants.len());
        let classes = cfg.encoding.classes();
        let control = (0..pages)
            .flat_map(|i| &dump[i * PAGE_SIZE + HEADER_SIZE..(i + 1) * PAGE_SIZE])
            .filter(|&&b| classes.class(b) == 0)
            .count();
        let realized = control as f64 / (pages * PAYLOAD_CAPACITY) as f64;
        assert!((realized - cfg.pct_control_data).abs() <= 0.02, "{realized}");

        // Parse compatibility.
        let tokens: std::collections::HashSet<(usize, usize, String)> = parse_dump(&dump, cfg.encoding)
            .unwrap()
            .into_iter()
            .flat_map(|g| g.tokens)
            .map(|t| (t.page_index, t.byte_offset, t.text))
            .collect();
        for e in &manifest {
            assert!(tokens.contains(&(e.page_index, e.byte_offset, e.plaintext.clone())), "{e:?}");
        }
    }

    #[test]
    fn ascii_dump_properties() {
        check_dump(&small(7));
    }

    #[test]
    fn ebcdic_dump_properties() {
        check_dump(&DumpGenConfig {
            encoding: Encoding::Ebcdic037,
            ..small(8)
        });
    }

    #[test]
    fn quasi_groups_plant_together() {
        let cfg = DumpGenConfig {
            entity_mix: [(ZIPCODE.to_string(), 1.0), (GENDER.to_string(), 1.0)].into(),
            quasi_groups: vec![vec![ZIPCODE.into(), GENDER.into()]],
            ..small(9)
        };
        let (_, manifest) = generate_dump(&cfg).unwrap();
        let zips = manifest.iter().filter(|e| e.entity_type == ZIPCODE).count();
        let genders = manifest.iter().filter(|e| e.entity_type == GENDER).count();
        assert_eq!(zips, genders);
    }

    #[test]
    fn manifest_csv_shapes() {
        assert_eq!(render_manifest(&[]).unwrap(), b"page_index,byte_offset,byte_len,entity_type,plaintext\n");
        let one = GroundTruthEntry {
            page_index: 0,
            byte_offset: 64,
            byte_len: 16,
            entity_type: CREDIT_CARD.into(),
            plaintext: "4539578763621486".into(),
        };
        let body = String::from_utf8(render_manifest(std::slice::from_ref(&one)).unwrap()).unwrap();
        assert_eq!(body.lines().count(), 2);
        assert_eq!(parse_manifest(body.as_bytes()).unwrap(), vec![one]);
        assert!(matches!(parse_manifest(b"a,b\n"), Err(GenError::Manifest { line: 1, .. })));
    }

    #[test]
    fn manifest_file_roundtrip_1000() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let entries: Vec<GroundTruthEntry> = (0..1000)
            .map(|i| {
                let e = BUILTIN_ENTITIES[i % BUILTIN_ENTITIES.len()];
                let plaintext = plant_token(e, &mut rng);
                GroundTruthEntry {
                    page_index: rng.random_range(0..1 << 20),
                    byte_offset: rng.random_range(0..PAYLOAD_CAPACITY),
                    byte_len: plaintext.len(),
                    entity_type: e.into(),
                    plaintext: if i % 7 == 0 { format!("{plaintext},\"x\"") } else { plaintext },
                }
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_manifest(&path, &entries).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), entries);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn plants_are_sound(seed in any::<u64>(), which in 0usize..8) {
            let kb = KnowledgeBase::builtin();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = BUILTIN_ENTITIES[which];
            let t = plant_token(e, &mut rng);
            prop_assert!(kb.get(e).unwrap().matches(t.as_bytes()), "{} {}", e, t);
            for other in BUILTIN_ENTITIES.iter().filter(|&&o| o != e) {
                prop_assert!(!kb.get(other).unwrap().matches(t.as_bytes()), "{} also {}", t, other);
            }
        }

        #[test]
        fn generated_dumps_hold_invariants(seed in any::<u64>(), pct in 0.0f64..1.0, ctl in 0.0f64..0.8) {
            check_dump(&DumpGenConfig {
                total_size: 16 * PAGE_SIZE as u64,
                pct_sensitive_pages: pct,
                pct_sensitive_per_page: 0.01,
                pct_control_data: ctl,
                seed,
                ..Default::default()
            });
        }
    }
}

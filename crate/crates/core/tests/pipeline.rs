mod common;

use common::*;
use dumpscrub::classifier::{process_unit, Options, Plan, ProcessingMode, UnitSpec, VicinityUnit};
use dumpscrub::dumpgen::DumpGenConfig;
use dumpscrub::engine::{AnalyzeSettings, ProcessingChoice};
use dumpscrub::encoding::Encoding;
use dumpscrub::kb::{KnowledgeBase, QuasiGroup, SensitivityMapping, BUILTIN_ENTITIES};
use dumpscrub::parser::{InputKind, Layout, HEADER_SIZE, PAGE_SIZE};
use dumpscrub::redactor::{EncryptScheme, RedactionMethod};
use proptest::prelude::*;

const MIB: u64 = 1 << 20;

#[test]
fn empty_mapping_leaves_input_unchanged() {
    let (dump, _) = generate(&dump_config(MIB, 0.5, 11));
    let a = analyze(&dump, &SensitivityMapping::default(), &AnalyzeSettings::default());
    assert_eq!(a.output, dump);
    assert!(a.reports.sensitive.is_empty());
    assert_eq!(a.stats.sensitive_findings(), 0);
}

#[test]
fn rescan_of_redacted_output_is_clean() {
    let (dump, manifest) = generate(&dump_config(MIB, 0.1, 3));
    assert!(!manifest.is_empty());
    let mapping = SensitivityMapping::all_builtins_direct();
    let settings = AnalyzeSettings::default();
    let first = analyze(&dump, &mapping, &settings);
    assert!(first.stats.sensitive_findings() > 0);
    let second = analyze(&first.output, &mapping, &settings);
    assert_eq!(second.stats.sensitive_findings(), 0, "{:?}", second.stats.sensitive_by_entity);
}

#[test]
fn headers_survive_redaction() {
    let (dump, _) = generate(&dump_config(MIB, 1.0, 5));
    for processing in [ProcessingChoice::Concise, ProcessingChoice::Boolean] {
        let settings = AnalyzeSettings {
            processing,
            ..Default::default()
        };
        let a = analyze(&dump, &SensitivityMapping::all_builtins_direct(), &settings);
        assert_eq!(a.output.len(), dump.len());
        for (o, i) in a.output.chunks(PAGE_SIZE).zip(dump.chunks(PAGE_SIZE)) {
            assert_eq!(o[..HEADER_SIZE], i[..HEADER_SIZE]);
        }
        assert_ne!(a.output, dump);
    }
}

#[test]
fn ground_truth_recall_and_precision() {
    for seed in 0..3 {
        let (dump, manifest) = generate(&dump_config(MIB, 0.3, seed));
        let a = analyze(&dump, &SensitivityMapping::all_builtins_direct(), &AnalyzeSettings::default());
        let (recall, precision) = score(&a, &manifest);
        assert_eq!(recall, 1.0, "seed {seed}");
        assert!(precision >= 0.99, "seed {seed}: precision {precision}");
    }
}

#[test]
fn one_and_sixteen_threads_agree() {
    let cfg = DumpGenConfig {
        quasi_groups: vec![vec!["ZIPCODE".into(), "GENDER".into()]],
        ..dump_config(2 * MIB, 0.4, 21)
    };
    let (dump, _) = generate(&cfg);
    let mapping = SensitivityMapping {
        direct: vec!["EMAIL".into(), "SSN".into()],
        quasi: vec![QuasiGroup {
            entities: vec!["ZIPCODE".into(), "GENDER".into()],
            vicinity: 30,
        }],
        ..Default::default()
    };
    for processing in [ProcessingChoice::Concise, ProcessingChoice::Boolean] {
        let run = |threads| {
            let settings = AnalyzeSettings {
                threads,
                processing,
                chunk_pages: 4,
                ..Default::default()
            };
            analyze(&dump, &mapping, &settings)
        };
        let (a, b) = (run(1), run(16));
        assert_eq!(a.output, b.output);
        assert_eq!(a.reports, b.reports);
        assert_eq!(a.stats.counts_only(), b.stats.counts_only());
    }
}

#[test]
fn bytes_classified_shrink_with_cheaper_modes() {
    let (dump, _) = generate(&dump_config(2 * MIB, 0.5, 8));
    let mapping = SensitivityMapping::all_builtins_direct();
    let run = |processing, time_budget| {
        let settings = AnalyzeSettings {
            processing,
            time_budget,
            chunk_pages: 1,
            ..Default::default()
        };
        analyze(&dump, &mapping, &settings).stats
    };
    let concise = run(ProcessingChoice::Concise, None);
    let boolean = run(ProcessingChoice::Boolean, None);
    // A budget far below any achievable time forces skip mode.
    let forced = run(ProcessingChoice::Dynamic, Some(1e-9));
    assert!(forced.units_by_mode.get("skip").copied().unwrap_or(0) > 0);
    assert!(forced.bytes_classified < concise.bytes_classified);
    assert!(boolean.bytes_classified < concise.bytes_classified);
}

#[test]
fn forced_skip_still_redacts_every_payload() {
    let (dump, _) = generate(&dump_config(MIB, 0.1, 2));
    let settings = AnalyzeSettings {
        processing: ProcessingChoice::Dynamic,
        time_budget: Some(1e-9),
        chunk_pages: 1,
        ..Default::default()
    };
    let a = analyze(&dump, &SensitivityMapping::all_builtins_direct(), &settings);
    let path: Vec<_> = a.stats.mode_transitions.iter().map(|t| (t.from.name(), t.to.name())).collect();
    assert_eq!(path, [("concise", "boolean"), ("boolean", "skip")]);
    let rescan = analyze(&a.output, &SensitivityMapping::all_builtins_direct(), &AnalyzeSettings::default());
    assert_eq!(rescan.stats.sensitive_findings(), 0);
}

#[test]
fn ff1_output_keeps_length_and_decrypts_back() {
    let (dump, manifest) = generate(&dump_config(MIB, 0.2, 9));
    let mut settings = AnalyzeSettings::default();
    settings.redaction.method = RedactionMethod::Encrypt;
    settings.redaction.encrypt_scheme = EncryptScheme::FpeFf1;
    let a = analyze(&dump, &SensitivityMapping::all_builtins_direct(), &settings);
    assert_eq!(a.output.len(), dump.len());
    let key = test_key();
    for e in manifest.iter().take(200) {
        let off = planted_offset(e);
        let cipher = &a.output[off..off + e.byte_len];
        assert_ne!(cipher, e.plaintext.as_bytes());
        let plain = dumpscrub::redactor::decrypt_ff1_token(cipher, &key, &e.entity_type).unwrap();
        assert_eq!(plain, e.plaintext.as_bytes());
    }
}

#[test]
fn log_input_redacts_in_place() {
    let log = b"user alice@example.com logged in from 10.1.2.3\n\nssn 123-45-6789 on file\n";
    let settings = AnalyzeSettings {
        kind: InputKind::Log,
        ..Default::default()
    };
    let a = analyze(log, &SensitivityMapping::all_builtins_direct(), &settings);
    let out = String::from_utf8(a.output).unwrap();
    assert!(!out.contains("alice@example.com"));
    assert!(!out.contains("10.1.2.3"));
    assert!(!out.contains("123-45-6789"));
    assert!(out.starts_with("user "));
    assert_eq!(a.stats.sensitive_findings(), 3);
}

fn arb_mapping() -> impl Strategy<Value = SensitivityMapping> {
    (
        proptest::sample::subsequence(BUILTIN_ENTITIES.to_vec(), 0..=4),
        proptest::option::of((1usize..40, any::<bool>())),
    )
        .prop_map(|(direct, quasi)| {
            let rest: Vec<&str> = BUILTIN_ENTITIES.iter().copied().filter(|e| !direct.contains(e)).collect();
            let quasi = match quasi {
                Some((w, three)) if rest.len() >= 3 => {
                    let n = if three { 3 } else { 2 };
                    vec![QuasiGroup {
                        entities: rest[rest.len() - n..].iter().map(|s| s.to_string()).collect(),
                        vicinity: w,
                    }]
                }
                _ => Vec::new(),
            };
            SensitivityMapping {
                direct: direct.into_iter().map(String::from).collect(),
                quasi,
                ..Default::default()
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Each optimization toggle leaves the redacted output unchanged.
    #[test]
    fn optimizations_do_not_change_output(
        mapping in arb_mapping(),
        seed in any::<u64>(),
        pct in 0.0f64..1.0,
        boolean in any::<bool>(),
        pages in any::<bool>(),
        toggle in 0usize..4,
    ) {
        let quasi_groups = mapping.quasi.iter().map(|q| q.entities.clone()).collect();
        let cfg = DumpGenConfig { quasi_groups, ..dump_config(256 * 1024, pct, seed) };
        let (dump, _) = generate(&cfg);
        let base = AnalyzeSettings {
            processing: if boolean { ProcessingChoice::Boolean } else { ProcessingChoice::Concise },
            vicinity_unit: if pages { VicinityUnit::Pages } else { VicinityUnit::Tokens },
            chunk_pages: 8,
            ..Default::default()
        };
        let options = match toggle {
            0 => Options { min_identifiers: false, ..Options::default() },
            1 => Options { quasi_skip: false, ..Options::default() },
            2 => Options { mru: false, ..Options::default() },
            _ => Options { min_identifiers: false, quasi_skip: false, mru: false },
        };
        let on = analyze(&dump, &mapping, &base);
        let off = analyze(&dump, &mapping, &AnalyzeSettings { options, ..base.clone() });
        prop_assert!(on.output == off.output);
        prop_assert_eq!(on.reports.sensitive, off.reports.sensitive);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// Per work unit, cheaper modes never classify more bytes; thread count
    /// never changes the result.
    #[test]
    fn mode_monotonicity_and_thread_independence(
        seed in any::<u64>(),
        pct in 0.0f64..1.0,
        threads in 2usize..9,
    ) {
        let (dump, _) = generate(&dump_config(512 * 1024, pct, seed));
        let mapping = SensitivityMapping::all_builtins_direct();
        let kb = KnowledgeBase::builtin();
        let plan = Plan::new(&kb, &mapping, Options::default(), VicinityUnit::Tokens).unwrap();
        let layout = Layout::of_input(&dump, InputKind::Dump, Encoding::Ascii).unwrap();
        for g in &layout.groups {
            let unit = UnitSpec {
                group_id: g.group_id,
                segments: &g.segments,
                first_segment: 0,
                starts_group: true,
                ends_group: true,
            };
            let bytes = |mode| process_unit(&plan, &dump, Encoding::Ascii, unit, mode).bytes_classified;
            let (c, b, k) = (bytes(ProcessingMode::Concise), bytes(ProcessingMode::Boolean), bytes(ProcessingMode::Skip));
            prop_assert!(k <= b && b <= c, "skip {} boolean {} concise {}", k, b, c);
        }
        let run = |threads| {
            let settings = AnalyzeSettings { threads, ..Default::default() };
            analyze(&dump, &mapping, &settings)
        };
        let (one, many) = (run(1), run(threads));
        prop_assert!(one.output == many.output);
        prop_assert_eq!(one.reports, many.reports);
    }
}

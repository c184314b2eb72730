//! Output construction: splices replacements over sensitive extents and
//! leaves every other byte, including all page headers, untouched.

pub mod ff1;

use std::collections::BTreeMap;
use std::path::PathBuf;

use md5::Md5;
use serde::{Deserialize, Serialize};
use sha1::Sha1;
use sha2::{Digest, Sha256};

use crate::encoding::Encoding;
use crate::kb::builtin::{CREDIT_CARD, PHONE_US, SSN, ZIPCODE};
use crate::keys::{KeyError, RunKey};
use crate::parser::{tokenize_decoded, InputKind, TokenSpan};
pub use ff1::{Ff1, Ff1Error};

#[derive(Debug, thiserror::Error)]
pub enum RedactError {
    #[error("overwrite string must not be empty")]
    EmptyOverwrite,
    #[error("hash length policy `full` changes the file length and is only allowed for logs")]
    FullHashOnDump,
    #[error("AES changes the file length and is only allowed for logs")]
    AesOnDump,
    #[error("encryption requires key material (redaction.key_file)")]
    MissingKey,
    #[error("overwrite string {string:?} yields token {token:?} matched by identifier {identifier}")]
    OverwriteMatchesIdentifier {
        string: String,
        token: String,
        identifier: String,
    },
    #[error("extent {start}..{end} outside input of {len} bytes")]
    ExtentOutOfRange { start: usize, end: usize, len: usize },
    #[error("extents overlap at byte {0}")]
    Overlap(usize),
    #[error("replacement for extent at {offset} is not encodable in {encoding}")]
    Encoding { offset: usize, encoding: Encoding },
    #[error("token {0:?} contains characters outside the FF1 alphabet")]
    Alphabet(String),
    #[error("format-preserving encryption: {0}")]
    Ff1(#[from] Ff1Error),
    #[error(transparent)]
    Key(#[from] KeyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RedactionMethod {
    #[default]
    Overwrite,
    Hash,
    Encrypt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HashAlgo {
    Md5,
    Sha1,
    #[default]
    Sha256,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HashLengthPolicy {
    Full,
    #[default]
    Fit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EncryptScheme {
    Aes,
    #[default]
    FpeFf1,
}

pub const DEFAULT_OVERWRITE: &str = "This data has been redacted";

fn default_overwrite() -> String {
    DEFAULT_OVERWRITE.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedactionPolicy {
    #[serde(default)]
    pub method: RedactionMethod,
    #[serde(default = "default_overwrite")]
    pub overwrite_string: String,
    /// Per-entity overrides of `overwrite_string`.
    #[serde(default)]
    pub per_entity: BTreeMap<String, String>,
    #[serde(default)]
    pub hash_algo: HashAlgo,
    #[serde(default)]
    pub hash_length_policy: HashLengthPolicy,
    #[serde(default)]
    pub encrypt_scheme: EncryptScheme,
    /// File holding key material.
    #[serde(default)]
    pub key_file: Option<PathBuf>,
    /// Environment variable holding an optional passphrase.
    #[serde(default)]
    pub key_env: Option<String>,
}

impl Default for RedactionPolicy {
    fn default() -> Self {
        RedactionPolicy {
            method: RedactionMethod::Overwrite,
            overwrite_string: default_overwrite(),
            per_entity: BTreeMap::new(),
            hash_algo: HashAlgo::Sha256,
            hash_length_policy: HashLengthPolicy::Fit,
            encrypt_scheme: EncryptScheme::FpeFf1,
            key_file: None,
            key_env: None,
        }
    }
}

impl RedactionPolicy {
    pub fn overwrite_for(&self, entity: &str) -> &str {
        self.per_entity
            .get(entity)
            .map(String::as_str)
            .unwrap_or(&self.overwrite_string)
    }

    pub fn overwrite_strings(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.overwrite_string.as_str()).chain(self.per_entity.values().map(String::as_str))
    }

    /// Static checks that do not need identifiers or key material.
    pub fn validate(&self, kind: InputKind) -> Result<(), RedactError> {
        if self.overwrite_strings().any(str::is_empty) {
            return Err(RedactError::EmptyOverwrite);
        }
        if kind == InputKind::Dump {
            if self.method == RedactionMethod::Hash && self.hash_length_policy == HashLengthPolicy::Full {
                return Err(RedactError::FullHashOnDump);
            }
            if self.method == RedactionMethod::Encrypt && self.encrypt_scheme == EncryptScheme::Aes {
                return Err(RedactError::AesOnDump);
            }
        }
        Ok(())
    }
}

/// Replicates and truncates `overwrite` to exactly `plain_len` characters.
/// Multi-word strings are repeated with a single space between copies.
pub fn redact_overwrite(plain_len: usize, overwrite: &str) -> String {
    let sep = if overwrite.contains(' ') { " " } else { "" };
    if overwrite.is_ascii() && !overwrite.is_empty() {
        let unit = [overwrite, sep].concat();
        let mut s = unit.repeat(plain_len / unit.len() + 1);
        s.truncate(plain_len);
        return s;
    }
    overwrite.chars().chain(sep.chars()).cycle().take(plain_len).collect()
}

pub fn hex_digest(plain: &[u8], algo: HashAlgo) -> String {
    match algo {
        HashAlgo::Md5 => hex::encode(Md5::digest(plain)),
        HashAlgo::Sha1 => hex::encode(Sha1::digest(plain)),
        HashAlgo::Sha256 => hex::encode(Sha256::digest(plain)),
    }
}

/// Hex digest of `plain`, either full or fitted to the plaintext length.
pub fn redact_hash(
    plain: &[u8],
    algo: HashAlgo,
    policy: HashLengthPolicy,
    kind: InputKind,
) -> Result<String, RedactError> {
    let digest = hex_digest(plain, algo);
    match policy {
        HashLengthPolicy::Full if kind == InputKind::Dump => Err(RedactError::FullHashOnDump),
        HashLengthPolicy::Full => Ok(digest),
        HashLengthPolicy::Fit => Ok(redact_overwrite(plain.len(), &digest)),
    }
}

/// FF1 alphabet used for an entity type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpeAlphabet {
    /// Decimal digits; other characters are kept in place.
    Digits,
    /// The 94 printable ASCII characters `!`..=`~`.
    Printable94,
}

impl FpeAlphabet {
    pub fn for_entity(entity: &str) -> Self {
        match entity {
            CREDIT_CARD | SSN | ZIPCODE | PHONE_US => FpeAlphabet::Digits,
            _ => FpeAlphabet::Printable94,
        }
    }

    fn radix(self) -> u32 {
        match self {
            FpeAlphabet::Digits => 10,
            FpeAlphabet::Printable94 => 94,
        }
    }
}

fn ff1_token(key: &RunKey, entity: &str, plain: &[u8], decrypt: bool) -> Result<Vec<u8>, RedactError> {
    let alphabet = FpeAlphabet::for_entity(entity);
    let f = Ff1::new(key.bytes(), alphabet.radix())?;
    let tweak = entity.as_bytes();
    let run = |x: &[u16]| if decrypt { f.decrypt(tweak, x) } else { f.encrypt(tweak, x) };
    match alphabet {
        FpeAlphabet::Digits => {
            let positions: Vec<usize> = (0..plain.len()).filter(|&i| plain[i].is_ascii_digit()).collect();
            let numerals: Vec<u16> = positions.iter().map(|&i| (plain[i] - b'0') as u16).collect();
            let out = run(&numerals)?;
            let mut text = plain.to_vec();
            for (&i, d) in positions.iter().zip(out) {
                text[i] = b'0' + d as u8;
            }
            Ok(text)
        }
        FpeAlphabet::Printable94 => {
            if plain.iter().any(|c| !(0x21..=0x7E).contains(c)) {
                return Err(RedactError::Alphabet(String::from_utf8_lossy(plain).into_owned()));
            }
            let numerals: Vec<u16> = plain.iter().map(|&c| (c - 0x21) as u16).collect();
            Ok(run(&numerals)?.into_iter().map(|d| d as u8 + 0x21).collect())
        }
    }
}

/// Encrypts a token. FF1 preserves length and alphabet; AES yields the hex
/// encoding of `nonce || ciphertext` and is only valid for logs.
pub fn redact_encrypt(
    plain: &[u8],
    scheme: EncryptScheme,
    key: &RunKey,
    entity: &str,
    kind: InputKind,
) -> Result<Vec<u8>, RedactError> {
    match scheme {
        EncryptScheme::FpeFf1 => ff1_token(key, entity, plain, false),
        EncryptScheme::Aes if kind == InputKind::Dump => Err(RedactError::AesOnDump),
        EncryptScheme::Aes => Ok(hex::encode(key.seal_deterministic(plain)).into_bytes()),
    }
}

/// Inverse of FF1 token redaction.
pub fn decrypt_ff1_token(cipher: &[u8], key: &RunKey, entity: &str) -> Result<Vec<u8>, RedactError> {
    ff1_token(key, entity, cipher, true)
}

/// Inverse of AES token redaction.
pub fn decrypt_aes_token(cipher_hex: &[u8], key: &RunKey) -> Result<Vec<u8>, RedactError> {
    let sealed = hex::decode(cipher_hex).map_err(|_| RedactError::Alphabet(String::from_utf8_lossy(cipher_hex).into_owned()))?;
    Ok(key.open(&sealed)?)
}

/// What an extent covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtentKind {
    /// One token; `text` is its decoded form.
    Token { text: String },
    /// A whole payload region (boolean or skip groups); raw bytes.
    Region,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extent {
    pub start: usize,
    pub len: usize,
    pub entity: String,
    pub kind: ExtentKind,
}

/// Computes replacement bytes for extents under one policy.
pub struct Redactor<'a> {
    policy: &'a RedactionPolicy,
    key: Option<&'a RunKey>,
    kind: InputKind,
    encoding: Encoding,
}

impl<'a> Redactor<'a> {
    pub fn new(
        policy: &'a RedactionPolicy,
        key: Option<&'a RunKey>,
        kind: InputKind,
        encoding: Encoding,
    ) -> Result<Self, RedactError> {
        policy.validate(kind)?;
        if policy.method == RedactionMethod::Encrypt && key.is_none() {
            return Err(RedactError::MissingKey);
        }
        Ok(Redactor {
            policy,
            key,
            kind,
            encoding,
        })
    }

    fn encode(&self, text: &[u8], offset: usize) -> Result<Vec<u8>, RedactError> {
        self.encoding.encode(text).map_err(|_| RedactError::Encoding {
            offset,
            encoding: self.encoding,
        })
    }

    /// Replacement bytes (already in the input encoding) for one extent.
    pub fn replacement(&self, extent: &Extent, raw: &[u8]) -> Result<Vec<u8>, RedactError> {
        let p = self.policy;
        match (&extent.kind, p.method) {
            (_, RedactionMethod::Overwrite) => {
                let s = redact_overwrite(extent.len, p.overwrite_for(&extent.entity));
                self.encode(s.as_bytes(), extent.start)
            }
            (ExtentKind::Token { text }, RedactionMethod::Hash) => {
                let h = redact_hash(text.as_bytes(), p.hash_algo, p.hash_length_policy, self.kind)?;
                self.encode(h.as_bytes(), extent.start)
            }
            (ExtentKind::Region, RedactionMethod::Hash) => {
                let h = redact_hash(raw, p.hash_algo, HashLengthPolicy::Fit, self.kind)?;
                self.encode(h.as_bytes(), extent.start)
            }
            (ExtentKind::Token { text }, RedactionMethod::Encrypt) => {
                let key = self.key.ok_or(RedactError::MissingKey)?;
                let ct = redact_encrypt(text.as_bytes(), p.encrypt_scheme, key, &extent.entity, self.kind)?;
                self.encode(&ct, extent.start)
            }
            (ExtentKind::Region, RedactionMethod::Encrypt) => {
                // Whole regions hold arbitrary bytes: FF1 over radix 256,
                // applied to the raw bytes so no re-encoding is needed.
                let key = self.key.ok_or(RedactError::MissingKey)?;
                if raw.len() < 2 {
                    return Ok(redact_overwrite(raw.len(), p.overwrite_for(&extent.entity))
                        .into_bytes());
                }
                let f = Ff1::new(key.bytes(), 256)?;
                let x: Vec<u16> = raw.iter().map(|&b| b as u16).collect();
                Ok(f.encrypt(b"region", &x)?.into_iter().map(|d| d as u8).collect())
            }
        }
    }
}

/// Splices replacements for `extents` (sorted, non-overlapping) over `input`.
pub fn apply_redactions(
    input: &[u8],
    extents: &[Extent],
    redactor: &Redactor<'_>,
) -> Result<Vec<u8>, RedactError> {
    let mut prev_end = 0;
    for e in extents {
        if e.start + e.len > input.len() {
            return Err(RedactError::ExtentOutOfRange {
                start: e.start,
                end: e.start + e.len,
                len: input.len(),
            });
        }
        if e.start < prev_end {
            return Err(RedactError::Overlap(e.start));
        }
        prev_end = e.start + e.len;
    }
    let mut out = input.to_vec();
    let mut resized: Option<Vec<u8>> = None;
    let mut copied_to = 0;
    for e in extents {
        let raw = &input[e.start..e.start + e.len];
        let rep = redactor.replacement(e, raw)?;
        if resized.is_none() && rep.len() == e.len {
            out[e.start..e.start + e.len].copy_from_slice(&rep);
            continue;
        }
        // Length-changing replacement (logs only): switch to rebuilding.
        let buf = resized.get_or_insert_with(|| Vec::with_capacity(input.len() * 2));
        buf.extend_from_slice(&out[copied_to..e.start]);
        buf.extend_from_slice(&rep);
        copied_to = e.start + e.len;
    }
    match resized {
        Some(mut buf) => {
            buf.extend_from_slice(&out[copied_to..]);
            Ok(buf)
        }
        None => Ok(out),
    }
}

/// Every token a replicated/truncated overwrite string can produce, for
/// lengths up to `max_len`.
pub fn overwrite_tokens(overwrite: &str, max_len: usize) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    let mut spans: Vec<TokenSpan> = Vec::new();
    for len in 1..=max_len {
        let s = redact_overwrite(len, overwrite);
        let decoded: Vec<u8> = s
            .bytes()
            .map(|b| match b {
                0x21..=0x7E => b,
                b' ' | b'\t' => b' ',
                _ => 0,
            })
            .collect();
        spans.clear();
        tokenize_decoded(&decoded, &mut spans);
        for sp in &spans {
            let (o, l) = (sp.offset as usize, sp.len as usize);
            seen.insert(String::from_utf8(decoded[o..o + l].to_vec()).unwrap());
        }
    }
    seen.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overwrite_worked_example() {
        let address = "123 Dummy Street. Seattle, WA 98112";
        assert_eq!(
            redact_overwrite(address.len(), "This data has been redacted"),
            "This data has been redacted This da"
        );
        assert_eq!(redact_overwrite(1, "XY"), "X");
        assert_eq!(redact_overwrite(5, "ab"), "ababa");
        assert_eq!(redact_overwrite(7, "a b"), "a b a b");
        assert_eq!(redact_overwrite(4, "é"), "éééé");
    }

    #[test]
    fn overwrite_matches_char_cycle() {
        for s in ["X", "ab", "a b", "This data has been redacted"] {
            let sep = if s.contains(' ') { " " } else { "" };
            for len in 0..100 {
                let want: String = s.chars().chain(sep.chars()).cycle().take(len).collect();
                assert_eq!(redact_overwrite(len, s), want, "{s:?} len {len}");
            }
        }
    }

    #[test]
    fn hashes() {
        assert_eq!(hex_digest(b"", HashAlgo::Md5), "d41d8cd98f00b204e9800998ecf8427e");
        assert_eq!(hex_digest(b"abc", HashAlgo::Sha1), "a9993e364706816aba3e25717850c26c9cd0d89d");
        let fit = redact_hash(b"abcdefgh", HashAlgo::Sha256, HashLengthPolicy::Fit, InputKind::Dump).unwrap();
        assert_eq!(fit, "9c56cc51");
        assert_eq!(
            redact_hash(b"abc", HashAlgo::Sha256, HashLengthPolicy::Fit, InputKind::Dump).unwrap(),
            "ba7"
        );
        assert!(matches!(
            redact_hash(b"abc", HashAlgo::Sha256, HashLengthPolicy::Full, InputKind::Dump),
            Err(RedactError::FullHashOnDump)
        ));
        assert_eq!(
            redact_hash(b"abc", HashAlgo::Md5, HashLengthPolicy::Full, InputKind::Log)
                .unwrap()
                .len(),
            32
        );
    }

    #[test]
    fn ff1_tokens_roundtrip_and_preserve_shape() {
        let key = RunKey::derive(b"k", None);
        let ct = redact_encrypt(b"1234567890123456", EncryptScheme::FpeFf1, &key, CREDIT_CARD, InputKind::Dump).unwrap();
        assert_eq!(ct.len(), 16);
        assert!(ct.iter().all(u8::is_ascii_digit));
        assert_ne!(ct, b"1234567890123456");
        assert_eq!(decrypt_ff1_token(&ct, &key, CREDIT_CARD).unwrap(), b"1234567890123456");

        let ssn = redact_encrypt(b"123-45-6789", EncryptScheme::FpeFf1, &key, SSN, InputKind::Dump).unwrap();
        assert_eq!(ssn[3], b'-');
        assert_eq!(ssn[6], b'-');

        let email = redact_encrypt(b"a@b.co", EncryptScheme::FpeFf1, &key, "EMAIL", InputKind::Dump).unwrap();
        assert_eq!(email.len(), 6);
        assert_eq!(decrypt_ff1_token(&email, &key, "EMAIL").unwrap(), b"a@b.co");
    }

    #[test]
    fn aes_is_log_only_and_reversible() {
        let key = RunKey::derive(b"k", None);
        assert!(matches!(
            redact_encrypt(b"secret", EncryptScheme::Aes, &key, "X", InputKind::Dump),
            Err(RedactError::AesOnDump)
        ));
        let ct = redact_encrypt(b"secret", EncryptScheme::Aes, &key, "X", InputKind::Log).unwrap();
        assert!(ct.len() > 6);
        assert_eq!(decrypt_aes_token(&ct, &key).unwrap(), b"secret");
    }

    fn token_extent(start: usize, text: &str, entity: &str) -> Extent {
        Extent {
            start,
            len: text.len(),
            entity: entity.into(),
            kind: ExtentKind::Token { text: text.into() },
        }
    }

    #[test]
    fn splice_contract() {
        let policy = RedactionPolicy::default();
        let r = Redactor::new(&policy, None, InputKind::Dump, Encoding::Ascii).unwrap();
        let input = b"mail alice@example.com now";
        assert_eq!(apply_redactions(input, &[], &r).unwrap(), input);
        let out = apply_redactions(input, &[token_extent(5, "alice@example.com", "EMAIL")], &r).unwrap();
        assert_eq!(&out[..5], b"mail ");
        assert_eq!(&out[5..22], b"This data has bee");
        assert_eq!(&out[22..], b" now");
    }

    #[test]
    fn splice_errors() {
        let policy = RedactionPolicy::default();
        let r = Redactor::new(&policy, None, InputKind::Dump, Encoding::Ascii).unwrap();
        let input = b"0123456789";
        assert!(matches!(
            apply_redactions(input, &[token_extent(8, "89x", "E")], &r),
            Err(RedactError::ExtentOutOfRange { .. })
        ));
        assert!(matches!(
            apply_redactions(input, &[token_extent(0, "0123", "E"), token_extent(2, "23", "E")], &r),
            Err(RedactError::Overlap(2))
        ));
    }

    #[test]
    fn full_hash_grows_logs() {
        let policy = RedactionPolicy {
            method: RedactionMethod::Hash,
            hash_length_policy: HashLengthPolicy::Full,
            hash_algo: HashAlgo::Md5,
            ..Default::default()
        };
        assert!(Redactor::new(&policy, None, InputKind::Dump, Encoding::Ascii).is_err());
        let r = Redactor::new(&policy, None, InputKind::Log, Encoding::Ascii).unwrap();
        let out = apply_redactions(b"x ab y", &[token_extent(2, "ab", "E")], &r).unwrap();
        assert_eq!(out.len(), 6 - 2 + 32);
        assert!(out.starts_with(b"x "));
        assert!(out.ends_with(b" y"));
    }

    #[test]
    fn ebcdic_replacements_are_reencoded() {
        let policy = RedactionPolicy {
            overwrite_string: "XY".into(),
            ..Default::default()
        };
        let r = Redactor::new(&policy, None, InputKind::Dump, Encoding::Ebcdic037).unwrap();
        let out = apply_redactions(&[0x40; 4], &[token_extent(1, "ab", "E")], &r).unwrap();
        assert_eq!(out, vec![0x40, 0xE7, 0xE8, 0x40]);
    }

    #[test]
    fn policy_validation() {
        let mut p = RedactionPolicy::default();
        p.per_entity.insert("EMAIL".into(), String::new());
        assert!(matches!(p.validate(InputKind::Log), Err(RedactError::EmptyOverwrite)));
        let p = RedactionPolicy {
            method: RedactionMethod::Encrypt,
            encrypt_scheme: EncryptScheme::Aes,
            ..Default::default()
        };
        assert!(matches!(p.validate(InputKind::Dump), Err(RedactError::AesOnDump)));
        assert!(matches!(
            Redactor::new(&p, None, InputKind::Log, Encoding::Ascii),
            Err(RedactError::MissingKey)
        ));
    }

    #[test]
    fn overwrite_token_inventory() {
        let toks = overwrite_tokens("ab cd", 12);
        assert!(toks.contains(&"ab".to_string()));
        assert!(!toks.contains(&"cdab".to_string()));
        assert!(toks.contains(&"cd".to_string()));
        assert!(!toks.contains(&"a".to_string()));
    }
}

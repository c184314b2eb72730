use std::cell::RefCell;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use regex::bytes::Regex;
use rustc_hash::{FxHashMap, FxHashSet};

use super::luhn::luhn_digits;
use super::KbError;

/// Named post-match checks attached to regex identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validator {
    /// Luhn checksum over the digits of the token (separators ignored).
    Luhn,
    /// US SSN area/group/serial rules: area not 000, 666 or 9xx; group not
    /// 00; serial not 0000.
    SsnArea,
    /// Dotted quad with every octet <= 255 and no leading zeros.
    Ipv4Octets,
}

impl Validator {
    pub fn name(self) -> &'static str {
        match self {
            Validator::Luhn => "luhn",
            Validator::SsnArea => "ssn_area",
            Validator::Ipv4Octets => "ipv4_octets",
        }
    }

    /// Identifiers this validator consults. None of the built-in validators
    /// depend on other identifiers.
    pub fn dependencies(self) -> &'static [&'static str] {
        &[]
    }

    fn check(self, token: &[u8]) -> bool {
        match self {
            Validator::Luhn => luhn_digits(
                token
                    .iter()
                    .filter(|b| b.is_ascii_digit())
                    .map(|b| b - b'0')
                    .collect::<Vec<_>>()
                    .into_iter(),
            ),
            Validator::SsnArea => {
                let area = &token[0..3];
                let group = &token[4..6];
                let serial = &token[7..11];
                area != b"000" && area != b"666" && area[0] != b'9' && group != b"00" && serial != b"0000"
            }
            Validator::Ipv4Octets => token.split(|&b| b == b'.').all(|octet| {
                !(octet.len() > 1 && octet[0] == b'0')
                    && octet.iter().fold(0u32, |acc, d| acc * 10 + (d - b'0') as u32) <= 255
            }),
        }
    }
}

static NEXT_REGEX_ID: AtomicUsize = AtomicUsize::new(0);

thread_local! {
    /// Per-thread clones, so threads do not share the regex cache pool.
    static LOCAL_REGEXES: RefCell<FxHashMap<usize, Regex>> = RefCell::default();
}

pub struct RegexMatcher {
    pattern: String,
    id: usize,
    regex: Regex,
    validator: Option<Validator>,
}

impl RegexMatcher {
    fn is_match(&self, token: &[u8]) -> bool {
        LOCAL_REGEXES.with(|local| {
            local
                .borrow_mut()
                .entry(self.id)
                .or_insert_with(|| self.regex.clone())
                .is_match(token)
        })
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn validator(&self) -> Option<Validator> {
        self.validator
    }
}

pub enum IdentifierKind {
    /// Case-folded exact-term match.
    Dictionary(FxHashSet<Box<[u8]>>),
    /// Whole-token regex match followed by an optional validator.
    Regex(RegexMatcher),
    /// Exact, case-sensitive term match (feedback pseudo-identifier).
    Exact(FxHashSet<Box<[u8]>>),
}

/// A recognizer that maps tokens to one entity type.
pub struct Identifier {
    name: String,
    kind: IdentifierKind,
    min_len: usize,
    max_len: usize,
}

impl fmt::Debug for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            IdentifierKind::Dictionary(d) => format!("dictionary({} terms)", d.len()),
            IdentifierKind::Regex(r) => format!("regex({})", r.pattern),
            IdentifierKind::Exact(d) => format!("exact({} terms)", d.len()),
        };
        f.debug_struct("Identifier")
            .field("name", &self.name)
            .field("kind", &kind)
            .field("min_len", &self.min_len)
            .field("max_len", &self.max_len)
            .finish()
    }
}

/// Trims and case-folds a dictionary term.
pub fn normalize_term(term: &str) -> String {
    term.trim().to_lowercase()
}

const LOWER_BUF: usize = 128;

impl Identifier {
    pub fn dictionary<I, S>(name: &str, terms: I) -> Result<Self, KbError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: FxHashSet<Box<[u8]>> = terms
            .into_iter()
            .map(|t| normalize_term(t.as_ref()))
            .filter(|t| !t.is_empty())
            .map(|t| t.into_bytes().into_boxed_slice())
            .collect();
        Self::from_set(name, IdentifierKind::Dictionary, set)
    }

    pub fn exact<I, S>(name: &str, terms: I) -> Result<Self, KbError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set = terms
            .into_iter()
            .map(|t| t.as_ref().as_bytes().to_vec().into_boxed_slice())
            .collect();
        Self::from_set(name, IdentifierKind::Exact, set)
    }

    fn from_set(
        name: &str,
        wrap: fn(FxHashSet<Box<[u8]>>) -> IdentifierKind,
        set: FxHashSet<Box<[u8]>>,
    ) -> Result<Self, KbError> {
        if set.is_empty() {
            return Err(KbError::EmptyDictionary(name.to_string()));
        }
        let min_len = set.iter().map(|t| t.len()).min().unwrap_or(0);
        let max_len = set.iter().map(|t| t.len()).max().unwrap_or(0);
        Ok(Identifier {
            name: name.to_string(),
            kind: wrap(set),
            min_len,
            max_len,
        })
    }

    /// Builds a regex identifier. The pattern is anchored to the whole token.
    pub fn regex(
        name: &str,
        pattern: &str,
        validator: Option<Validator>,
        min_len: usize,
        max_len: usize,
    ) -> Result<Self, KbError> {
        if min_len > max_len || min_len == 0 {
            return Err(KbError::BadLengthBounds {
                name: name.to_string(),
                min_len,
                max_len,
            });
        }
        let regex = Regex::new(&format!("^(?:{pattern})$")).map_err(|e| KbError::BadPattern {
            name: name.to_string(),
            source: Box::new(e),
        })?;
        Ok(Identifier {
            name: name.to_string(),
            kind: IdentifierKind::Regex(RegexMatcher {
                pattern: pattern.to_string(),
                id: NEXT_REGEX_ID.fetch_add(1, Ordering::Relaxed),
                regex,
                validator,
            }),
            min_len,
            max_len,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &IdentifierKind {
        &self.kind
    }

    pub fn min_len(&self) -> usize {
        self.min_len
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn is_dictionary(&self) -> bool {
        !matches!(self.kind, IdentifierKind::Regex(_))
    }

    pub fn dependencies(&self) -> &'static [&'static str] {
        match &self.kind {
            IdentifierKind::Regex(RegexMatcher {
                validator: Some(v), ..
            }) => v.dependencies(),
            _ => &[],
        }
    }

    pub fn terms(&self) -> Option<&FxHashSet<Box<[u8]>>> {
        match &self.kind {
            IdentifierKind::Dictionary(set) | IdentifierKind::Exact(set) => Some(set),
            IdentifierKind::Regex(_) => None,
        }
    }

    #[inline]
    pub fn length_admits(&self, len: usize) -> bool {
        len >= self.min_len && len <= self.max_len
    }

    /// Full match, including the length pre-filter.
    #[inline]
    pub fn matches(&self, token: &[u8]) -> bool {
        self.length_admits(token.len()) && self.matches_unbounded(token)
    }

    /// Match without the length pre-filter; callers that already checked
    /// [`Identifier::length_admits`] use this.
    #[inline]
    pub fn matches_unbounded(&self, token: &[u8]) -> bool {
        match &self.kind {
            IdentifierKind::Exact(set) => set.contains(token),
            IdentifierKind::Dictionary(set) => {
                if token.len() <= LOWER_BUF {
                    let mut buf = [0u8; LOWER_BUF];
                    let lowered = &mut buf[..token.len()];
                    lowered.copy_from_slice(token);
                    lowered.make_ascii_lowercase();
                    set.contains(&*lowered)
                } else {
                    set.contains(token.to_ascii_lowercase().as_slice())
                }
            }
            IdentifierKind::Regex(m) => {
                m.is_match(token) && m.validator.is_none_or(|v| v.check(token))
            }
        }
    }
}

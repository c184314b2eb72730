//! Dump and log parsing.
//!
//! A dump is a sequence of 4096-byte pages. Each page starts with a 64-byte
//! big-endian header followed by a 4032-byte payload:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "KDMP"
//!      4     2  version (1)
//!      6     4  asid (address-space id)
//!     10     8  logical_address
//!     18     2  flags
//!     20     2  data_len (payload bytes in use, <= 4032)
//!     22    42  reserved (zero)
//! ```
//!
//! Pages are gathered into groups by asid and ordered by logical address.
//! Only the first `data_len` payload bytes are analysed. Within that region,
//! bytes that do not decode to printable ASCII are control data and act as
//! token boundaries.
//!
//! Logs are split into lines; non-blank runs of lines form paragraphs, and a
//! paragraph plays the role of a page group. Log tokens use the line index as
//! `page_index` and the column (byte offset within the line) as
//! `byte_offset`.

use std::collections::BTreeMap;

use crate::encoding::{ByteClasses, Encoding};

pub const PAGE_SIZE: usize = 4096;
pub const HEADER_SIZE: usize = 64;
pub const PAYLOAD_CAPACITY: usize = PAGE_SIZE - HEADER_SIZE;
pub const MAGIC: [u8; 4] = *b"KDMP";
pub const FORMAT_VERSION: u16 = 1;
pub const MIN_TOKEN_LEN: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("dump length {len} is not a multiple of the page size ({PAGE_SIZE})")]
    Truncated { len: usize },
    #[error("page {page}: bad magic {found:02x?}")]
    BadMagic { page: usize, found: [u8; 4] },
    #[error("page {page}: unsupported format version {version}")]
    UnsupportedVersion { page: usize, version: u16 },
    #[error("page {page}: data_len {data_len} exceeds payload capacity {PAYLOAD_CAPACITY}")]
    DataLenTooLarge { page: usize, data_len: u16 },
    #[error("byte {offset}: not valid {encoding} text")]
    Encoding { offset: usize, encoding: Encoding },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageHeader {
    pub version: u16,
    pub asid: u32,
    pub logical_address: u64,
    pub flags: u16,
    pub data_len: u16,
}

impl PageHeader {
    pub fn new(asid: u32, logical_address: u64, data_len: u16) -> Self {
        PageHeader {
            version: FORMAT_VERSION,
            asid,
            logical_address,
            flags: 0,
            data_len,
        }
    }

    pub fn encode(&self) -> [u8; HEADER_SIZE] {
        let mut out = [0u8; HEADER_SIZE];
        out[0..4].copy_from_slice(&MAGIC);
        out[4..6].copy_from_slice(&self.version.to_be_bytes());
        out[6..10].copy_from_slice(&self.asid.to_be_bytes());
        out[10..18].copy_from_slice(&self.logical_address.to_be_bytes());
        out[18..20].copy_from_slice(&self.flags.to_be_bytes());
        out[20..22].copy_from_slice(&self.data_len.to_be_bytes());
        out
    }

    /// Decodes and validates the header at the start of `page`.
    pub fn decode(page: &[u8], page_index: usize) -> Result<Self, ParseError> {
        if page.len() < HEADER_SIZE {
            return Err(ParseError::Truncated { len: page.len() });
        }
        let magic: [u8; 4] = page[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(ParseError::BadMagic {
                page: page_index,
                found: magic,
            });
        }
        let version = u16::from_be_bytes([page[4], page[5]]);
        if version != FORMAT_VERSION {
            return Err(ParseError::UnsupportedVersion {
                page: page_index,
                version,
            });
        }
        let data_len = u16::from_be_bytes([page[20], page[21]]);
        if data_len as usize > PAYLOAD_CAPACITY {
            return Err(ParseError::DataLenTooLarge {
                page: page_index,
                data_len,
            });
        }
        Ok(PageHeader {
            version,
            asid: u32::from_be_bytes(page[6..10].try_into().unwrap()),
            logical_address: u64::from_be_bytes(page[10..18].try_into().unwrap()),
            flags: u16::from_be_bytes([page[18], page[19]]),
            data_len,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    #[default]
    Dump,
    Log,
}

/// A decoded printable token with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParsedToken {
    pub text: String,
    pub page_index: usize,
    pub byte_offset: usize,
    pub byte_len: usize,
    pub group_id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageGroup {
    pub group_id: u32,
    pub pages: Vec<usize>,
    pub tokens: Vec<ParsedToken>,
}

/// An analysable byte range of the input: a page payload for dumps, a line
/// for logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub page_index: usize,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupLayout {
    pub group_id: u32,
    pub segments: Vec<Segment>,
}

impl GroupLayout {
    pub fn pages(&self) -> Vec<usize> {
        let mut pages: Vec<usize> = self.segments.iter().map(|s| s.page_index).collect();
        pages.dedup();
        pages
    }
}

/// Structural view of an input file: which byte ranges are analysed and how
/// they group. Headers and bytes past `data_len` never appear in a segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub kind: InputKind,
    pub encoding: Encoding,
    pub input_len: usize,
    pub groups: Vec<GroupLayout>,
}

impl Layout {
    pub fn of_dump(bytes: &[u8], encoding: Encoding) -> Result<Self, ParseError> {
        if !bytes.len().is_multiple_of(PAGE_SIZE) {
            return Err(ParseError::Truncated { len: bytes.len() });
        }
        let mut by_asid: BTreeMap<u32, Vec<(u64, usize, u16)>> = BTreeMap::new();
        for (index, page) in bytes.chunks_exact(PAGE_SIZE).enumerate() {
            let h = PageHeader::decode(page, index)?;
            by_asid
                .entry(h.asid)
                .or_default()
                .push((h.logical_address, index, h.data_len));
        }
        let groups = by_asid
            .into_iter()
            .map(|(asid, mut pages)| {
                pages.sort_unstable();
                let segments = pages
                    .into_iter()
                    .map(|(_, index, data_len)| {
                        let start = index * PAGE_SIZE + HEADER_SIZE;
                        Segment {
                            page_index: index,
                            start,
                            end: start + data_len as usize,
                        }
                    })
                    .collect();
                GroupLayout {
                    group_id: asid,
                    segments,
                }
            })
            .collect();
        Ok(Layout {
            kind: InputKind::Dump,
            encoding,
            input_len: bytes.len(),
            groups,
        })
    }

    pub fn of_log(bytes: &[u8], encoding: Encoding) -> Result<Self, ParseError> {
        if encoding == Encoding::Ascii {
            if let Some(offset) = bytes.iter().position(|&b| b >= 0x80) {
                return Err(ParseError::Encoding { offset, encoding });
            }
        }
        let classes = encoding.classes();
        let mut groups = Vec::new();
        let mut current: Vec<Segment> = Vec::new();
        let mut line_start = 0;
        let mut line_index = 0;
        let flush = |current: &mut Vec<Segment>, groups: &mut Vec<GroupLayout>| {
            if !current.is_empty() {
                groups.push(GroupLayout {
                    group_id: groups.len() as u32,
                    segments: std::mem::take(current),
                });
            }
        };
        for i in 0..=bytes.len() {
            let at_end = i == bytes.len();
            if !at_end && classes.class(bytes[i]) != b'\n' {
                continue;
            }
            let seg = Segment {
                page_index: line_index,
                start: line_start,
                end: i,
            };
            let blank = bytes[seg.start..seg.end]
                .iter()
                .all(|&b| classes.class(b) == b' ');
            if blank {
                flush(&mut current, &mut groups);
            } else {
                current.push(seg);
            }
            line_start = i + 1;
            line_index += 1;
        }
        flush(&mut current, &mut groups);
        Ok(Layout {
            kind: InputKind::Log,
            encoding,
            input_len: bytes.len(),
            groups,
        })
    }

    pub fn of_input(bytes: &[u8], kind: InputKind, encoding: Encoding) -> Result<Self, ParseError> {
        match kind {
            InputKind::Dump => Self::of_dump(bytes, encoding),
            InputKind::Log => Self::of_log(bytes, encoding),
        }
    }

    pub fn page_count(&self) -> usize {
        match self.kind {
            InputKind::Dump => self.input_len / PAGE_SIZE,
            InputKind::Log => self.groups.iter().map(|g| g.segments.len()).sum(),
        }
    }
}

/// A token located inside a decoded segment buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenSpan {
    pub offset: u32,
    pub len: u32,
}

#[inline]
fn is_word_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, b'.' | b'@' | b'-' | b'_' | b'+')
}

#[inline]
fn is_trim_char(c: u8) -> bool {
    matches!(c, b'.' | b'@' | b'-' | b'_' | b'+')
}

/// Decodes `raw` into its class bytes (see [`ByteClasses`]); the output has
/// the same length as the input.
pub fn decode_classes(raw: &[u8], classes: &ByteClasses, out: &mut Vec<u8>) {
    out.clear();
    out.extend(raw.iter().map(|&b| classes.class(b)));
}

/// Splits a decoded buffer into tokens: maximal runs of word characters,
/// with leading/trailing `.@-_+` trimmed, kept when at least two bytes long.
pub fn tokenize_decoded(decoded: &[u8], out: &mut Vec<TokenSpan>) {
    let n = decoded.len();
    let mut i = 0;
    while i < n {
        while i < n && !is_word_char(decoded[i]) {
            i += 1;
        }
        let mut start = i;
        while i < n && is_word_char(decoded[i]) {
            i += 1;
        }
        let mut end = i;
        while start < end && is_trim_char(decoded[start]) {
            start += 1;
        }
        while end > start && is_trim_char(decoded[end - 1]) {
            end -= 1;
        }
        if end - start >= MIN_TOKEN_LEN {
            out.push(TokenSpan {
                offset: start as u32,
                len: (end - start) as u32,
            });
        }
    }
}

/// Tokenizes one payload. Offsets refer to the undecoded payload; decoding
/// never changes byte positions because both encodings are single-byte.
pub fn decode_payload(payload: &[u8], encoding: Encoding) -> Vec<(String, usize, usize)> {
    let mut decoded = Vec::with_capacity(payload.len());
    decode_classes(payload, encoding.classes(), &mut decoded);
    let mut spans = Vec::new();
    tokenize_decoded(&decoded, &mut spans);
    spans
        .into_iter()
        .map(|s| {
            let (o, l) = (s.offset as usize, s.len as usize);
            (
                String::from_utf8(decoded[o..o + l].to_vec()).expect("token bytes are ASCII"),
                o,
                l,
            )
        })
        .collect()
}

fn materialize(bytes: &[u8], layout: &Layout) -> Vec<PageGroup> {
    let classes = layout.encoding.classes();
    let mut decoded = Vec::new();
    let mut spans = Vec::new();
    layout
        .groups
        .iter()
        .map(|g| {
            let mut tokens = Vec::new();
            for seg in &g.segments {
                decode_classes(&bytes[seg.start..seg.end], classes, &mut decoded);
                spans.clear();
                tokenize_decoded(&decoded, &mut spans);
                tokens.extend(spans.iter().map(|s| {
                    let (o, l) = (s.offset as usize, s.len as usize);
                    ParsedToken {
                        text: String::from_utf8(decoded[o..o + l].to_vec())
                            .expect("token bytes are ASCII"),
                        page_index: seg.page_index,
                        byte_offset: o,
                        byte_len: l,
                        group_id: g.group_id,
                    }
                }));
            }
            PageGroup {
                group_id: g.group_id,
                pages: g.pages(),
                tokens,
            }
        })
        .collect()
}

/// Parses a dump into page groups, one per address-space id.
pub fn parse_dump(bytes: &[u8], encoding: Encoding) -> Result<Vec<PageGroup>, ParseError> {
    let layout = Layout::of_dump(bytes, encoding)?;
    Ok(materialize(bytes, &layout))
}

/// Parses a text log into paragraph groups.
pub fn parse_log(bytes: &[u8], encoding: Encoding) -> Result<Vec<PageGroup>, ParseError> {
    let layout = Layout::of_log(bytes, encoding)?;
    Ok(materialize(bytes, &layout))
}

/// Absolute file offset of a token's first byte.
pub fn token_file_offset(kind: InputKind, layout: &Layout, token: &ParsedToken) -> usize {
    match kind {
        InputKind::Dump => token.page_index * PAGE_SIZE + HEADER_SIZE + token.byte_offset,
        InputKind::Log => {
            let seg = layout
                .groups
                .iter()
                .flat_map(|g| g.segments.iter())
                .find(|s| s.page_index == token.page_index)
                .expect("token line belongs to layout");
            seg.start + token.byte_offset
        }
    }
}

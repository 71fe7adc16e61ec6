//! Keyword-to-title normalization and dump-title decoding.
//!
//! Dump title fields use the pagecounts convention: spaces as underscores,
//! first letter uppercased (default MediaWiki rule), other bytes
//! percent-encoded. Matching against the dumps is exact on the normalized
//! encoded title; no redirect or disambiguation resolution.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TitleError {
    #[error("keyword is empty after trimming whitespace")]
    EmptyKeyword,
    #[error("keyword list contains no valid keywords")]
    EmptyIndex,
    #[error("failed to read keyword list: {0}")]
    Read(String),
}

/// One user keyword and the encoded title it matches in the dumps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Keyword {
    pub raw: String,
    pub normalized_title: String,
}

/// The user's keyword set, indexed by normalized title.
///
/// Keywords whose normalized titles collide keep only the first occurrence;
/// the rest are reported in `duplicates`.
#[derive(Debug, Clone)]
pub struct KeywordIndex {
    entries: Vec<Keyword>,
    lookup: HashMap<String, usize>,
    pub duplicates: Vec<Keyword>,
}

impl KeywordIndex {
    pub fn entries(&self) -> &[Keyword] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn by_title(&self, normalized_title: &str) -> Option<&Keyword> {
        self.lookup.get(normalized_title).map(|&i| &self.entries[i])
    }

    pub fn titles(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|k| k.normalized_title.as_str())
    }
}

// Bytes the pagecounts encoding leaves as-is, beyond ASCII alphanumerics.
// This is the MediaWiki wfUrlencode safe set plus underscore.
fn is_passthrough(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b'~' | b'!' | b'$' | b'(' | b')' | b'*' | b',' | b':' | b';' | b'@' | b'/')
}

/// Normalize a user keyword into the encoded title used for dump matching:
/// trim, spaces to underscores, first letter uppercased, percent-encode the
/// rest.
///
/// Uppercasing applies to the first Unicode scalar when it has an uppercase
/// mapping and can be disabled for wikis configured case-sensitive.
pub fn normalize_keyword(raw: &str) -> Result<String, TitleError> {
    normalize_keyword_with(raw, true)
}

pub fn normalize_keyword_with(raw: &str, uppercase_first: bool) -> Result<String, TitleError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(TitleError::EmptyKeyword);
    }
    let underscored = trimmed.replace(' ', "_");
    let cased: String = if uppercase_first {
        let mut chars = underscored.chars();
        let first = chars.next().unwrap();
        first.to_uppercase().chain(chars).collect()
    } else {
        underscored
    };
    let mut out = String::with_capacity(cased.len());
    for &b in cased.as_bytes() {
        if is_passthrough(b) {
            out.push(b as char);
        } else {
            write!(out, "%{b:02X}").unwrap();
        }
    }
    Ok(out)
}

/// Title that decoded to bytes that are not valid UTF-8; kept encoded.
#[derive(Debug, Error, PartialEq)]
#[error("title {encoded:?} does not decode to valid UTF-8")]
pub struct UndecodableTitle {
    pub encoded: String,
}

/// Decode a dump title field for human-readable output.
///
/// Valid `%XX` escapes decode as UTF-8 bytes; invalid escapes (dangling
/// `%`, non-hex digits) pass through literally. Underscores are preserved.
pub fn decode_title(encoded: &str) -> Result<String, UndecodableTitle> {
    let bytes = encoded.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            if let (Some(hi), Some(lo)) = (hex_val(bytes[i + 1]), hex_val(bytes[i + 2])) {
                out.push(hi * 16 + lo);
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8(out).map_err(|_| UndecodableTitle { encoded: encoded.to_string() })
}

fn hex_val(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'a'..=b'f' => Some(b - b'a' + 10),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

/// Build a keyword index from one-keyword-per-line text.
///
/// Blank lines are skipped; duplicate normalized titles are reported and
/// only the first occurrence retained. Zero valid keywords is fatal.
pub fn build_index<R: BufRead>(reader: R) -> Result<KeywordIndex, TitleError> {
    let mut index = KeywordIndex {
        entries: Vec::new(),
        lookup: HashMap::new(),
        duplicates: Vec::new(),
    };
    for line in reader.lines() {
        let line = line.map_err(|e| TitleError::Read(e.to_string()))?;
        let raw = line.trim();
        if raw.is_empty() {
            continue;
        }
        let normalized_title = normalize_keyword(raw)?;
        if index.lookup.contains_key(&normalized_title) {
            index.duplicates.push(Keyword { raw: raw.to_string(), normalized_title });
            continue;
        }
        index.lookup.insert(normalized_title.clone(), index.entries.len());
        index.entries.push(Keyword { raw: raw.to_string(), normalized_title });
    }
    if index.entries.is_empty() {
        return Err(TitleError::EmptyIndex);
    }
    Ok(index)
}

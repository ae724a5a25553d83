//! Removal of personal identifiers (URLs, emails, phone numbers, ID numbers)
//! from complaint text.
//!
//! Passes run in a fixed order, URL, email, phone, ID, each on the text left
//! by the previous one, and the cycle repeats until nothing matches. Matched
//! spans become placeholder tokens such as `<EMAIL>`.

use std::fmt;
use std::ops::Range;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiiKind {
    Url,
    Email,
    Phone,
    IdNumber,
}

impl PiiKind {
    /// Pass order.
    pub const ORDER: [PiiKind; 4] = [PiiKind::Url, PiiKind::Email, PiiKind::Phone, PiiKind::IdNumber];

    pub fn placeholder(self) -> &'static str {
        match self {
            PiiKind::Url => "<URL>",
            PiiKind::Email => "<EMAIL>",
            PiiKind::Phone => "<PHONE>",
            PiiKind::IdNumber => "<ID>",
        }
    }
}

impl fmt::Display for PiiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PiiKind::Url => "url",
            PiiKind::Email => "email",
            PiiKind::Phone => "phone",
            PiiKind::IdNumber => "id_number",
        })
    }
}

/// All placeholder tokens the scrubber emits.
pub const PLACEHOLDERS: [&str; 4] = ["<URL>", "<EMAIL>", "<PHONE>", "<ID>"];

static URL_RE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r#"(?i)\b(?:https?://|www\.)[^\s<>"']*[^\s<>"'.,;:!?)\]}]"#).unwrap()
});
static EMAIL_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}").unwrap());
// Optional +country code and (area) prefix, then 7-12 digits with single
// space/dot/hyphen separators.
static PHONE_RE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"(?:\+\d{1,3}[ .-]?(?:\(\d{1,4}\)[ .-]?)?|\(\d{1,4}\)[ .-]?|\b)\d(?:[ .-]?\d){6,11}\b").unwrap()
});
static ID_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"\b\d{6,11}\b").unwrap());

/// Bare digit runs of up to 11 digits are left to the ID pass so that
/// identity numbers are not reported as phones.
fn accept_phone(m: &str) -> bool {
    let digits = m.bytes().filter(u8::is_ascii_digit).count();
    let decorated = m.bytes().any(|b| matches!(b, b'+' | b'(' | b' ' | b'.' | b'-'));
    decorated || digits >= 12
}

fn find_in(kind: PiiKind, text: &str) -> Vec<Range<usize>> {
    let re: &Regex = match kind {
        PiiKind::Url => &URL_RE,
        PiiKind::Email => &EMAIL_RE,
        PiiKind::Phone => &PHONE_RE,
        PiiKind::IdNumber => &ID_RE,
    };
    re.find_iter(text)
        .filter(|m| kind != PiiKind::Phone || accept_phone(m.as_str()))
        .map(|m| m.range())
        .collect()
}

/// Spans of `text` the next scrubbing pass would replace. Empty for
/// scrubbed output.
pub fn detect(text: &str) -> Vec<(PiiKind, Range<usize>)> {
    PiiKind::ORDER
        .iter()
        .flat_map(|&k| find_in(k, text).into_iter().map(move |r| (k, r)))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiiCounts {
    pub email: usize,
    pub url: usize,
    pub phone: usize,
    pub id_number: usize,
}

impl PiiCounts {
    pub fn total(&self) -> usize {
        self.email + self.url + self.phone + self.id_number
    }

    fn bump(&mut self, kind: PiiKind) {
        match kind {
            PiiKind::Url => self.url += 1,
            PiiKind::Email => self.email += 1,
            PiiKind::Phone => self.phone += 1,
            PiiKind::IdNumber => self.id_number += 1,
        }
    }

    fn add(&mut self, other: &PiiCounts) {
        self.email += other.email;
        self.url += other.url;
        self.phone += other.phone;
        self.id_number += other.id_number;
    }

    pub fn get(&self, kind: PiiKind) -> usize {
        match kind {
            PiiKind::Url => self.url,
            PiiKind::Email => self.email,
            PiiKind::Phone => self.phone,
            PiiKind::IdNumber => self.id_number,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiiSpan {
    pub kind: PiiKind,
    /// Byte range in the original text.
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScrubReport {
    pub counts: PiiCounts,
    pub spans: Vec<PiiSpan>,
}

impl ScrubReport {
    pub fn merge(&mut self, other: &ScrubReport) {
        self.counts.add(&other.counts);
        self.spans.extend(other.spans.iter().cloned());
    }
}

/// Original text not yet replaced, or a placeholder covering an original
/// byte range.
enum Piece {
    Kept { start: usize, end: usize },
    Masked(PiiKind),
}

/// Replaces every identifier in `text` by its placeholder.
pub fn scrub(text: &str) -> (String, ScrubReport) {
    let mut pieces = vec![Piece::Kept { start: 0, end: text.len() }];
    let mut report = ScrubReport::default();
    loop {
        let mut changed = false;
        for kind in PiiKind::ORDER {
            let mut next = Vec::with_capacity(pieces.len());
            for piece in pieces {
                let (start, end) = match piece {
                    Piece::Kept { start, end } => (start, end),
                    masked => {
                        next.push(masked);
                        continue;
                    }
                };
                // Neighbours of a kept piece are placeholders (non-word `<`,
                // `>`) or the text ends, so matching the slice alone gives the
                // same result as matching in context.
                let mut cursor = start;
                for r in find_in(kind, &text[start..end]) {
                    let (s, e) = (start + r.start, start + r.end);
                    if s > cursor {
                        next.push(Piece::Kept { start: cursor, end: s });
                    }
                    next.push(Piece::Masked(kind));
                    report.counts.bump(kind);
                    report.spans.push(PiiSpan { kind, start: s, end: e });
                    cursor = e;
                    changed = true;
                }
                if cursor < end {
                    next.push(Piece::Kept { start: cursor, end });
                }
            }
            pieces = next;
        }
        if !changed {
            break;
        }
    }
    report.spans.sort_by_key(|s| s.start);
    let mut out = String::with_capacity(text.len());
    for piece in &pieces {
        match *piece {
            Piece::Kept { start, end } => out.push_str(&text[start..end]),
            Piece::Masked(kind) => out.push_str(kind.placeholder()),
        }
    }
    (out, report)
}

/// Scrubs every report. Ids and labels are untouched.
pub fn scrub_dataset(ds: &Dataset) -> (Dataset, ScrubReport) {
    use rayon::prelude::*;

    let scrubbed: Vec<(String, ScrubReport)> = ds.reports.par_iter().map(|r| scrub(&r.text)).collect();
    let mut total = ScrubReport::default();
    let mut out = ds.clone();
    for (report, (text, rep)) in out.reports.iter_mut().zip(scrubbed) {
        report.text = text;
        report.scrubbed = true;
        total.merge(&rep);
    }
    (out, total)
}

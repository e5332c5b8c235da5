//! Line-oriented journal records.
//!
//! ```text
//! pedal-journal v1
//! <seq>\t<segment>\t<hyp>\t<editor>\t<blind>\t<realized>\t<edited text>\t<wall ms>
//! ```
//!
//! Reals carry six decimals. Tabs, newlines, carriage returns and
//! backslashes inside text fields are backslash-escaped.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{PostEditEvent, SegmentId};
use crate::error::{Error, Result};

pub const JOURNAL_HEADER: &str = "pedal-journal v1";

const FIELDS: usize = 8;

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape(text: &str) -> Result<String> {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(Error::Malformed(format!("bad escape \\{other:?}"))),
        }
    }
    Ok(out)
}

/// Encodes one event as a journal line without the trailing newline.
pub fn encode_record(event: &PostEditEvent) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}\t{}",
        event.seq,
        event.segment_id,
        event.hypothesis_index,
        escape(&event.editor_id),
        event.blind_prediction,
        event.realized_target,
        escape(&event.edited_text),
        event.wall_time,
    )
}

pub fn decode_record(line: &str) -> Result<PostEditEvent> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != FIELDS {
        return Err(Error::Malformed(format!(
            "journal record has {} fields, expected {FIELDS}",
            fields.len()
        )));
    }
    fn num<T: core::str::FromStr>(s: &str, what: &str) -> Result<T> {
        s.parse().map_err(|_| Error::Malformed(format!("bad {what} {s:?}")))
    }
    Ok(PostEditEvent {
        seq: num(fields[0], "seq")?,
        segment_id: SegmentId(num(fields[1], "segment id")?),
        hypothesis_index: num(fields[2], "hypothesis index")?,
        editor_id: unescape(fields[3])?,
        blind_prediction: num(fields[4], "blind prediction")?,
        realized_target: num(fields[5], "realized target")?,
        edited_text: unescape(fields[6])?,
        wall_time: num(fields[7], "wall time")?,
    })
}

/// Sequence guard shared by every journal writer: each appended event must
/// carry the next sequence number.
#[derive(Debug, Clone, Default)]
pub struct SequenceGuard {
    last: u64,
}

impl SequenceGuard {
    pub fn starting_after(last: u64) -> Self {
        SequenceGuard { last }
    }

    pub fn last(&self) -> u64 {
        self.last
    }

    pub fn check(&self, seq: u64) -> Result<()> {
        if seq != self.last + 1 {
            return Err(Error::JournalSequence {
                expected: self.last + 1,
                got: seq,
            });
        }
        Ok(())
    }

    pub fn advance(&mut self, seq: u64) -> Result<()> {
        self.check(seq)?;
        self.last = seq;
        Ok(())
    }
}

/// In-memory journal with the same append contract as the file journal.
#[derive(Debug, Clone, Default)]
pub struct Journal {
    guard: SequenceGuard,
    events: Vec<PostEditEvent>,
}

impl Journal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, event: PostEditEvent) -> Result<()> {
        self.guard.advance(event.seq)?;
        self.events.push(event);
        Ok(())
    }

    pub fn events(&self) -> &[PostEditEvent] {
        &self.events
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(JOURNAL_HEADER);
        out.push('\n');
        for e in &self.events {
            out.push_str(&encode_record(e));
            out.push('\n');
        }
        out
    }

    /// Parses a whole journal, checking the header and sequence numbers.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(JOURNAL_HEADER) => {}
            other => return Err(Error::Malformed(format!("expected journal header, found {other:?}"))),
        }
        let mut journal = Journal::new();
        for line in lines.filter(|l| !l.is_empty()) {
            journal.append(decode_record(line)?)?;
        }
        Ok(journal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(seq: u64) -> PostEditEvent {
        PostEditEvent {
            seq,
            segment_id: SegmentId(7),
            hypothesis_index: 0,
            editor_id: "ann\tb".into(),
            blind_prediction: 0.25,
            realized_target: 0.5,
            edited_text: "line one\nline two \\ done".into(),
            wall_time: 1_700_000_000_000,
        }
    }

    #[test]
    fn append_and_read_back() {
        let mut j = Journal::new();
        j.append(event(1)).unwrap();
        j.append(event(2)).unwrap();
        let back = Journal::parse(&j.to_text()).unwrap();
        assert_eq!(back.events(), j.events());
        assert_eq!(back.events().iter().map(|e| e.seq).collect::<Vec<_>>(), [1, 2]);
    }

    #[test]
    fn gaps_and_regressions_are_rejected() {
        let mut j = Journal::new();
        j.append(event(1)).unwrap();
        assert_eq!(j.append(event(3)), Err(Error::JournalSequence { expected: 2, got: 3 }));
        assert!(j.append(event(1)).is_err());
        assert_eq!(j.events().len(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Journal::parse("not-a-journal\n").is_err());
        assert!(decode_record("1\t2\t3").is_err());
        assert!(unescape("bad\\q").is_err());
        let text = format!("{JOURNAL_HEADER}\n{}\n", encode_record(&event(2)));
        assert!(Journal::parse(&text).is_err());
    }

    #[test]
    fn record_has_six_decimals() {
        let line = encode_record(&event(1));
        assert!(line.contains("\t0.250000\t0.500000\t"));
        assert!(!line.contains('\n'));
    }
}

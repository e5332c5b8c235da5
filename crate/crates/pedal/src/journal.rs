//! Append-only journal file. Every append is flushed and synced before it
//! returns, so an acknowledged post-edit survives a crash.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use pedal_core::journal::{decode_record, encode_record, SequenceGuard, JOURNAL_HEADER};
use pedal_core::PostEditEvent;

use crate::error::{Error, IoContext, Result};

#[derive(Debug)]
pub struct FileJournal {
    path: PathBuf,
    file: File,
    guard: SequenceGuard,
}

impl FileJournal {
    /// Opens `path` for appending, creating it (with its header) if missing.
    /// Returns the events already on disk. A torn final line, left by a
    /// crash mid-append, was never acknowledged and is cut off.
    pub fn open(path: &Path) -> Result<(Self, Vec<PostEditEvent>)> {
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(path)
            .at(path)?;
        let mut text = String::new();
        file.read_to_string(&mut text).at(path)?;
        let complete = text.rfind('\n').map_or(0, |i| i + 1);
        if complete < text.len() {
            file.set_len(complete as u64).at(path)?;
            text.truncate(complete);
        }
        if text.is_empty() {
            file.seek(SeekFrom::Start(0)).at(path)?;
            writeln!(file, "{JOURNAL_HEADER}").at(path)?;
            file.sync_all().at(path)?;
            let journal = FileJournal {
                path: path.to_path_buf(),
                file,
                guard: SequenceGuard::default(),
            };
            return Ok((journal, Vec::new()));
        }
        file.sync_all().at(path)?;
        file.seek(SeekFrom::End(0)).at(path)?;
        let events = parse(&text, path)?;
        let guard = SequenceGuard::starting_after(events.last().map_or(0, |e| e.seq));
        Ok((
            FileJournal {
                path: path.to_path_buf(),
                file,
                guard,
            },
            events,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn last_seq(&self) -> u64 {
        self.guard.last()
    }

    /// Appends one record durably; sequence gaps and regressions are refused
    /// before anything is written.
    pub fn append(&mut self, event: &PostEditEvent) -> Result<()> {
        self.guard.check(event.seq)?;
        let mut line = encode_record(event);
        line.push('\n');
        self.file.write_all(line.as_bytes()).at(&self.path)?;
        self.file.flush().at(&self.path)?;
        self.file.sync_data().at(&self.path)?;
        self.guard.advance(event.seq)?;
        Ok(())
    }
}

/// Reads a closed journal strictly (header, field count, sequence).
pub fn read_journal(path: &Path) -> Result<Vec<PostEditEvent>> {
    let text = std::fs::read_to_string(path).at(path)?;
    parse(&text, path)
}

fn parse(text: &str, path: &Path) -> Result<Vec<PostEditEvent>> {
    let name = path.display().to_string();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, JOURNAL_HEADER)) => {}
        _ => {
            return Err(Error::Row {
                path: name,
                line: 1,
                message: format!("expected header {JOURNAL_HEADER:?}"),
            })
        }
    }
    let mut guard = SequenceGuard::default();
    let mut events = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let row_err = |e: pedal_core::Error| Error::Row {
            path: name.clone(),
            line: i as u64 + 1,
            message: e.to_string(),
        };
        let event = decode_record(line).map_err(row_err)?;
        guard.advance(event.seq).map_err(row_err)?;
        events.push(event);
    }
    Ok(events)
}

//! Corpus ingestion from tab-separated files.
//!
//! One segment per line, no header by default. A schema names the role of
//! every column. With a `group` column, consecutive rows sharing a key
//! become hypotheses of a single segment.

use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use pedal_core::{Corpus, Hypothesis, LangCode, Segment, SegmentId};
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Source,
    Hypothesis,
    PostEdit,
    Reference,
    Origin,
    Group,
    SourceLang,
    TargetLang,
    Ignore,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Source => "source",
            Role::Hypothesis => "hypothesis",
            Role::PostEdit => "post_edit",
            Role::Reference => "reference",
            Role::Origin => "origin",
            Role::Group => "group",
            Role::SourceLang => "source_lang",
            Role::TargetLang => "target_lang",
            Role::Ignore => "ignore",
        }
    }

    fn parse(s: &str) -> Option<Role> {
        Some(match s {
            "source" | "src" => Role::Source,
            "hypothesis" | "hyp" | "mt" => Role::Hypothesis,
            "post_edit" | "pe" => Role::PostEdit,
            "reference" | "ref" => Role::Reference,
            "origin" => Role::Origin,
            "group" => Role::Group,
            "source_lang" => Role::SourceLang,
            "target_lang" => Role::TargetLang,
            "ignore" | "-" => Role::Ignore,
            _ => return None,
        })
    }
}

/// Column roles in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    columns: Vec<Role>,
}

impl Schema {
    pub fn new(columns: Vec<Role>) -> Result<Self> {
        for role in [Role::Source, Role::Hypothesis] {
            if !columns.contains(&role) {
                return Err(Error::Schema(format!("missing a {} column", role.name())));
            }
        }
        for (i, role) in columns.iter().enumerate() {
            if *role != Role::Ignore && columns[..i].contains(role) {
                return Err(Error::Schema(format!("{} given twice", role.name())));
            }
        }
        Ok(Schema { columns })
    }

    pub fn columns(&self) -> &[Role] {
        &self.columns
    }

    fn index(&self, role: Role) -> Option<usize> {
        self.columns.iter().position(|&r| r == role)
    }
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            columns: vec![Role::Source, Role::Hypothesis, Role::PostEdit, Role::Reference],
        }
    }
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let columns = s
            .split(',')
            .map(|c| Role::parse(c.trim()).ok_or_else(|| Error::Schema(format!("unknown column role {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Schema::new(columns)
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.columns.iter().map(|r| r.name()).collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub schema: Schema,
    /// Used when the schema has no `source_lang` column.
    pub source_lang: String,
    /// Used when the schema has no `target_lang` column.
    pub target_lang: String,
    pub has_header: bool,
    /// Skip malformed rows instead of aborting.
    pub skip_malformed: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            schema: Schema::default(),
            source_lang: "de".into(),
            target_lang: "en".into(),
            has_header: false,
            skip_malformed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: Corpus,
    /// Rows accepted into the corpus.
    pub rows: usize,
    pub skipped: Vec<SkippedRow>,
}

struct Row {
    line: u64,
    group: Option<String>,
    source: String,
    source_lang: LangCode,
    target_lang: LangCode,
    hypothesis: Hypothesis,
    reference: Option<String>,
}

pub fn ingest_path(path: &Path, opts: &IngestOptions) -> Result<Ingested> {
    let file = File::open(path).at(path)?;
    ingest_reader(file, &path.display().to_string(), opts)
}

/// Reads a corpus; `name` labels errors.
pub fn ingest_reader<R: Read>(reader: R, name: &str, opts: &IngestOptions) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(opts.has_header)
        .quoting(false)
        .flexible(true)
        .from_reader(reader);
    let schema = &opts.schema;
    let mut skipped = Vec::new();
    let mut segments: Vec<Segment> = Vec::new();
    let mut last_group: Option<String> = None;
    let mut seen_groups = std::collections::HashSet::new();
    let mut rows = 0;

    for record in rdr.byte_records() {
        let record = record.map_err(|e| Error::Format(format!("{name}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let parsed = parse_row(&record, line, schema, opts).and_then(|row| {
            let continues = row.group.is_some() && row.group == last_group;
            if continues {
                let seg = segments.last_mut().expect("group continues a segment");
                merge_into(seg, row)
            } else {
                if let Some(g) = &row.group {
                    if !seen_groups.insert(g.clone()) {
                        return Err(format!("group key {g:?} reappears after other rows"));
                    }
                }
                let group = row.group.clone();
                let seg = Segment::new(
                    SegmentId(segments.len()),
                    row.source,
                    row.source_lang,
                    row.target_lang,
                    vec![row.hypothesis],
                    row.reference,
                )
                .map_err(|e| e.to_string())?;
                segments.push(seg);
                last_group = group;
                Ok(())
            }
        });
        match parsed {
            Ok(()) => rows += 1,
            Err(message) if opts.skip_malformed => skipped.push(SkippedRow { line, reason: message }),
            Err(message) => {
                return Err(Error::Row {
                    path: name.into(),
                    line,
                    message,
                })
            }
        }
    }
    if segments.is_empty() {
        return Err(Error::EmptyInput(name.into()));
    }
    if schema.index(Role::Group).is_some() && schema.index(Role::Origin).is_none() {
        for seg in &mut segments {
            if seg.hypotheses.len() > 1 {
                for (k, h) in seg.hypotheses.iter_mut().enumerate() {
                    h.origin = format!("mt{}", k + 1);
                }
            }
        }
    }
    Ok(Ingested {
        corpus: Corpus::new(segments)?,
        rows,
        skipped,
    })
}

fn parse_row(record: &csv::ByteRecord, line: u64, schema: &Schema, opts: &IngestOptions) -> Result<Row, String> {
    if record.len() != schema.columns().len() {
        return Err(format!(
            "expected {} columns ({schema}), found {}",
            schema.columns().len(),
            record.len()
        ));
    }
    let field = |role: Role| -> Result<Option<String>, String> {
        match schema.index(role) {
            None => Ok(None),
            Some(i) => {
                let raw = std::str::from_utf8(&record[i]).map_err(|_| format!("{} column is not UTF-8", role.name()))?;
                // stray carriage returns from CRLF files
                Ok(Some(raw.trim_end_matches(['\r', '\n']).to_string()))
            }
        }
    };
    let required = |role: Role| -> Result<String, String> {
        match field(role)? {
            Some(s) if !s.is_empty() => Ok(s),
            _ => Err(format!("empty {} column", role.name())),
        }
    };
    let optional = |role: Role| -> Result<Option<String>, String> { Ok(field(role)?.filter(|s| !s.is_empty())) };
    let lang = |role: Role, fallback: &str| -> Result<LangCode, String> {
        let code = optional(role)?.unwrap_or_else(|| fallback.to_string());
        LangCode::new(&code).map_err(|e| e.to_string())
    };

    let source = required(Role::Source)?;
    let text = required(Role::Hypothesis)?;
    let mut hypothesis = Hypothesis::new(optional(Role::Origin)?.unwrap_or_else(|| "mt".into()), text);
    hypothesis.gold_post_edit = optional(Role::PostEdit)?;
    Ok(Row {
        line,
        group: optional(Role::Group)?,
        source,
        source_lang: lang(Role::SourceLang, &opts.source_lang)?,
        target_lang: lang(Role::TargetLang, &opts.target_lang)?,
        hypothesis,
        reference: optional(Role::Reference)?,
    })
}

fn merge_into(seg: &mut Segment, row: Row) -> Result<(), String> {
    if seg.source_text != row.source {
        return Err(format!("line {}: source differs from the rest of its group", row.line));
    }
    if seg.source_lang != row.source_lang || seg.target_lang != row.target_lang {
        return Err("language pair differs from the rest of its group".into());
    }
    match (&seg.reference, row.reference) {
        (Some(a), Some(b)) if *a != b => return Err("reference differs from the rest of its group".into()),
        (None, Some(b)) => seg.reference = Some(b),
        _ => {}
    }
    seg.hypotheses.push(row.hypothesis);
    Ok(())
}

/// Writes `corpus` in the default layout (`source, hypothesis, post_edit,
/// reference`), or with a leading group column when some segment has
/// several hypotheses. Returns the schema used. Texts containing tabs or
/// line breaks cannot be represented and are refused.
/// Column layout written by [`write_corpus`] for single-hypothesis corpora.
pub const WRITTEN_SCHEMA: &str = "source,hypothesis,post_edit,reference,source_lang,target_lang";
/// Column layout written by [`write_corpus`] when some segment has several
/// hypotheses.
pub const WRITTEN_GROUPED_SCHEMA: &str = "group,source,hypothesis,post_edit,reference,source_lang,target_lang";

pub fn write_corpus<W: std::io::Write>(mut w: W, corpus: &Corpus) -> Result<Schema> {
    let grouped = corpus.segments().iter().any(|s| s.hypotheses.len() > 1);
    let schema: Schema = if grouped {
        WRITTEN_GROUPED_SCHEMA.parse()?
    } else {
        WRITTEN_SCHEMA.parse()?
    };
    for seg in corpus.segments() {
        let group = seg.id.to_string();
        for h in &seg.hypotheses {
            let mut fields = Vec::with_capacity(7);
            if grouped {
                fields.push(group.as_str());
            }
            fields.push(seg.source_text.as_str());
            fields.push(h.text.as_str());
            fields.push(h.gold_post_edit.as_deref().unwrap_or(""));
            fields.push(seg.reference.as_deref().unwrap_or(""));
            fields.push(seg.source_lang.as_str());
            fields.push(seg.target_lang.as_str());
            if fields.iter().any(|f| f.contains(['\t', '\n', '\r'])) {
                return Err(Error::Format(format!("segment {} has a tab or line break in a text", seg.id)));
            }
            writeln!(w, "{}", fields.join("\t")).map_err(|e| Error::Format(e.to_string()))?;
        }
    }
    Ok(schema)
}

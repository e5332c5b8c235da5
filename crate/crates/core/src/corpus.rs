//! Segment data model and the immutable corpus.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinal assigned at ingestion; also the tie-break key everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegmentId(pub usize);

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LangCode(String);

impl LangCode {
    pub fn new(code: &str) -> Result<Self> {
        let code = code.trim();
        if code.is_empty() || code.chars().any(char::is_whitespace) {
            return Err(Error::InvalidSegment(format!("invalid language code {code:?}")));
        }
        Ok(LangCode(code.into()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LangCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentState {
    Pending,
    InProgress,
    PostEdited,
    AutoClosed,
}

impl SegmentState {
    pub fn name(self) -> &'static str {
        match self {
            SegmentState::Pending => "Pending",
            SegmentState::InProgress => "InProgress",
            SegmentState::PostEdited => "PostEdited",
            SegmentState::AutoClosed => "AutoClosed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub origin: String,
    pub text: String,
    /// Pre-collected post-edit used by the simulated linguist. Never shown
    /// to the estimator before the corresponding event.
    pub gold_post_edit: Option<String>,
}

impl Hypothesis {
    pub fn new(origin: impl Into<String>, text: impl Into<String>) -> Self {
        Hypothesis {
            origin: origin.into(),
            text: text.into(),
            gold_post_edit: None,
        }
    }

    pub fn with_gold(mut self, post_edit: impl Into<String>) -> Self {
        self.gold_post_edit = Some(post_edit.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostEditRecord {
    pub hypothesis_index: usize,
    pub edited_text: String,
    pub editor_id: String,
    pub realized_ter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: SegmentId,
    pub source_text: String,
    pub source_lang: LangCode,
    pub target_lang: LangCode,
    pub hypotheses: Vec<Hypothesis>,
    pub reference: Option<String>,
    pub state: SegmentState,
    pub post_edit: Option<PostEditRecord>,
    /// Hypothesis shown for this segment: designated for editing while in
    /// progress, kept as final text when auto-closed.
    pub selected: usize,
}

impl Segment {
    pub fn new(
        id: SegmentId,
        source_text: impl Into<String>,
        source_lang: LangCode,
        target_lang: LangCode,
        hypotheses: Vec<Hypothesis>,
        reference: Option<String>,
    ) -> Result<Self> {
        let seg = Segment {
            id,
            source_text: source_text.into(),
            source_lang,
            target_lang,
            hypotheses,
            reference,
            state: SegmentState::Pending,
            post_edit: None,
            selected: 0,
        };
        seg.validate()?;
        Ok(seg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidSegment(format!("segment {}: {msg}", self.id)));
        if self.hypotheses.is_empty() {
            return fail("no hypotheses");
        }
        if self.source_lang == self.target_lang {
            return fail("source and target language are equal");
        }
        if (self.state == SegmentState::PostEdited) != self.post_edit.is_some() {
            return fail("post-edit present iff state is PostEdited");
        }
        if self.selected >= self.hypotheses.len() {
            return fail("selected hypothesis out of range");
        }
        if let Some(pe) = &self.post_edit {
            if pe.hypothesis_index >= self.hypotheses.len() {
                return fail("post-edit hypothesis index out of range");
            }
            if !(pe.realized_ter >= 0.0) {
                return fail("negative realized TER");
            }
        }
        Ok(())
    }

    /// Text that currently stands for this segment in the corpus.
    pub fn current_text(&self) -> &str {
        match &self.post_edit {
            Some(pe) => &pe.edited_text,
            None => &self.hypotheses[self.selected].text,
        }
    }
}

/// Segments as ingested. Ids are the ordinals `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    segments: Vec<Segment>,
}

impl Corpus {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        for (i, seg) in segments.iter().enumerate() {
            if seg.id != SegmentId(i) {
                return Err(Error::InvalidSegment(format!(
                    "segment at position {i} has id {}",
                    seg.id
                )));
            }
            seg.validate()?;
        }
        Ok(Corpus { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn get(&self, id: SegmentId) -> Option<&Segment> {
        self.segments.get(id.0)
    }

    /// Distinct target languages in sorted order.
    pub fn target_languages(&self) -> Vec<LangCode> {
        let set: BTreeSet<&LangCode> = self.segments.iter().map(|s| &s.target_lang).collect();
        set.into_iter().cloned().collect()
    }

    pub fn into_segments(self) -> Vec<Segment> {
        self.segments
    }
}

/// One accepted post-edit as written to the journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostEditEvent {
    pub seq: u64,
    pub segment_id: SegmentId,
    pub hypothesis_index: usize,
    pub editor_id: String,
    /// Estimate made before the model saw this sample.
    pub blind_prediction: f64,
    pub realized_target: f64,
    pub edited_text: String,
    /// Milliseconds since the Unix epoch; 0 in simulated runs.
    pub wall_time: u64,
}

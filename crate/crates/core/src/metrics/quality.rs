use crate::corpus::Segment;
use crate::error::{Error, Result};

use super::ter::ter_text;

/// `100 * (1 - TER)` of a text against its reference, floored at 0.
pub fn segment_quality(text: &str, reference: &str) -> Result<f64> {
    let t = ter_text(text, reference)?;
    Ok((100.0 * (1.0 - t.score)).max(0.0))
}

/// Mean [`segment_quality`] over the current text of every segment.
pub fn corpus_quality(segments: &[Segment]) -> Result<f64> {
    if segments.is_empty() {
        return Err(crate::error::Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut total = 0.0;
    for seg in segments {
        let reference = seg.reference.as_deref().ok_or(Error::MissingReference(seg.id.0))?;
        total += segment_quality(seg.current_text(), reference)?;
    }
    Ok(total / segments.len() as f64)
}

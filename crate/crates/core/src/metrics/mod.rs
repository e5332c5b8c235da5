//! Ground-truth measurement: tokenization, word edit distance, TER with
//! block shifts, corpus quality, and regression/ranking statistics.

mod edit;
mod quality;
mod stats;
mod ter;
mod tokenize;

pub use self::edit::edit_distance;
pub use self::quality::{corpus_quality, segment_quality};
pub use self::stats::{eval_stats, kendall_tau_b, pearson, ranks, spearman, EvalStats};
pub use self::ter::{realized_ter, ter, ter_text, EditBreakdown, TerResult, MAX_SHIFT_LENGTH};
pub use self::tokenize::{is_punctuation, tokenize, TokenSequence};

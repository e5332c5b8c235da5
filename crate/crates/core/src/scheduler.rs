//! Post-editing queue driven by the online estimator.
//!
//! [`Scheduler`] owns the live segments, the learner and the queue. Serving
//! ([`Scheduler::next`]) and completing ([`Scheduler::complete`]) are the
//! only state transitions; callers that share a scheduler across threads
//! must serialize them.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, PostEditEvent, PostEditRecord, Segment, SegmentId, SegmentState};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, Featurizer};
use crate::learner::{EstimatorModel, Hyperparams, OnlineLearner};
use crate::metrics::{realized_ter, ter_text, EvalStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Highest predicted TER first.
    Estimator,
    /// Uniform over pending segments, driven by the configured seed.
    Random,
    /// Highest true TER against the reference first. Evaluation only.
    Oracle,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Estimator => "estimator",
            Policy::Random => "random",
            Policy::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Option<Policy> {
        match s {
            "estimator" => Some(Policy::Estimator),
            "random" => Some(Policy::Random),
            "oracle" => Some(Policy::Oracle),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulerConfig {
    pub policy: Policy,
    pub seed: u64,
    /// Post-edits served at random before the estimator takes over; auto-close
    /// and sanity flags stay off until the model has seen this many.
    pub warmup: u64,
    pub sanity_threshold: f64,
    /// Pending segments predicted below this TER are closed without editing.
    pub auto_close_threshold: Option<f64>,
    /// Rescore pending keys after every `rescore_interval` training steps.
    pub rescore_interval: u64,
    pub hyperparams: Hyperparams,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            policy: Policy::Estimator,
            seed: 0,
            warmup: 25,
            sanity_threshold: 0.35,
            auto_close_threshold: None,
            rescore_interval: 1,
            hyperparams: Hyperparams::default(),
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rescore_interval == 0 {
            return Err(Error::Config("rescore interval must be at least 1".into()));
        }
        if !(self.sanity_threshold >= 0.0) || !self.sanity_threshold.is_finite() {
            return Err(Error::Config("sanity threshold must be finite and non-negative".into()));
        }
        if let Some(t) = self.auto_close_threshold {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::Config("auto-close threshold must be finite and non-negative".into()));
            }
        }
        let h = &self.hyperparams;
        if !(h.learning_rate > 0.0) || !(h.epsilon > 0.0) || !(h.clamp_min < h.clamp_max) {
            return Err(Error::Config("invalid learner hyperparameters".into()));
        }
        Ok(())
    }
}

/// Advisory alert: the realized TER is far from the blind estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanityFlag {
    pub seq: u64,
    pub segment_id: SegmentId,
    pub editor_id: String,
    pub blind_prediction: f64,
    pub realized_ter: f64,
    pub discrepancy: f64,
    pub threshold: f64,
}

/// A served segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub segment_id: SegmentId,
    /// Hypothesis designated for editing.
    pub hypothesis_index: usize,
    /// Current estimate for the designated hypothesis.
    pub predicted_ter: f64,
    /// Key the segment was ranked by under the active policy.
    pub priority: f64,
    /// Pending segments left after this one was taken.
    pub remaining: usize,
    /// Chosen at random because the estimator is still warming up.
    pub warmup: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub event: PostEditEvent,
    pub flag: Option<SanityFlag>,
    pub auto_closed: Vec<SegmentId>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateCounts {
    pub pending: usize,
    pub in_progress: usize,
    pub post_edited: usize,
    pub auto_closed: usize,
}

impl StateCounts {
    pub fn total(&self) -> usize {
        self.pending + self.in_progress + self.post_edited + self.auto_closed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueState {
    pub pending: Vec<(SegmentId, f64)>,
    pub in_progress: Vec<SegmentId>,
    pub auto_closed: Vec<SegmentId>,
    pub rescores: u64,
}

/// TER of every hypothesis against its segment's reference. Present only
/// when every segment has a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthTable {
    ter: Vec<Vec<f64>>,
}

impl TruthTable {
    pub fn compute(corpus: &Corpus) -> Result<Self> {
        let mut ter = Vec::with_capacity(corpus.len());
        for seg in corpus.segments() {
            let reference = seg.reference.as_deref().ok_or(Error::MissingReference(seg.id.0))?;
            let row = seg
                .hypotheses
                .iter()
                .map(|h| ter_text(&h.text, reference).map(|t| t.score))
                .collect::<Result<Vec<_>>>()?;
            ter.push(row);
        }
        Ok(TruthTable { ter })
    }

    pub fn get(&self, segment: SegmentId, hypothesis: usize) -> f64 {
        self.ter[segment.0][hypothesis]
    }
}

fn quality_of(ter: f64) -> f64 {
    (100.0 * (1.0 - ter)).max(0.0)
}

/// Index of the first maximum (or minimum with `min`) of `values`.
fn arg_extreme(values: &[f64], min: bool) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if (min && v < values[best]) || (!min && v > values[best]) {
            best = i;
        }
    }
    best
}

/// Segment with the highest key; ties go to the lowest id.
pub fn pick_max(keys: impl IntoIterator<Item = (SegmentId, f64)>) -> Option<(SegmentId, f64)> {
    let mut best: Option<(SegmentId, f64)> = None;
    for (id, key) in keys {
        let better = match best {
            None => true,
            Some((bid, bkey)) => key > bkey || (key == bkey && id < bid),
        };
        if better {
            best = Some((id, key));
        }
    }
    best
}

fn max_of(values: &[f64]) -> f64 {
    values[arg_extreme(values, false)]
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    config: SchedulerConfig,
    segments: Vec<Segment>,
    features: Vec<Vec<FeatureVector>>,
    truth: Option<Arc<TruthTable>>,
    /// Per-segment `100 * (1 - TER)` of the current text, when references exist.
    quality: Option<Vec<f64>>,
    learner: OnlineLearner,
    predictions: Vec<Vec<f64>>,
    pending: BTreeSet<SegmentId>,
    rng: ChaCha8Rng,
    flags: Vec<SanityFlag>,
    seq: u64,
    rescores: u64,
}

impl Scheduler {
    pub fn new(corpus: &Corpus, featurizer: &Featurizer, config: SchedulerConfig) -> Result<Self> {
        let truth = if corpus.segments().iter().all(|s| s.reference.is_some()) {
            Some(Arc::new(TruthTable::compute(corpus)?))
        } else {
            None
        };
        Self::with_truth(corpus, featurizer, config, truth)
    }

    /// Like [`new`](Self::new) with a precomputed [`TruthTable`], which lets
    /// many runs over one corpus share the reference scoring.
    pub fn with_truth(
        corpus: &Corpus,
        featurizer: &Featurizer,
        config: SchedulerConfig,
        truth: Option<Arc<TruthTable>>,
    ) -> Result<Self> {
        config.validate()?;
        if config.policy == Policy::Oracle {
            if let Some(seg) = corpus.segments().iter().find(|s| s.reference.is_none()) {
                return Err(Error::MissingReference(seg.id.0));
            }
        }
        let mut segments = corpus.segments().to_vec();
        for seg in &mut segments {
            // ingestion hands over fresh segments; a replay starts from scratch
            seg.state = SegmentState::Pending;
            seg.post_edit = None;
            seg.selected = 0;
        }
        let features = segments
            .iter()
            .map(|s| (0..s.hypotheses.len()).map(|h| featurizer.featurize(s, h)).collect())
            .collect::<Result<Vec<Vec<_>>>>()?;
        let quality = truth
            .as_ref()
            .map(|t| segments.iter().map(|s| quality_of(t.get(s.id, 0))).collect());
        let predictions = segments.iter().map(|s| alloc::vec![0.0; s.hypotheses.len()]).collect();
        let mut scheduler = Scheduler {
            learner: OnlineLearner::new(featurizer.layout().clone(), config.hyperparams),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            pending: segments.iter().map(|s| s.id).collect(),
            config,
            segments,
            features,
            truth,
            quality,
            predictions,
            flags: Vec::new(),
            seq: 0,
            rescores: 0,
        };
        scheduler.rescore()?;
        Ok(scheduler)
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, id: SegmentId) -> Result<&Segment> {
        self.segments.get(id.0).ok_or(Error::UnknownSegment(id.0))
    }

    pub fn learner(&self) -> &OnlineLearner {
        &self.learner
    }

    pub fn flags(&self) -> &[SanityFlag] {
        &self.flags
    }

    /// Sequence number of the last completed post-edit.
    pub fn last_seq(&self) -> u64 {
        self.seq
    }

    pub fn truth(&self) -> Option<&Arc<TruthTable>> {
        self.truth.as_ref()
    }

    pub fn in_warmup(&self) -> bool {
        self.learner.model.step() < self.config.warmup
    }

    /// Latest rescored estimates for every hypothesis of a segment.
    pub fn predictions(&self, id: SegmentId) -> Result<&[f64]> {
        self.predictions
            .get(id.0)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownSegment(id.0))
    }

    pub fn counts(&self) -> StateCounts {
        let mut c = StateCounts::default();
        for s in &self.segments {
            match s.state {
                SegmentState::Pending => c.pending += 1,
                SegmentState::InProgress => c.in_progress += 1,
                SegmentState::PostEdited => c.post_edited += 1,
                SegmentState::AutoClosed => c.auto_closed += 1,
            }
        }
        c
    }

    pub fn queue_state(&self) -> QueueState {
        let ids_in = |state| self.segments.iter().filter(move |s| s.state == state).map(|s| s.id);
        QueueState {
            pending: self.pending.iter().map(|&id| (id, max_of(&self.predictions[id.0]))).collect(),
            in_progress: ids_in(SegmentState::InProgress).collect(),
            auto_closed: ids_in(SegmentState::AutoClosed).collect(),
            rescores: self.rescores,
        }
    }

    /// Mean `100 * (1 - TER)` of the current texts; `None` without references.
    pub fn corpus_quality(&self) -> Option<f64> {
        let q = self.quality.as_ref()?;
        Some(q.iter().sum::<f64>() / q.len() as f64)
    }

    pub fn prequential_stats(&self) -> Option<EvalStats> {
        self.learner.prequential_stats().ok()
    }

    /// Swaps in another estimator (same layout) and rescores the queue.
    pub fn load_model(&mut self, model: EstimatorModel) -> Result<()> {
        if model.layout() != self.learner.model.layout() {
            return Err(Error::LayoutMismatch("model layout differs from the engine's".into()));
        }
        self.learner.model = model;
        self.rescore()
    }

    /// Recomputes every pending estimate with the current model.
    fn rescore(&mut self) -> Result<()> {
        for &id in &self.pending {
            for (h, fv) in self.features[id.0].iter().enumerate() {
                self.predictions[id.0][h] = self.learner.predict(fv)?;
            }
        }
        self.rescores += 1;
        Ok(())
    }

    /// Picks the next segment under the active policy without serving it.
    /// Consumes randomness exactly as [`next`](Self::next) does.
    fn select(&mut self) -> Option<Task> {
        if self.pending.is_empty() {
            return None;
        }
        let remaining = self.pending.len() - 1;
        let warmup = self.config.policy == Policy::Estimator && self.in_warmup();
        let (id, hyp, priority) = match self.config.policy {
            Policy::Random => {
                let k = self.rng.gen_range(0..self.pending.len());
                let id = *self.pending.iter().nth(k)?;
                (id, 0, max_of(&self.predictions[id.0]))
            }
            Policy::Estimator if warmup => {
                let k = self.rng.gen_range(0..self.pending.len());
                let id = *self.pending.iter().nth(k)?;
                let p = &self.predictions[id.0];
                (id, arg_extreme(p, true), max_of(p))
            }
            Policy::Estimator => {
                let (id, key) = pick_max(self.pending.iter().map(|&id| (id, max_of(&self.predictions[id.0]))))?;
                (id, arg_extreme(&self.predictions[id.0], true), key)
            }
            Policy::Oracle => {
                let truth = self.truth.as_ref()?;
                let row = |id: SegmentId| -> Vec<f64> {
                    (0..self.segments[id.0].hypotheses.len()).map(|h| truth.get(id, h)).collect()
                };
                let (id, key) = pick_max(self.pending.iter().map(|&id| (id, max_of(&row(id)))))?;
                (id, arg_extreme(&row(id), true), key)
            }
        };
        Some(Task {
            segment_id: id,
            hypothesis_index: hyp,
            predicted_ter: self.predictions[id.0][hyp],
            priority,
            remaining,
            warmup,
        })
    }

    fn serve(&mut self, task: &Task) {
        self.pending.remove(&task.segment_id);
        let seg = &mut self.segments[task.segment_id.0];
        seg.state = SegmentState::InProgress;
        seg.selected = task.hypothesis_index;
    }

    /// Serves the highest-priority pending segment, or `None` when drained.
    pub fn next(&mut self) -> Option<Task> {
        let task = self.select()?;
        self.serve(&task);
        Some(task)
    }

    /// Serves a specific pending segment and hypothesis, bypassing the policy.
    pub fn claim(&mut self, id: SegmentId, hypothesis_index: usize) -> Result<Task> {
        let seg = self.segment(id)?;
        if seg.state != SegmentState::Pending {
            return Err(Error::WrongState {
                id: id.0,
                state: seg.state.name(),
                expected: "Pending",
            });
        }
        if hypothesis_index >= seg.hypotheses.len() {
            return Err(Error::HypothesisIndex {
                segment: id.0,
                index: hypothesis_index,
            });
        }
        let task = Task {
            segment_id: id,
            hypothesis_index,
            predicted_ter: self.predictions[id.0][hypothesis_index],
            priority: max_of(&self.predictions[id.0]),
            remaining: self.pending.len() - 1,
            warmup: false,
        };
        self.serve(&task);
        Ok(task)
    }

    /// Returns an in-progress segment to the queue (e.g. an expired lease).
    pub fn release(&mut self, id: SegmentId) -> Result<()> {
        self.expect_in_progress(id)?;
        let seg = &mut self.segments[id.0];
        seg.state = SegmentState::Pending;
        seg.selected = 0;
        self.pending.insert(id);
        for (h, fv) in self.features[id.0].iter().enumerate() {
            self.predictions[id.0][h] = self.learner.predict(fv)?;
        }
        Ok(())
    }

    fn expect_in_progress(&self, id: SegmentId) -> Result<()> {
        let seg = self.segment(id)?;
        if seg.state != SegmentState::InProgress {
            return Err(Error::WrongState {
                id: id.0,
                state: seg.state.name(),
                expected: "InProgress",
            });
        }
        Ok(())
    }

    /// Accepts a post-edit for an in-progress segment: scores it, trains the
    /// estimator on it, rescores the queue and applies auto-close.
    pub fn complete(&mut self, id: SegmentId, edited_text: &str, editor_id: &str, wall_time: u64) -> Result<Completion> {
        self.expect_in_progress(id)?;
        let hyp = self.segments[id.0].selected;
        let seg = &self.segments[id.0];
        let realized = match (&self.truth, seg.reference.as_deref()) {
            // same inputs as the cached reference score
            (Some(t), Some(r)) if r == edited_text => t.get(id, hyp),
            _ => realized_ter(&seg.hypotheses[hyp].text, edited_text),
        };
        let step_before = self.learner.model.step();
        let blind = self.learner.train_step(&self.features[id.0][hyp], realized)?;

        let quality = match (&self.quality, seg.reference.as_deref()) {
            (Some(_), Some(r)) => Some(if r == edited_text {
                100.0
            } else {
                crate::metrics::segment_quality(edited_text, r)?
            }),
            _ => None,
        };
        if let (Some(q), Some(cache)) = (quality, self.quality.as_mut()) {
            cache[id.0] = q;
        }
        let seg = &mut self.segments[id.0];
        seg.state = SegmentState::PostEdited;
        seg.post_edit = Some(PostEditRecord {
            hypothesis_index: hyp,
            edited_text: edited_text.into(),
            editor_id: editor_id.into(),
            realized_ter: realized,
        });

        self.seq += 1;
        let event = PostEditEvent {
            seq: self.seq,
            segment_id: id,
            hypothesis_index: hyp,
            editor_id: editor_id.into(),
            blind_prediction: blind,
            realized_target: realized,
            edited_text: edited_text.into(),
            wall_time,
        };
        let discrepancy = libm::fabs(blind - realized);
        let flag = (step_before >= self.config.warmup && discrepancy > self.config.sanity_threshold).then(|| SanityFlag {
            seq: self.seq,
            segment_id: id,
            editor_id: editor_id.into(),
            blind_prediction: blind,
            realized_ter: realized,
            discrepancy,
            threshold: self.config.sanity_threshold,
        });
        if let Some(f) = &flag {
            self.flags.push(f.clone());
        }

        let mut auto_closed = Vec::new();
        if self.learner.model.step().is_multiple_of(self.config.rescore_interval) {
            self.rescore()?;
            if let Some(threshold) = self.config.auto_close_threshold {
                auto_closed = self.auto_close(threshold);
            }
        }
        Ok(Completion {
            event,
            flag,
            auto_closed,
        })
    }

    /// Closes every pending segment whose best hypothesis is predicted below
    /// `threshold`. Inactive while the estimator is warming up.
    pub fn auto_close(&mut self, threshold: f64) -> Vec<SegmentId> {
        if self.in_warmup() {
            return Vec::new();
        }
        let closing: Vec<(SegmentId, usize)> = self
            .pending
            .iter()
            .filter_map(|&id| {
                let p = &self.predictions[id.0];
                let best = arg_extreme(p, true);
                (p[best] < threshold).then_some((id, best))
            })
            .collect();
        for &(id, hyp) in &closing {
            self.pending.remove(&id);
            let seg = &mut self.segments[id.0];
            seg.state = SegmentState::AutoClosed;
            seg.selected = hyp;
            if let (Some(cache), Some(truth)) = (self.quality.as_mut(), self.truth.as_ref()) {
                cache[id.0] = quality_of(truth.get(id, hyp));
            }
        }
        closing.into_iter().map(|(id, _)| id).collect()
    }

    /// Re-applies journaled post-edits to a fresh scheduler. Each event is
    /// served through the policy when it picks the same segment (so random
    /// draws line up with the original session) and claimed directly
    /// otherwise. Blind predictions must agree with the journal at the six
    /// decimals it stores.
    pub fn replay<'a>(&mut self, events: impl IntoIterator<Item = &'a PostEditEvent>) -> Result<()> {
        for event in events {
            if event.seq != self.seq + 1 {
                return Err(Error::JournalSequence {
                    expected: self.seq + 1,
                    got: event.seq,
                });
            }
            match self.select() {
                Some(t) if t.segment_id == event.segment_id && t.hypothesis_index == event.hypothesis_index => {
                    self.serve(&t);
                }
                _ => {
                    self.claim(event.segment_id, event.hypothesis_index)?;
                }
            }
            let done = self.complete(event.segment_id, &event.edited_text, &event.editor_id, event.wall_time)?;
            let (ours, theirs) = (
                format!("{:.6}", done.event.blind_prediction),
                format!("{:.6}", event.blind_prediction),
            );
            if ours != theirs {
                return Err(Error::Malformed(format!(
                    "replay diverged at seq {}: blind prediction {ours} vs journal {theirs}",
                    event.seq
                )));
            }
        }
        Ok(())
    }
}

//! Deterministic replay of pre-collected post-edits.
//!
//! A virtual linguist answers every served segment with the gold post-edit
//! of the designated hypothesis. Corpus quality is logged after each
//! post-edit; checkpoints read that curve at fixed effort percentages.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, PostEditEvent};
use crate::error::{Error, Result};
use crate::features::{EmbeddingTable, Featurizer};
use crate::learner::Hyperparams;
use crate::metrics::EvalStats;
use crate::scheduler::{Policy, Scheduler, SchedulerConfig, TruthTable};

pub const DEFAULT_CHECKPOINTS: [f64; 7] = [20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0];

pub const DEFAULT_RANDOM_SEEDS: usize = 10;

pub const VIRTUAL_LINGUIST: &str = "virtual-linguist";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Where the corpus came from (path or generator description); echoed
    /// into reports.
    pub corpus: String,
    pub policy: Policy,
    pub seed: u64,
    /// Effort percentages in (0, 100].
    pub checkpoints: Vec<f64>,
    /// Stop after this percentage of the corpus has been post-edited.
    pub effort_budget: Option<f64>,
    pub warmup: u64,
    pub sanity_threshold: f64,
    pub auto_close_threshold: Option<f64>,
    pub rescore_interval: u64,
    pub hyperparams: Hyperparams,
    /// Seeds averaged for the random baseline in comparisons.
    pub random_seeds: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SchedulerConfig::default();
        RunConfig {
            corpus: String::new(),
            policy: s.policy,
            seed: s.seed,
            checkpoints: DEFAULT_CHECKPOINTS.to_vec(),
            effort_budget: None,
            warmup: s.warmup,
            sanity_threshold: s.sanity_threshold,
            auto_close_threshold: s.auto_close_threshold,
            rescore_interval: s.rescore_interval,
            hyperparams: s.hyperparams,
            random_seeds: DEFAULT_RANDOM_SEEDS,
        }
    }
}

impl RunConfig {
    pub fn scheduler_config(&self) -> SchedulerConfig {
        SchedulerConfig {
            policy: self.policy,
            seed: self.seed,
            warmup: self.warmup,
            sanity_threshold: self.sanity_threshold,
            auto_close_threshold: self.auto_close_threshold,
            rescore_interval: self.rescore_interval,
            hyperparams: self.hyperparams,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.checkpoints.iter().any(|&p| !(p > 0.0 && p <= 100.0)) {
            return Err(Error::Config("checkpoints must lie in (0, 100]".into()));
        }
        if let Some(b) = self.effort_budget {
            if !(b > 0.0 && b <= 100.0) {
                return Err(Error::Config("effort budget must lie in (0, 100]".into()));
            }
        }
        if self.random_seeds == 0 {
            return Err(Error::Config("at least one random seed is required".into()));
        }
        self.scheduler_config().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub event: u64,
    pub pct_post_edited: f64,
    pub quality: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub pct: f64,
    /// Post-edits needed to reach `pct`.
    pub events: u64,
    /// `None` when the run stopped before that many post-edits.
    pub quality: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub engine_version: String,
    pub config: RunConfig,
    pub corpus_size: usize,
    pub corpus_fingerprint: String,
    pub layout: Vec<String>,
    pub initial_quality: f64,
    pub curve: Vec<CurvePoint>,
    pub checkpoints: Vec<Checkpoint>,
    pub prequential: Option<EvalStats>,
    pub auto_closed: usize,
    pub sanity_flags: usize,
    pub final_quality: f64,
}

impl RunReport {
    pub fn quality_at(&self, pct: f64) -> Option<f64> {
        self.checkpoints.iter().find(|c| c.pct == pct).and_then(|c| c.quality)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub events: Vec<PostEditEvent>,
    pub snapshot: String,
}

/// Number of post-edits at which `pct` percent of `n` segments is reached.
pub fn checkpoint_events(pct: f64, n: usize) -> u64 {
    libm::ceil(pct * n as f64 / 100.0) as u64
}

/// FNV-1a over every text of the corpus.
pub fn corpus_fingerprint(corpus: &Corpus) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |s: &str| {
        for b in s.bytes().chain(core::iter::once(0xff)) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for seg in corpus.segments() {
        eat(&seg.source_text);
        eat(seg.source_lang.as_str());
        eat(seg.target_lang.as_str());
        for hyp in &seg.hypotheses {
            eat(&hyp.text);
            eat(hyp.gold_post_edit.as_deref().unwrap_or(""));
        }
        eat(seg.reference.as_deref().unwrap_or(""));
    }
    format!("{h:016x}")
}

/// Checks that every segment carries what the replay needs.
pub fn validate_for_simulation(corpus: &Corpus) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    for seg in corpus.segments() {
        if seg.reference.is_none() {
            return Err(Error::MissingReference(seg.id.0));
        }
        if let Some(h) = seg.hypotheses.iter().position(|h| h.gold_post_edit.is_none()) {
            return Err(Error::MissingGoldPostEdit(seg.id.0, h));
        }
    }
    Ok(())
}

/// Shared per-corpus state for many runs.
#[derive(Debug, Clone)]
pub struct Prepared<'a> {
    corpus: &'a Corpus,
    featurizer: Featurizer,
    truth: Arc<TruthTable>,
    fingerprint: String,
}

impl<'a> Prepared<'a> {
    pub fn new(corpus: &'a Corpus, embeddings: Option<EmbeddingTable>) -> Result<Self> {
        validate_for_simulation(corpus)?;
        Ok(Prepared {
            featurizer: Featurizer::for_corpus(corpus, embeddings)?,
            truth: Arc::new(TruthTable::compute(corpus)?),
            fingerprint: corpus_fingerprint(corpus),
            corpus,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        self.corpus
    }

    pub fn featurizer(&self) -> &Featurizer {
        &self.featurizer
    }

    pub fn scheduler(&self, config: &RunConfig) -> Result<Scheduler> {
        Scheduler::with_truth(self.corpus, &self.featurizer, config.scheduler_config(), Some(self.truth.clone()))
    }

    pub fn run(&self, config: &RunConfig) -> Result<RunOutcome> {
        config.validate()?;
        let n = self.corpus.len();
        let mut scheduler = self.scheduler(config)?;
        let initial_quality = scheduler.corpus_quality().ok_or(Error::MissingReference(0))?;
        let budget = config.effort_budget.map(|b| checkpoint_events(b, n));
        let mut curve = Vec::new();
        let mut events = Vec::new();
        while budget.is_none_or(|b| (events.len() as u64) < b) {
            let Some(task) = scheduler.next() else { break };
            let seg = &self.corpus.segments()[task.segment_id.0];
            let gold = seg.hypotheses[task.hypothesis_index]
                .gold_post_edit
                .clone()
                .ok_or(Error::MissingGoldPostEdit(seg.id.0, task.hypothesis_index))?;
            let done = scheduler.complete(task.segment_id, &gold, VIRTUAL_LINGUIST, 0)?;
            let event = done.event.seq;
            events.push(done.event);
            curve.push(CurvePoint {
                event,
                pct_post_edited: 100.0 * event as f64 / n as f64,
                quality: scheduler.corpus_quality().ok_or(Error::MissingReference(0))?,
            });
        }
        Ok(self.finish(config, &scheduler, initial_quality, curve, events))
    }

    /// Rebuilds the outcome of a journaled run by replaying its events
    /// through a fresh engine.
    pub fn replay(&self, config: &RunConfig, events: &[PostEditEvent]) -> Result<RunOutcome> {
        config.validate()?;
        let n = self.corpus.len();
        let mut scheduler = self.scheduler(config)?;
        let initial_quality = scheduler.corpus_quality().ok_or(Error::MissingReference(0))?;
        let mut curve = Vec::with_capacity(events.len());
        for event in events {
            scheduler.replay(core::iter::once(event))?;
            curve.push(CurvePoint {
                event: event.seq,
                pct_post_edited: 100.0 * event.seq as f64 / n as f64,
                quality: scheduler.corpus_quality().ok_or(Error::MissingReference(0))?,
            });
        }
        Ok(self.finish(config, &scheduler, initial_quality, curve, events.to_vec()))
    }

    fn finish(
        &self,
        config: &RunConfig,
        scheduler: &Scheduler,
        initial_quality: f64,
        curve: Vec<CurvePoint>,
        events: Vec<PostEditEvent>,
    ) -> RunOutcome {
        let n = self.corpus.len();
        let checkpoints = config
            .checkpoints
            .iter()
            .map(|&pct| {
                let k = checkpoint_events(pct, n);
                let quality = match k {
                    0 => Some(initial_quality),
                    k => curve.get(k as usize - 1).map(|p| p.quality),
                };
                Checkpoint { pct, events: k, quality }
            })
            .collect();
        let counts = scheduler.counts();
        let report = RunReport {
            engine_version: crate::ENGINE_VERSION.into(),
            config: config.clone(),
            corpus_size: n,
            corpus_fingerprint: self.fingerprint.clone(),
            layout: self.featurizer.layout().slots().to_vec(),
            initial_quality,
            final_quality: curve.last().map_or(initial_quality, |p| p.quality),
            curve,
            checkpoints,
            prequential: scheduler.prequential_stats(),
            auto_closed: counts.auto_closed,
            sanity_flags: scheduler.flags().len(),
        };
        RunOutcome {
            report,
            events,
            snapshot: scheduler.learner().model.snapshot(),
        }
    }

    /// Runs every config (random ones over `random_seeds` consecutive seeds)
    /// and aligns their checkpoint tables.
    pub fn compare(&self, configs: &[RunConfig]) -> Result<ComparisonReport> {
        let mut groups = Vec::new();
        for config in configs {
            let seeds = match config.policy {
                Policy::Random => config.random_seeds,
                _ => 1,
            };
            let mut runs = Vec::with_capacity(seeds);
            for i in 0..seeds as u64 {
                let mut c = config.clone();
                c.seed = config.seed + i;
                runs.push(self.run(&c)?.report);
            }
            groups.push(runs);
        }
        ComparisonReport::from_runs(groups)
    }
}

/// Runs one simulation over `corpus`.
pub fn run(corpus: &Corpus, embeddings: Option<EmbeddingTable>, config: &RunConfig) -> Result<RunOutcome> {
    Prepared::new(corpus, embeddings)?.run(config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub policy: Policy,
    pub seeds: Vec<u64>,
    /// Quality per checkpoint, averaged over seeds.
    pub quality: Vec<Option<f64>>,
    /// `(row - baseline) / baseline * 100` per checkpoint.
    pub delta_pct: Vec<Option<f64>>,
    /// Per-seed quality, one row per seed.
    pub per_seed: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub corpus_fingerprint: String,
    pub corpus_size: usize,
    pub checkpoints: Vec<f64>,
    /// Label of the row deltas are measured against: the first random row,
    /// or the first row when no random baseline is present.
    pub baseline: String,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    /// Aligns groups of reports; each group becomes one (seed-averaged) row.
    pub fn from_runs(groups: Vec<Vec<RunReport>>) -> Result<Self> {
        let first = groups
            .iter()
            .flatten()
            .next()
            .ok_or(Error::InsufficientSamples { needed: 1, got: 0 })?;
        let fingerprint = first.corpus_fingerprint.clone();
        let corpus_size = first.corpus_size;
        let checkpoints = first.config.checkpoints.clone();
        for r in groups.iter().flatten() {
            if r.corpus_fingerprint != fingerprint {
                return Err(Error::Config("compared runs use different corpora".into()));
            }
            if r.config.checkpoints != checkpoints {
                return Err(Error::Config("compared runs use different checkpoints".into()));
            }
        }
        let mut rows: Vec<ComparisonRow> = groups
            .into_iter()
            .filter(|g| !g.is_empty())
            .map(|runs| {
                let per_seed: Vec<Vec<Option<f64>>> = runs
                    .iter()
                    .map(|r| r.checkpoints.iter().map(|c| c.quality).collect())
                    .collect();
                let quality = (0..checkpoints.len())
                    .map(|i| {
                        let vals: Option<Vec<f64>> = per_seed.iter().map(|row| row[i]).collect();
                        vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
                    })
                    .collect();
                let policy = runs[0].config.policy;
                let label = match policy {
                    Policy::Random if runs.len() > 1 => format!("random (mean of {})", runs.len()),
                    p => String::from(p.name()),
                };
                ComparisonRow {
                    label,
                    policy,
                    seeds: runs.iter().map(|r| r.config.seed).collect(),
                    quality,
                    delta_pct: Vec::new(),
                    per_seed,
                }
            })
            .collect();
        let base = rows.iter().position(|r| r.policy == Policy::Random).unwrap_or(0);
        let baseline_quality = rows[base].quality.clone();
        for row in &mut rows {
            row.delta_pct = row
                .quality
                .iter()
                .zip(&baseline_quality)
                .map(|(q, b)| match (q, b) {
                    (Some(q), Some(b)) if *b != 0.0 => Some(delta_pct(*q, *b)),
                    _ => None,
                })
                .collect();
        }
        Ok(ComparisonReport {
            corpus_fingerprint: fingerprint,
            corpus_size,
            checkpoints,
            baseline: rows[base].label.clone(),
            rows,
        })
    }

    pub fn row(&self, policy: Policy) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.policy == policy)
    }
}

/// Relative gain of `value` over `baseline`, in percent.
pub fn delta_pct(value: f64, baseline: f64) -> f64 {
    (value - baseline) / baseline * 100.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_rounds_up() {
        assert_eq!(checkpoint_events(20.0, 2000), 400);
        assert_eq!(checkpoint_events(30.0, 7), 3);
        assert_eq!(checkpoint_events(100.0, 7), 7);
        assert_eq!(checkpoint_events(50.0, 1), 1);
    }

    #[test]
    fn delta_matches_reported_gain() {
        // 80.92 vs 74.89 at half effort
        let d = delta_pct(80.92, 74.89);
        assert_eq!(format!("{d:.2}"), "8.05");
        assert_eq!(delta_pct(60.0, 60.0), 0.0);
    }

    #[test]
    fn config_validation() {
        let mut c = RunConfig::default();
        c.validate().unwrap();
        c.checkpoints = alloc::vec![0.0];
        assert!(c.validate().is_err());
        c.checkpoints = alloc::vec![50.0];
        c.rescore_interval = 0;
        assert!(c.validate().is_err());
    }
}

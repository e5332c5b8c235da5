//! Referenceless quality estimator: a linear model over standardized
//! features, trained one post-edit at a time with per-coordinate adaptive
//! step sizes on squared loss.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureLayout, FeatureVector};
use crate::metrics::{eval_stats, EvalStats};

/// Features whose running variance is below this pass through unscaled.
pub const VARIANCE_FLOOR: f64 = 1e-12;

const SNAPSHOT_HEADER: &str = "pedal-snapshot v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub epsilon: f64,
    pub clamp_min: f64,
    pub clamp_max: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.1,
            epsilon: 1e-8,
            clamp_min: 0.0,
            clamp_max: 2.0,
        }
    }
}

/// Running per-feature mean and population variance (Welford).
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Standardizer {
    pub fn new(len: usize) -> Self {
        Standardizer {
            count: 0,
            mean: alloc::vec![0.0; len],
            m2: alloc::vec![0.0; len],
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    pub fn variance(&self, i: usize) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m2[i] / self.count as f64
        }
    }

    pub fn update(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for (i, &v) in x.iter().enumerate() {
            let delta = v - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (v - self.mean[i]);
        }
    }

    pub fn scale_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(x.iter().enumerate().map(|(i, &v)| {
            let var = self.variance(i);
            if var < VARIANCE_FLOOR {
                v
            } else {
                (v - self.mean[i]) / libm::sqrt(var)
            }
        }));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorModel {
    layout: FeatureLayout,
    hyper: Hyperparams,
    /// One weight per slot followed by the bias.
    weights: Vec<f64>,
    grad_accum: Vec<f64>,
    standardizer: Standardizer,
    step: u64,
}

impl EstimatorModel {
    pub fn new(layout: FeatureLayout, hyper: Hyperparams) -> Self {
        let n = layout.len();
        EstimatorModel {
            layout,
            hyper,
            weights: alloc::vec![0.0; n + 1],
            grad_accum: alloc::vec![0.0; n + 1],
            standardizer: Standardizer::new(n),
            step: 0,
        }
    }

    /// Untrained model with preset weights (one per slot, then the bias).
    pub fn with_weights(layout: FeatureLayout, hyper: Hyperparams, weights: Vec<f64>) -> Result<Self> {
        let mut model = Self::new(layout, hyper);
        if weights.len() != model.weights.len() {
            return Err(Error::LengthMismatch {
                expected: model.weights.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("weights"));
        }
        model.weights = weights;
        Ok(model)
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.layout.len() {
            return Err(Error::LengthMismatch {
                expected: self.layout.len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn raw_score(&self, z: &[f64]) -> f64 {
        let n = z.len();
        let dot: f64 = self.weights[..n].iter().zip(z).map(|(w, v)| w * v).sum();
        self.weights[n] + dot
    }

    /// Estimated TER, clamped to the configured range.
    pub fn predict(&self, features: &FeatureVector) -> Result<f64> {
        self.predict_values(features.values())
    }

    pub fn predict_values(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let mut z = Vec::with_capacity(x.len());
        self.standardizer.scale_into(x, &mut z);
        Ok(self.raw_score(&z).clamp(self.hyper.clamp_min, self.hyper.clamp_max))
    }

    /// One prequential step. Returns the prediction made before any state
    /// changed; on error the model is left untouched.
    pub fn train(&mut self, features: &FeatureVector, target: f64) -> Result<f64> {
        self.train_values(features.values(), target)
    }

    pub fn train_values(&mut self, x: &[f64], target: f64) -> Result<f64> {
        self.check(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        if !target.is_finite() || target < 0.0 {
            return Err(Error::InvalidTarget(target));
        }
        let blind = self.predict_values(x)?;

        self.standardizer.update(x);
        let mut z = Vec::with_capacity(x.len());
        self.standardizer.scale_into(x, &mut z);
        let residual = self.raw_score(&z) - target;
        let n = z.len();
        for i in 0..=n {
            let g = if i < n { residual * z[i] } else { residual };
            self.grad_accum[i] += g * g;
            self.weights[i] -= self.hyper.learning_rate * g / libm::sqrt(self.grad_accum[i] + self.hyper.epsilon);
        }
        self.step += 1;
        Ok(blind)
    }

    /// Versioned text blob holding layout, hyperparameters and all state.
    /// Reals are stored as IEEE-754 bit patterns so restore is exact.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{SNAPSHOT_HEADER}");
        let _ = writeln!(out, "engine {}", crate::ENGINE_VERSION);
        let _ = writeln!(out, "slots {}", self.layout.len());
        for slot in self.layout.slots() {
            let _ = writeln!(out, "slot {slot}");
        }
        let h = &self.hyper;
        let _ = writeln!(out, "learning_rate {}", hex(h.learning_rate));
        let _ = writeln!(out, "epsilon {}", hex(h.epsilon));
        let _ = writeln!(out, "clamp {} {}", hex(h.clamp_min), hex(h.clamp_max));
        let _ = writeln!(out, "step {}", self.step);
        write_row(&mut out, "weights", &self.weights);
        write_row(&mut out, "grad_accum", &self.grad_accum);
        let _ = writeln!(out, "std_count {}", self.standardizer.count);
        write_row(&mut out, "std_mean", &self.standardizer.mean);
        write_row(&mut out, "std_m2", &self.standardizer.m2);
        out
    }

    pub fn restore(blob: &str) -> Result<Self> {
        let mut lines = blob.lines();
        if lines.next() != Some(SNAPSHOT_HEADER) {
            return Err(Error::Malformed("missing snapshot header".into()));
        }
        let mut field = |name: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| Error::Malformed(format!("snapshot ends before {name}")))?;
            match line.split_once(' ') {
                Some((key, rest)) if key == name => Ok(rest.to_string()),
                None if line == name => Ok(String::new()),
                _ => Err(Error::Malformed(format!("expected {name}, found {line:?}"))),
            }
        };
        field("engine")?;
        let n: usize = parse_int(&field("slots")?)?;
        let mut slots = Vec::with_capacity(n);
        for _ in 0..n {
            slots.push(field("slot")?);
        }
        let learning_rate = unhex(&field("learning_rate")?)?;
        let epsilon = unhex(&field("epsilon")?)?;
        let clamp = parse_row(&field("clamp")?, 2)?;
        let step: u64 = parse_int(&field("step")?)?;
        let weights = parse_row(&field("weights")?, n + 1)?;
        let grad_accum = parse_row(&field("grad_accum")?, n + 1)?;
        let count: u64 = parse_int(&field("std_count")?)?;
        let mean = parse_row(&field("std_mean")?, n)?;
        let m2 = parse_row(&field("std_m2")?, n)?;
        if count != step {
            return Err(Error::Malformed("standardizer count differs from step".into()));
        }
        if grad_accum.iter().any(|&g| g < 0.0) {
            return Err(Error::Malformed("negative gradient accumulator".into()));
        }
        Ok(EstimatorModel {
            layout: FeatureLayout::from_slots(slots),
            hyper: Hyperparams {
                learning_rate,
                epsilon,
                clamp_min: clamp[0],
                clamp_max: clamp[1],
            },
            weights,
            grad_accum,
            standardizer: Standardizer { count, mean, m2 },
            step,
        })
    }

    /// [`restore`](Self::restore), requiring the blob's layout to equal `layout`.
    pub fn restore_for(blob: &str, layout: &FeatureLayout) -> Result<Self> {
        let model = Self::restore(blob)?;
        if model.layout != *layout {
            return Err(Error::LayoutMismatch(format!(
                "snapshot has {} slots, engine expects {}",
                model.layout.len(),
                layout.len()
            )));
        }
        Ok(model)
    }
}

fn hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

fn unhex(s: &str) -> Result<f64> {
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| Error::Malformed(format!("bad real {s:?}")))
}

fn parse_int<T: core::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Malformed(format!("bad integer {s:?}")))
}

fn write_row(out: &mut String, name: &str, values: &[f64]) {
    out.push_str(name);
    for v in values {
        out.push(' ');
        out.push_str(&hex(*v));
    }
    out.push('\n');
}

fn parse_row(s: &str, len: usize) -> Result<Vec<f64>> {
    let row = s.split_whitespace().map(unhex).collect::<Result<Vec<_>>>()?;
    if row.len() != len {
        return Err(Error::LayoutMismatch(format!("expected {len} values, found {}", row.len())));
    }
    Ok(row)
}

/// Blind predictions paired with the targets that arrived afterwards.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrequentialLog {
    entries: Vec<(f64, f64)>,
}

impl PrequentialLog {
    pub fn push(&mut self, blind_prediction: f64, target: f64) {
        self.entries.push((blind_prediction, target));
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn stats(&self) -> Result<EvalStats> {
        let (p, t): (Vec<f64>, Vec<f64>) = self.entries.iter().copied().unzip();
        eval_stats(&p, &t)
    }
}

/// Estimator plus its prequential log.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineLearner {
    pub model: EstimatorModel,
    pub log: PrequentialLog,
}

impl OnlineLearner {
    pub fn new(layout: FeatureLayout, hyper: Hyperparams) -> Self {
        OnlineLearner {
            model: EstimatorModel::new(layout, hyper),
            log: PrequentialLog::default(),
        }
    }

    pub fn predict(&self, features: &FeatureVector) -> Result<f64> {
        self.model.predict(features)
    }

    /// Trains on one sample and logs `(blind prediction, target)`.
    pub fn train_step(&mut self, features: &FeatureVector, target: f64) -> Result<f64> {
        let blind = self.model.train(features, target)?;
        self.log.push(blind, target);
        Ok(blind)
    }

    pub fn prequential_stats(&self) -> Result<EvalStats> {
        self.log.stats()
    }
}

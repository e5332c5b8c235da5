use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};

/// Regression and ranking agreement between predictions and targets.
/// Correlations are `None` when fewer than two samples exist or one side
/// is constant.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalStats {
    pub n: usize,
    pub mae: f64,
    pub mse: f64,
    pub spearman_rho: Option<f64>,
    pub pearson_r: Option<f64>,
    pub kendall_tau: Option<f64>,
}

pub fn eval_stats(predictions: &[f64], targets: &[f64]) -> Result<EvalStats> {
    if predictions.len() != targets.len() {
        return Err(Error::LengthMismatch {
            expected: predictions.len(),
            got: targets.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if predictions.iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("evaluation input"));
    }
    let n = predictions.len() as f64;
    let (abs, sq) = predictions
        .iter()
        .zip(targets)
        .fold((0.0, 0.0), |(a, s), (p, t)| {
            let e = p - t;
            (a + libm::fabs(e), s + e * e)
        });
    Ok(EvalStats {
        n: predictions.len(),
        mae: abs / n,
        mse: sq / n,
        spearman_rho: spearman(predictions, targets),
        pearson_r: pearson(predictions, targets),
        kendall_tau: kendall_tau_b(predictions, targets),
    })
}

/// Pearson correlation with population moments.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Fractional ranks starting at 1; tied values share their average rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) hold ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            out[k] = avg;
        }
        i = j;
    }
    out
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&ranks(x), &ranks(y))
}

/// Kendall tau-b, O(n log n) via merge-sort inversion counting.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len();
    // adding 0.0 folds -0.0 into 0.0 so total_cmp agrees with ==
    let mut pairs: Vec<(f64, f64)> = x.iter().zip(y).map(|(a, b)| (a + 0.0, b + 0.0)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let total = (n * (n - 1) / 2) as u64;
    let x_ties = tie_pairs(pairs.iter().map(|p| p.0));
    let joint_ties = {
        let mut t = 0u64;
        let mut run = 1u64;
        for w in pairs.windows(2) {
            if w[0] == w[1] {
                run += 1;
            } else {
                t += run * (run - 1) / 2;
                run = 1;
            }
        }
        t + run * (run - 1) / 2
    };

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = alloc::vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);
    let y_ties = tie_pairs(ys.iter().copied());

    let denom_x = total - x_ties;
    let denom_y = total - y_ties;
    if denom_x == 0 || denom_y == 0 {
        return None;
    }
    // concordant - discordant
    let numer = total as f64 - x_ties as f64 - y_ties as f64 + joint_ties as f64 - 2.0 * swaps as f64;
    Some((numer / libm::sqrt(denom_x as f64 * denom_y as f64)).clamp(-1.0, 1.0))
}

fn tie_pairs(sorted: impl Iterator<Item = f64>) -> u64 {
    let mut t = 0u64;
    let mut run = 0u64;
    let mut prev: Option<f64> = None;
    for v in sorted {
        if prev == Some(v) {
            run += 1;
        } else {
            t += run * run.saturating_sub(1) / 2;
            run = 1;
        }
        prev = Some(v);
    }
    t + run * run.saturating_sub(1) / 2
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j].total_cmp(&v[i]) == Ordering::Less {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

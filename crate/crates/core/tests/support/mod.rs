//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

/// Plain recursive edit distance with memoization (no rolling rows).
pub fn edit_distance_memo<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(a: &[T], b: &[T], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo.insert((i, j), v);
        v
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

/// Every sequence reachable from `seq` by moving one contiguous block to a
/// different position.
pub fn all_block_moves(seq: &[u8]) -> Vec<Vec<u8>> {
    let n = seq.len();
    let mut out = Vec::new();
    for start in 0..n {
        for end in start + 1..=n {
            let block = &seq[start..end];
            let rest: Vec<u8> = seq[..start].iter().chain(&seq[end..]).copied().collect();
            for dest in 0..=rest.len() {
                if dest == start {
                    continue;
                }
                let mut v = rest[..dest].to_vec();
                v.extend_from_slice(block);
                v.extend_from_slice(&rest[dest..]);
                out.push(v);
            }
        }
    }
    out
}

/// Minimum over all shift sequences of length <= `depth` of
/// `shifts + edit_distance(shifted, reference)`.
pub fn exhaustive_ter_edits(hyp: &[u8], reference: &[u8], depth: usize) -> usize {
    let mut best = edit_distance_memo(hyp, reference);
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    seen.insert(hyp.to_vec());
    let mut frontier = vec![hyp.to_vec()];
    for k in 1..=depth {
        let mut next = Vec::new();
        for s in &frontier {
            for m in all_block_moves(s) {
                if seen.insert(m.clone()) {
                    best = best.min(k + edit_distance_memo(&m, reference));
                    next.push(m);
                }
            }
        }
        frontier = next;
    }
    best
}

/// Kendall tau-b by enumerating every pair.
pub fn kendall_brute(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = (x[i] - x[j]).signum() as i64 * i64::from(x[i] != x[j]);
            let dy = (y[i] - y[j]).signum() as i64 * i64::from(y[i] != y[j]);
            match (dx, dy) {
                (0, 0) => {}
                (0, _) => tx += 1,
                (_, 0) => ty += 1,
                _ if dx == dy => conc += 1,
                _ => disc += 1,
            }
        }
    }
    let denom = (((conc + disc + tx) * (conc + disc + ty)) as f64).sqrt();
    if denom == 0.0 {
        None
    } else {
        Some((conc - disc) as f64 / denom)
    }
}

/// Two-pass population mean and variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

use pedal_core::{Corpus, Hypothesis, LangCode, Segment, SegmentId};

pub fn lang(code: &str) -> LangCode {
    LangCode::new(code).unwrap()
}

/// Single-hypothesis corpus from `(source, hypothesis, reference)` rows;
/// gold post-edits equal references.
pub fn corpus_from(rows: &[(&str, &str, &str)]) -> Corpus {
    let segments = rows
        .iter()
        .enumerate()
        .map(|(i, (src, hyp, reference))| {
            Segment::new(
                SegmentId(i),
                *src,
                lang("de"),
                lang("en"),
                vec![Hypothesis::new("mt", *hyp).with_gold(*reference)],
                Some(reference.to_string()),
            )
            .unwrap()
        })
        .collect();
    Corpus::new(segments).unwrap()
}

/// Hypothesis text with `n` tokens.
pub fn words(n: usize) -> String {
    (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
}

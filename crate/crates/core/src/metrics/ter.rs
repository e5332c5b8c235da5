use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::tokenize::{tokenize, TokenSequence};
use crate::error::{Error, Result};

/// Longest block considered for a single shift.
pub const MAX_SHIFT_LENGTH: usize = 10;
/// Candidate moves the exact refinement may examine per call.
pub const SEARCH_BUDGET: usize = 1 << 16;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EditBreakdown {
    /// Reference words missing from the hypothesis.
    pub insertions: usize,
    /// Hypothesis words absent from the reference.
    pub deletions: usize,
    pub substitutions: usize,
    pub shifts: usize,
}

impl EditBreakdown {
    pub fn total(&self) -> usize {
        self.insertions + self.deletions + self.substitutions + self.shifts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TerResult {
    pub edits: usize,
    pub ref_length: usize,
    pub score: f64,
    pub breakdown: EditBreakdown,
}

/// Translation error rate of `hypothesis` against `reference`.
///
/// Greedy shift search first: at every round the single block shift that
/// lowers the edit distance the most is applied and counted as one edit,
/// until no shift lowers it. Blocks are at most [`MAX_SHIFT_LENGTH`] tokens
/// long. Ties go to the leftmost block start, then the shortest block, then
/// the leftmost destination. A bounded search over shift sequences then
/// lowers the greedy total to the true minimum when it finishes in budget.
pub fn ter(hypothesis: &TokenSequence, reference: &TokenSequence) -> Result<TerResult> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    let (hyp, refr, vocab) = intern(hypothesis, reference);
    let kernel = Kernel::new(&refr, vocab);
    let greedy = greedy_shifts(&hyp, &kernel);
    let (shifts, shifted) = refine(&hyp, &refr, &kernel, greedy);
    let mut breakdown = align(&shifted, &refr);
    breakdown.shifts = shifts;
    let edits = breakdown.total();
    Ok(TerResult {
        edits,
        ref_length: refr.len(),
        score: edits as f64 / refr.len() as f64,
        breakdown,
    })
}

/// Tokenizes both texts and scores them with [`ter`].
pub fn ter_text(hypothesis: &str, reference: &str) -> Result<TerResult> {
    ter(&tokenize(hypothesis), &tokenize(reference))
}

/// TER of a hypothesis against its post-edit. An empty post-edit is a
/// legitimate outcome (everything deleted): it scores 1.0 against a
/// non-empty hypothesis and 0.0 against an empty one.
pub fn realized_ter(hypothesis: &str, edited: &str) -> f64 {
    let reference = tokenize(edited);
    if reference.is_empty() {
        return if tokenize(hypothesis).is_empty() { 0.0 } else { 1.0 };
    }
    match ter(&tokenize(hypothesis), &reference) {
        Ok(r) => r.score,
        Err(_) => unreachable!("reference checked non-empty"),
    }
}

fn intern<'a>(hyp: &'a [String], refr: &'a [String]) -> (Vec<u32>, Vec<u32>, usize) {
    let mut ids: BTreeMap<&'a str, u32> = BTreeMap::new();
    let mut id_of = |t: &'a String| {
        let next = ids.len() as u32;
        *ids.entry(t.as_str()).or_insert(next)
    };
    let r: Vec<u32> = refr.iter().map(&mut id_of).collect();
    let h: Vec<u32> = hyp.iter().map(&mut id_of).collect();
    (h, r, ids.len())
}

fn greedy_shifts(hyp: &[u32], kernel: &Kernel) -> (usize, Vec<u32>) {
    let mut current = hyp.to_vec();
    let mut current_cost = kernel.distance(&current);
    let mut shifts = 0;
    let mut candidate = Vec::with_capacity(hyp.len());
    while current_cost > 0 {
        let n = current.len();
        let mut best: Option<(usize, usize, usize, usize)> = None;
        for start in 0..n {
            for len in 1..=MAX_SHIFT_LENGTH.min(n - start) {
                for dest in 0..=n - len {
                    if dest == start {
                        continue;
                    }
                    shift_into(&current, start, len, dest, &mut candidate);
                    let cost = kernel.distance(&candidate);
                    if best.map_or(cost < current_cost, |(c, ..)| cost < c) {
                        best = Some((cost, start, len, dest));
                    }
                }
            }
        }
        match best {
            Some((cost, start, len, dest)) => {
                shift_into(&current, start, len, dest, &mut candidate);
                core::mem::swap(&mut current, &mut candidate);
                current_cost = cost;
                shifts += 1;
            }
            None => break,
        }
    }
    (shifts, current)
}

/// Improves on the greedy result by breadth-first search over shift
/// sequences. Any sequence of `k` shifts costs at least `k` plus the
/// multiset difference between hypothesis and reference, which bounds the
/// depth worth exploring. Stops early once [`SEARCH_BUDGET`] moves have
/// been examined, keeping the best total found so far.
fn refine(hyp: &[u32], refr: &[u32], kernel: &Kernel, greedy: (usize, Vec<u32>)) -> (usize, Vec<u32>) {
    let floor = bag_distance(hyp, refr);
    let (mut best_shifts, mut best_seq) = greedy;
    let mut best_total = best_shifts + kernel.distance(&best_seq);
    let mut seen: BTreeSet<Vec<u32>> = BTreeSet::new();
    seen.insert(hyp.to_vec());
    let mut frontier = alloc::vec![hyp.to_vec()];
    let mut budget = SEARCH_BUDGET;
    let mut candidate = Vec::with_capacity(hyp.len());
    let mut depth = 1;
    while depth + floor < best_total && !frontier.is_empty() {
        let mut next = Vec::new();
        for state in &frontier {
            let n = state.len();
            for start in 0..n {
                for len in 1..=MAX_SHIFT_LENGTH.min(n - start) {
                    for dest in 0..=n - len {
                        if dest == start {
                            continue;
                        }
                        if budget == 0 {
                            return (best_shifts, best_seq);
                        }
                        budget -= 1;
                        shift_into(state, start, len, dest, &mut candidate);
                        if seen.contains(&candidate) {
                            continue;
                        }
                        let total = depth + kernel.distance(&candidate);
                        if total < best_total {
                            best_total = total;
                            best_shifts = depth;
                            best_seq = candidate.clone();
                        }
                        seen.insert(candidate.clone());
                        if depth + 1 + floor < best_total {
                            next.push(candidate.clone());
                        }
                    }
                }
            }
        }
        frontier = next;
        depth += 1;
    }
    (best_shifts, best_seq)
}

/// Lower bound on the edit distance between any reordering of `a` and `b`.
fn bag_distance(a: &[u32], b: &[u32]) -> usize {
    let mut counts: BTreeMap<u32, isize> = BTreeMap::new();
    for &t in a {
        *counts.entry(t).or_insert(0) += 1;
    }
    for &t in b {
        *counts.entry(t).or_insert(0) -= 1;
    }
    let surplus: usize = counts.values().filter(|&&c| c > 0).map(|&c| c as usize).sum();
    let deficit: usize = counts.values().filter(|&&c| c < 0).map(|&c| (-c) as usize).sum();
    surplus.max(deficit)
}

/// Writes `seq` with `seq[start..start + len]` removed and re-inserted so
/// that it begins at index `dest` of the result.
fn shift_into(seq: &[u32], start: usize, len: usize, dest: usize, out: &mut Vec<u32>) {
    out.clear();
    let block = &seq[start..start + len];
    let rest = seq[..start].iter().chain(&seq[start + len..]);
    let mut inserted = false;
    for (i, &tok) in rest.enumerate() {
        if i == dest {
            out.extend_from_slice(block);
            inserted = true;
        }
        out.push(tok);
    }
    if !inserted {
        out.extend_from_slice(block);
    }
}

/// Word edit distance against a fixed reference. Uses the bit-parallel
/// recurrence when the reference fits in a machine word.
struct Kernel<'a> {
    reference: &'a [u32],
    peq: Vec<u64>,
}

impl<'a> Kernel<'a> {
    fn new(reference: &'a [u32], vocab: usize) -> Self {
        let mut peq = alloc::vec![0u64; vocab];
        if reference.len() <= 64 {
            for (i, &t) in reference.iter().enumerate() {
                peq[t as usize] |= 1u64 << i;
            }
        }
        Kernel { reference, peq }
    }

    fn distance(&self, text: &[u32]) -> usize {
        let m = self.reference.len();
        if m > 64 {
            return super::edit_distance(text, self.reference);
        }
        let last = 1u64 << (m - 1);
        let mut pv = u64::MAX;
        let mut mv = 0u64;
        let mut score = m;
        for &t in text {
            let eq = self.peq[t as usize];
            let xv = eq | mv;
            let xh = ((eq & pv).wrapping_add(pv) ^ pv) | eq;
            let mut ph = mv | !(xh | pv);
            let mut mh = pv & xh;
            if ph & last != 0 {
                score += 1;
            } else if mh & last != 0 {
                score -= 1;
            }
            ph = (ph << 1) | 1;
            mh <<= 1;
            pv = mh | !(xv | ph);
            mv = ph & xv;
        }
        score
    }
}

/// Counts insertions, deletions and substitutions on one minimal alignment.
fn align(hyp: &[u32], refr: &[u32]) -> EditBreakdown {
    let (n, m) = (hyp.len(), refr.len());
    let w = m + 1;
    let mut d = alloc::vec![0usize; (n + 1) * w];
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        d[i * w] = i;
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(hyp[i - 1] != refr[j - 1]);
            d[i * w + j] = sub.min(d[(i - 1) * w + j] + 1).min(d[i * w + j - 1] + 1);
        }
    }
    let mut out = EditBreakdown::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let diag = d[(i - 1) * w + j - 1];
            let mismatch = hyp[i - 1] != refr[j - 1];
            if here == diag + usize::from(mismatch) {
                out.substitutions += usize::from(mismatch);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && here == d[(i - 1) * w + j] + 1 {
            out.deletions += 1;
            i -= 1;
        } else {
            out.insertions += 1;
            j -= 1;
        }
    }
    out
}

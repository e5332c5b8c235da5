//! Fixed-order feature vectors for (source, hypothesis) pairs.
//!
//! Every vector follows one [`FeatureLayout`], frozen when the
//! [`Featurizer`] is built:
//!
//! | block            | slots                                         |
//! |------------------|-----------------------------------------------|
//! | `src.*`          | surface features of the source                |
//! | `tgt.*`          | surface features of the hypothesis            |
//! | `diff.*`         | `src - tgt`, per surface feature              |
//! | `ratio.*`        | `(tgt + 1) / (src + 1)` for tokens and chars   |
//! | `overlap.{1,2,3}`| character n-gram Jaccard similarity           |
//! | `lang.<code>`    | one-hot target language                       |
//! | `emb.*`          | optional: source, target, diff, product, cosine distance |

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LangCode, Segment};
use crate::error::{Error, Result};
use crate::metrics::{is_punctuation, tokenize};

pub const SURFACE_NAMES: [&str; 6] = [
    "token_count",
    "char_count",
    "avg_word_len",
    "punct_count",
    "digit_count",
    "upper_ratio",
];

pub const NGRAM_ORDERS: [usize; 3] = [1, 2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SurfaceFeatures {
    pub token_count: f64,
    pub char_count: f64,
    pub avg_word_len: f64,
    pub punct_count: f64,
    pub digit_count: f64,
    /// Uppercase share of alphabetic characters.
    pub upper_ratio: f64,
}

impl SurfaceFeatures {
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.token_count,
            self.char_count,
            self.avg_word_len,
            self.punct_count,
            self.digit_count,
            self.upper_ratio,
        ]
    }
}

pub fn surface_features(text: &str) -> SurfaceFeatures {
    let tokens = tokenize(text);
    let mut words = 0usize;
    let mut word_chars = 0usize;
    let mut punct = 0usize;
    for t in tokens.iter() {
        let mut chars = t.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if is_punctuation(c) => punct += 1,
            _ => {
                words += 1;
                word_chars += t.chars().count();
            }
        }
    }
    let (mut alpha, mut upper, mut digits, mut chars) = (0usize, 0usize, 0usize, 0usize);
    for c in text.chars() {
        chars += 1;
        if c.is_numeric() {
            digits += 1;
        }
        if c.is_alphabetic() {
            alpha += 1;
            if c.is_uppercase() {
                upper += 1;
            }
        }
    }
    SurfaceFeatures {
        token_count: tokens.len() as f64,
        char_count: chars as f64,
        avg_word_len: if words == 0 { 0.0 } else { word_chars as f64 / words as f64 },
        punct_count: punct as f64,
        digit_count: digits as f64,
        upper_ratio: if alpha == 0 { 0.0 } else { upper as f64 / alpha as f64 },
    }
}

fn char_ngrams(text: &str, order: usize) -> BTreeSet<Vec<char>> {
    let chars: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
    chars.windows(order).map(<[char]>::to_vec).collect()
}

/// Jaccard similarity of the character n-gram sets of both texts, one value
/// per order. Zero when either side is too short for that order.
pub fn ngram_overlap(source: &str, target: &str, orders: &[usize]) -> Vec<f64> {
    orders
        .iter()
        .map(|&n| {
            if n == 0 {
                return 0.0;
            }
            let a = char_ngrams(source, n);
            let b = char_ngrams(target, n);
            if a.is_empty() || b.is_empty() {
                return 0.0;
            }
            let inter = a.intersection(&b).count();
            let union = a.len() + b.len() - inter;
            inter as f64 / union as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Combined {
    pub diff: Vec<f64>,
    pub product: Vec<f64>,
    pub cosine_distance: f64,
}

/// Difference, pointwise product and cosine distance of two embeddings.
/// The cosine distance of an all-zero vector to anything is 1.
pub fn combine(src: &[f64], tgt: &[f64]) -> Result<Combined> {
    if src.len() != tgt.len() {
        return Err(Error::EmbeddingDimension {
            expected: src.len(),
            got: tgt.len(),
        });
    }
    let diff = src.iter().zip(tgt).map(|(a, b)| a - b).collect();
    let product: Vec<f64> = src.iter().zip(tgt).map(|(a, b)| a * b).collect();
    let dot: f64 = product.iter().sum();
    let na = libm::sqrt(src.iter().map(|v| v * v).sum());
    let nb = libm::sqrt(tgt.iter().map(|v| v * v).sum());
    let cosine_distance = if na == 0.0 || nb == 0.0 {
        1.0
    } else {
        (1.0 - dot / (na * nb)).clamp(0.0, 2.0)
    };
    Ok(Combined {
        diff,
        product,
        cosine_distance,
    })
}

/// Which text of a segment an embedding belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Source,
    /// Hypothesis by index.
    Target(usize),
}

impl Side {
    pub fn label(&self) -> String {
        match self {
            Side::Source => "source".into(),
            Side::Target(0) => "target".into(),
            Side::Target(k) => format!("target.{k}"),
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        match s {
            "source" => Some(Side::Source),
            "target" => Some(Side::Target(0)),
            _ => s.strip_prefix("target.")?.parse().ok().map(Side::Target),
        }
    }
}

/// Externally computed per-segment vectors of one shared dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    dim: Option<usize>,
    vectors: BTreeMap<(usize, Side), Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, segment: usize, side: Side, vector: Vec<f64>) -> Result<()> {
        if vector.is_empty() {
            return Err(Error::EmbeddingDimension { expected: 1, got: 0 });
        }
        if let Some(d) = self.dim {
            if d != vector.len() {
                return Err(Error::EmbeddingDimension {
                    expected: d,
                    got: vector.len(),
                });
            }
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding"));
        }
        self.dim = Some(vector.len());
        self.vectors.insert((segment, side), vector);
        Ok(())
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn get(&self, segment: usize, side: Side) -> Option<&[f64]> {
        self.vectors.get(&(segment, side)).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Checks that every source and every hypothesis of `corpus` has a vector.
    pub fn check_covers(&self, corpus: &Corpus) -> Result<()> {
        for seg in corpus.segments() {
            let id = seg.id.0;
            if self.get(id, Side::Source).is_none() {
                return Err(Error::MissingEmbedding { segment: id, side: "source" });
            }
            for k in 0..seg.hypotheses.len() {
                if self.get(id, Side::Target(k)).is_none() {
                    return Err(Error::MissingEmbedding { segment: id, side: "target" });
                }
            }
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Side, &[f64])> {
        self.vectors.iter().map(|(&(seg, side), v)| (seg, side, v.as_slice()))
    }
}

/// Ordered slot names shared by every vector of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureLayout {
    slots: Vec<String>,
}

impl FeatureLayout {
    pub fn new(languages: &[LangCode], embedding_dim: Option<usize>) -> Self {
        let mut slots = Vec::new();
        for side in ["src", "tgt", "diff"] {
            slots.extend(SURFACE_NAMES.iter().map(|n| format!("{side}.{n}")));
        }
        slots.push("ratio.token_count".into());
        slots.push("ratio.char_count".into());
        slots.extend(NGRAM_ORDERS.iter().map(|n| format!("overlap.{n}")));
        slots.extend(languages.iter().map(|l| format!("lang.{l}")));
        if let Some(d) = embedding_dim {
            for block in ["src", "tgt", "diff", "prod"] {
                slots.extend((0..d).map(|i| format!("emb.{block}.{i}")));
            }
            slots.push("emb.cosine".into());
        }
        FeatureLayout { slots }
    }

    pub fn from_slots(slots: Vec<String>) -> Self {
        FeatureLayout { slots }
    }

    pub fn slots(&self) -> &[String] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector"));
        }
        Ok(FeatureVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Builds feature vectors under a layout fixed for the whole run.
#[derive(Debug, Clone)]
pub struct Featurizer {
    layout: FeatureLayout,
    languages: Vec<LangCode>,
    embeddings: Option<EmbeddingTable>,
}

impl Featurizer {
    /// Layout for `corpus`; embedding blocks are enabled iff `embeddings` is
    /// given, in which case it must cover every segment.
    pub fn for_corpus(corpus: &Corpus, embeddings: Option<EmbeddingTable>) -> Result<Self> {
        Self::new(corpus.target_languages(), embeddings, Some(corpus))
    }

    pub fn new(languages: Vec<LangCode>, embeddings: Option<EmbeddingTable>, corpus: Option<&Corpus>) -> Result<Self> {
        let embeddings = embeddings.filter(|t| !t.is_empty());
        if let (Some(table), Some(corpus)) = (&embeddings, corpus) {
            table.check_covers(corpus)?;
        }
        let layout = FeatureLayout::new(&languages, embeddings.as_ref().and_then(EmbeddingTable::dim));
        Ok(Featurizer {
            layout,
            languages,
            embeddings,
        })
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn featurize(&self, segment: &Segment, hyp_index: usize) -> Result<FeatureVector> {
        let hyp = segment.hypotheses.get(hyp_index).ok_or(Error::HypothesisIndex {
            segment: segment.id.0,
            index: hyp_index,
        })?;
        let src = surface_features(&segment.source_text).to_array();
        let tgt = surface_features(&hyp.text).to_array();
        let mut v = Vec::with_capacity(self.layout.len());
        v.extend_from_slice(&src);
        v.extend_from_slice(&tgt);
        v.extend(src.iter().zip(&tgt).map(|(s, t)| s - t));
        v.push((tgt[0] + 1.0) / (src[0] + 1.0));
        v.push((tgt[1] + 1.0) / (src[1] + 1.0));
        v.extend(ngram_overlap(&segment.source_text, &hyp.text, &NGRAM_ORDERS));
        let lang = self
            .languages
            .iter()
            .position(|l| *l == segment.target_lang)
            .ok_or_else(|| Error::LayoutMismatch(format!("target language {} not in layout", segment.target_lang)))?;
        v.extend((0..self.languages.len()).map(|i| if i == lang { 1.0 } else { 0.0 }));
        if let Some(table) = &self.embeddings {
            let id = segment.id.0;
            let es = table
                .get(id, Side::Source)
                .ok_or(Error::MissingEmbedding { segment: id, side: "source" })?;
            let et = table
                .get(id, Side::Target(hyp_index))
                .ok_or(Error::MissingEmbedding { segment: id, side: "target" })?;
            let c = combine(es, et)?;
            v.extend_from_slice(es);
            v.extend_from_slice(et);
            v.extend(c.diff);
            v.extend(c.product);
            v.push(c.cosine_distance);
        }
        debug_assert_eq!(v.len(), self.layout.len());
        FeatureVector::new(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Hypothesis, SegmentId};
    use alloc::vec;

    fn lang(c: &str) -> LangCode {
        LangCode::new(c).unwrap()
    }

    fn segment(id: usize, src: &str, hyp: &str, tgt: &str) -> Segment {
        Segment::new(SegmentId(id), src, lang("en"), lang(tgt), vec![Hypothesis::new("mt", hyp)], None).unwrap()
    }

    #[test]
    fn surface_counts() {
        let f = surface_features("the cat sat");
        assert_eq!((f.token_count, f.char_count, f.avg_word_len), (3.0, 11.0, 3.0));
        assert_eq!(surface_features("ab cdef").avg_word_len, 3.0);
        assert_eq!(surface_features("").to_array(), [0.0; 6]);
        let g = surface_features("Hi, 42!");
        assert_eq!((g.punct_count, g.digit_count, g.upper_ratio), (2.0, 2.0, 0.5));
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(ngram_overlap("abc", "abc", &NGRAM_ORDERS), vec![1.0; 3]);
        assert_eq!(ngram_overlap("abc", "xyz", &NGRAM_ORDERS), vec![0.0; 3]);
        assert_eq!(ngram_overlap("abcd", "abce", &[2]), vec![0.5]);
        assert_eq!(ngram_overlap("ab", "ab", &[3]), vec![0.0]);
    }

    #[test]
    fn combine_examples() {
        let c = combine(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(c.product, vec![0.0, 0.0]);
        assert_eq!(c.cosine_distance, 1.0);
        let c = combine(&[1.0, 2.0], &[2.0, 1.0]).unwrap();
        assert!((c.cosine_distance - 0.2).abs() < 1e-12);
        let c = combine(&[0.5, -1.0], &[0.5, -1.0]).unwrap();
        assert_eq!(c.diff, vec![0.0, 0.0]);
        assert!(c.cosine_distance.abs() < 1e-12);
        assert_eq!(combine(&[0.0, 0.0], &[1.0, 1.0]).unwrap().cosine_distance, 1.0);
        assert!(combine(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn two_language_layout_has_25_slots() {
        let segs = vec![segment(0, "a", "b", "de"), segment(1, "c", "d", "lv")];
        let corpus = Corpus::new(segs).unwrap();
        let f = Featurizer::for_corpus(&corpus, None).unwrap();
        assert_eq!(f.layout().len(), 25);
        let v = f.featurize(&corpus.segments()[1], 0).unwrap();
        assert_eq!(v.len(), 25);
        let lv = f.layout().index_of("lang.lv").unwrap();
        assert_eq!(v.values()[lv], 1.0);
        assert_eq!(v.values()[f.layout().index_of("lang.de").unwrap()], 0.0);
    }

    #[test]
    fn identity_pair_zeroes_differences() {
        let corpus = Corpus::new(vec![segment(0, "Hello there, 7 cats", "Hello there, 7 cats", "de")]).unwrap();
        let mut table = EmbeddingTable::new();
        table.insert(0, Side::Source, vec![0.3, -0.2, 0.9]).unwrap();
        table.insert(0, Side::Target(0), vec![0.3, -0.2, 0.9]).unwrap();
        let f = Featurizer::for_corpus(&corpus, Some(table)).unwrap();
        let v = f.featurize(&corpus.segments()[0], 0).unwrap();
        for (name, x) in f.layout().slots().iter().zip(v.values()) {
            if name.starts_with("diff.") || name.starts_with("emb.diff.") || name == "emb.cosine" {
                assert!(x.abs() < 1e-12, "{name} = {x}");
            }
        }
        assert_eq!(f.layout().len(), 24 + 4 * 3 + 1);
        assert_eq!(v, f.featurize(&corpus.segments()[0], 0).unwrap());
    }

    #[test]
    fn incomplete_embeddings_are_rejected() {
        let corpus = Corpus::new(vec![segment(0, "a", "b", "de"), segment(1, "c", "d", "de")]).unwrap();
        let mut table = EmbeddingTable::new();
        table.insert(0, Side::Source, vec![1.0]).unwrap();
        table.insert(0, Side::Target(0), vec![1.0]).unwrap();
        assert!(matches!(
            Featurizer::for_corpus(&corpus, Some(table.clone())),
            Err(Error::MissingEmbedding { segment: 1, .. })
        ));
        assert!(table.insert(1, Side::Source, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn side_labels_round_trip() {
        for side in [Side::Source, Side::Target(0), Side::Target(3)] {
            assert_eq!(Side::parse(&side.label()), Some(side));
        }
        assert_eq!(Side::parse("left"), None);
    }
}

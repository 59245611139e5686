//! tf-idf corpus statistics and sparse vectors.
//!
//! Two document granularities are used in the pipeline: per-post stats
//! (ranking a user's own posts) and per-user stats (ranking profiles in
//! search and building feature vectors). idf(t) = ln(N / df(t)); terms
//! unseen in the corpus get idf 0.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::model::Dataset;

#[derive(Debug, Clone, Default)]
pub struct CorpusStats {
    n_docs: usize,
    df: HashMap<String, usize>,
}

impl CorpusStats {
    /// One document per item; df counts documents containing the term at
    /// least once.
    pub fn from_docs<'a, I, D>(docs: I) -> Self
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = &'a String>,
    {
        let mut n_docs = 0;
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in docs {
            n_docs += 1;
            let distinct: HashSet<&String> = doc.into_iter().collect();
            for term in distinct {
                *df.entry(term.clone()).or_insert(0) += 1;
            }
        }
        CorpusStats { n_docs, df }
    }

    /// Every post is a document.
    pub fn per_post(dataset: &Dataset) -> Self {
        Self::from_docs(dataset.all_posts().map(|p| p.tokens().iter()))
    }

    /// Every user with at least one post is a document (their posts
    /// concatenated). Users without posts do not count toward N.
    pub fn per_user(dataset: &Dataset) -> Self {
        Self::from_docs(
            dataset
                .posts()
                .values()
                .filter(|list| !list.is_empty())
                .map(|list| list.iter().flat_map(|p| p.tokens().iter())),
        )
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn doc_frequency(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let df = self.doc_frequency(term);
        if df == 0 || self.n_docs == 0 {
            0.0
        } else {
            (self.n_docs as f64 / df as f64).ln()
        }
    }

    /// Vocabulary in ascending order.
    pub fn terms(&self) -> Vec<&String> {
        let mut v: Vec<&String> = self.df.keys().collect();
        v.sort();
        v
    }

    pub fn vocab_size(&self) -> usize {
        self.df.len()
    }
}

/// Sparse nonnegative vector keyed by term. Kept ordered so iteration
/// and serialization are deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec(BTreeMap<String, f64>);

impl SparseVec {
    pub fn new() -> Self {
        SparseVec::default()
    }

    /// tf-idf of a token stream, L2-normalized. All-zero input (or a
    /// stream whose every term has idf 0) yields the zero vector.
    pub fn tfidf<'a>(tokens: impl IntoIterator<Item = &'a String>, stats: &CorpusStats) -> Self {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for t in tokens {
            *tf.entry(t.clone()).or_insert(0.0) += 1.0;
        }
        let mut v = SparseVec(
            tf.into_iter()
                .filter_map(|(t, n)| {
                    let w = n * stats.idf(&t);
                    (w > 0.0).then_some((t, w))
                })
                .collect(),
        );
        v.l2_normalize();
        v
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (String, f64)>) -> Self {
        SparseVec(entries.into_iter().filter(|(_, w)| *w != 0.0).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, term: &str) -> f64 {
        self.0.get(term).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, f64)> {
        self.0.iter().map(|(t, w)| (t, *w))
    }

    pub fn norm(&self) -> f64 {
        self.0.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn l2_normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for w in self.0.values_mut() {
                *w /= n;
            }
        }
    }

    pub fn add_assign(&mut self, other: &SparseVec) {
        for (t, w) in &other.0 {
            *self.0.entry(t.clone()).or_insert(0.0) += w;
        }
    }

    pub fn dot(&self, other: &SparseVec) -> f64 {
        let (small, large) = if self.0.len() <= other.0.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .0
            .iter()
            .map(|(t, w)| w * large.get(t))
            .sum()
    }
}

/// Standard cosine similarity; 0 by convention when either vector is
/// all-zero. Inputs here are nonnegative, so the result lies in [0, 1].
pub fn cosine_sparse(a: &SparseVec, b: &SparseVec) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (a.dot(b) / (na * nb)).clamp(0.0, 1.0)
}

pub fn cosine_dense(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn idf_matches_hand_values() {
        // apple in 2 of 3 docs, cherry in 1 of 3.
        let docs = [
            doc(&["apple", "banana"]),
            doc(&["apple", "cherry"]),
            doc(&["banana", "banana"]),
        ];
        let stats = CorpusStats::from_docs(docs.iter().map(|d| d.iter()));
        assert_eq!(stats.n_docs(), 3);
        assert!((stats.idf("apple") - (3.0_f64 / 2.0).ln()).abs() < 1e-12);
        assert!((stats.idf("cherry") - 3.0_f64.ln()).abs() < 1e-12);
        assert_eq!(stats.idf("durian"), 0.0);
    }

    #[test]
    fn uniform_term_has_zero_idf() {
        let docs = [doc(&["same"]), doc(&["same", "other"])];
        let stats = CorpusStats::from_docs(docs.iter().map(|d| d.iter()));
        assert_eq!(stats.idf("same"), 0.0);
    }

    #[test]
    fn tfidf_vector_is_unit_length() {
        let docs = [doc(&["apple", "banana"]), doc(&["apple"])];
        let stats = CorpusStats::from_docs(docs.iter().map(|d| d.iter()));
        let v = SparseVec::tfidf(docs[0].iter(), &stats);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_identical_and_disjoint() {
        let a = SparseVec::from_entries([("x".into(), 2.0), ("y".into(), 1.0)]);
        let b = SparseVec::from_entries([("z".into(), 5.0)]);
        assert!((cosine_sparse(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(cosine_sparse(&a, &b), 0.0);
        assert_eq!(cosine_sparse(&a, &SparseVec::new()), 0.0);
    }

    #[test]
    fn cosine_hand_value() {
        // (1,1)·(1,0) = 1/sqrt(2)
        let a = SparseVec::from_entries([("x".into(), 1.0), ("y".into(), 1.0)]);
        let b = SparseVec::from_entries([("x".into(), 1.0)]);
        assert!((cosine_sparse(&a, &b) - 1.0 / 2.0_f64.sqrt()).abs() < 1e-9);
        assert!((cosine_dense(&[1.0, 1.0], &[1.0, 0.0]) - 0.70711).abs() < 1e-5);
    }
}

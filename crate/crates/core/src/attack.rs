//! The three-step query-only de-anonymization attack: extract a
//! target's most revealing posts, search the platform for candidate
//! profiles, then rank candidates by combined textual and structural
//! similarity.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{Dataset, Post, UserId};
use crate::platform::PlatformIndex;
use crate::tfidf::{cosine_dense, cosine_sparse, CorpusStats, SparseVec};

/// Degree bucketing for neighbor-degree histograms. Buckets are
/// [1], [2], [3,4], [5,8], ..., with everything above 2^cap pooled into
/// the last bucket. Logarithmic widths keep the structural feature
/// stable under small degree shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub struct DegreeBuckets {
    #[serde(default = "default_bucket_cap")]
    pub cap: usize,
}

fn default_bucket_cap() -> usize {
    12
}

impl Default for DegreeBuckets {
    fn default() -> Self {
        DegreeBuckets {
            cap: default_bucket_cap(),
        }
    }
}

impl DegreeBuckets {
    pub fn len(&self) -> usize {
        self.cap + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bucket(&self, degree: usize) -> usize {
        if degree <= 1 {
            return 0;
        }
        // ceil(log2(degree))
        let b = usize::BITS as usize - (degree - 1).leading_zeros() as usize;
        b.min(self.cap)
    }

    /// L1-normalized histogram; empty input yields the all-zero vector.
    pub fn histogram(&self, degrees: &[usize]) -> Vec<f64> {
        let mut h = vec![0.0; self.len()];
        for &d in degrees {
            h[self.bucket(d)] += 1.0;
        }
        let total: f64 = h.iter().sum();
        if total > 0.0 {
            for x in &mut h {
                *x /= total;
            }
        }
        h
    }
}

/// Relative weight of each similarity component; must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "[f64; 4]")]
pub struct Weights {
    pub text: f64,
    pub structural: f64,
    pub nbr_text: f64,
    pub nbr_struct: f64,
}

impl Weights {
    pub fn new(text: f64, structural: f64, nbr_text: f64, nbr_struct: f64) -> Result<Self> {
        let w = Weights {
            text,
            structural,
            nbr_text,
            nbr_struct,
        };
        for v in [text, structural, nbr_text, nbr_struct] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("negative weight {v}")));
            }
        }
        let sum = text + structural + nbr_text + nbr_struct;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(w)
    }
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            text: 0.40,
            structural: 0.20,
            nbr_text: 0.25,
            nbr_struct: 0.15,
        }
    }
}

impl TryFrom<[f64; 4]> for Weights {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        Weights::new(v[0], v[1], v[2], v[3])
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    /// The attack's k: how many revealing posts feed the search step.
    #[serde(default = "default_top_k")]
    pub top_k_posts: usize,
    /// Maximum candidate profiles kept after the search step.
    #[serde(default = "default_candidate_limit")]
    pub candidate_limit: usize,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default)]
    pub histogram_buckets: DegreeBuckets,
}

fn default_top_k() -> usize {
    5
}

fn default_candidate_limit() -> usize {
    50
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            top_k_posts: default_top_k(),
            candidate_limit: default_candidate_limit(),
            weights: Weights::default(),
            histogram_buckets: DegreeBuckets::default(),
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k_posts == 0 {
            return Err(Error::InvalidArgument("top_k_posts must be >= 1".into()));
        }
        if self.candidate_limit == 0 {
            return Err(Error::InvalidArgument(
                "candidate_limit must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Textual and structural fingerprint of one user, on either side of the
/// release.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureProfile {
    pub text_vector: SparseVec,
    pub nbr_degree_hist: Vec<f64>,
    pub nbr_text_vector: SparseVec,
    pub nbr_degree_hist2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingResult {
    pub target: UserId,
    pub claimed: Option<UserId>,
    pub score: f64,
    pub ranked_candidates: Vec<(UserId, f64)>,
    pub queries_used: u64,
}

/// Step 1: rank the target's posts by mean tf-idf over the anonymized
/// corpus (per-post documents) and keep the top k. Ties break by
/// ascending post id; a post with no tokens scores 0.
pub fn extract_revealing_posts(
    target_posts: &[Post],
    anon_post_stats: &CorpusStats,
    k: usize,
) -> Vec<Post> {
    let mut scored: Vec<(f64, &Post)> = target_posts
        .iter()
        .map(|p| (revealing_score(p, anon_post_stats), p))
        .collect();
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then_with(|| a.1.post_id.cmp(&b.1.post_id))
    });
    scored.into_iter().take(k).map(|(_, p)| p.clone()).collect()
}

/// Mean tf-idf of a post: sum over distinct terms of tf * idf, divided
/// by the post's token count.
pub fn revealing_score(post: &Post, stats: &CorpusStats) -> f64 {
    let n = post.tokens().len();
    if n == 0 {
        return 0.0;
    }
    let mut tf: HashMap<&String, f64> = HashMap::new();
    for t in post.tokens() {
        *tf.entry(t).or_insert(0.0) += 1.0;
    }
    let sum: f64 = tf.iter().map(|(t, c)| c * stats.idf(t)).sum();
    sum / n as f64
}

/// Step 2: one platform search per revealing post; per-user search
/// scores are summed across queries and the top m users kept, ties by
/// ascending user id.
pub fn select_candidates(
    platform: &PlatformIndex,
    revealing: &[Post],
    m: usize,
) -> Result<Vec<(UserId, f64)>> {
    if m == 0 {
        return Err(Error::InvalidArgument("candidate limit must be >= 1".into()));
    }
    let mut merged: BTreeMap<UserId, f64> = BTreeMap::new();
    for post in revealing {
        for (user, score) in platform.search(post.tokens(), m)? {
            *merged.entry(user).or_insert(0.0) += score;
        }
    }
    let mut ranked: Vec<(UserId, f64)> = merged.into_iter().collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(m);
    Ok(ranked)
}

/// Step 3 feature extraction, shared by both sides of the comparison.
pub fn build_feature_profile(
    posts: &[Post],
    neighbor_posts: &BTreeMap<UserId, Vec<Post>>,
    neighbor_degrees: &BTreeMap<UserId, usize>,
    neighbor2_degrees: &[usize],
    idf_source: &CorpusStats,
    buckets: DegreeBuckets,
) -> FeatureProfile {
    let text_vector = SparseVec::tfidf(posts.iter().flat_map(|p| p.tokens().iter()), idf_source);

    let degrees: Vec<usize> = neighbor_degrees.values().copied().collect();
    let nbr_degree_hist = buckets.histogram(&degrees);

    let mut nbr_text_vector = SparseVec::new();
    for list in neighbor_posts.values() {
        let v = SparseVec::tfidf(list.iter().flat_map(|p| p.tokens().iter()), idf_source);
        nbr_text_vector.add_assign(&v);
    }
    nbr_text_vector.l2_normalize();

    let nbr_degree_hist2 = buckets.histogram(neighbor2_degrees);

    FeatureProfile {
        text_vector,
        nbr_degree_hist,
        nbr_text_vector,
        nbr_degree_hist2,
    }
}

/// Weighted combination of the four component cosines; lies in [0, 1]
/// and is symmetric in its profile arguments.
pub fn score_candidate(a: &FeatureProfile, b: &FeatureProfile, weights: &Weights) -> f64 {
    weights.text * cosine_sparse(&a.text_vector, &b.text_vector)
        + weights.structural * cosine_dense(&a.nbr_degree_hist, &b.nbr_degree_hist)
        + weights.nbr_text * cosine_sparse(&a.nbr_text_vector, &b.nbr_text_vector)
        + weights.nbr_struct * cosine_dense(&a.nbr_degree_hist2, &b.nbr_degree_hist2)
}

/// Attack state shared across targets of one run: precomputed anonymized
/// corpus statistics plus memoized candidate-side profiles (a platform
/// profile does not depend on which target is being attacked, so it is
/// fetched through the query interface once and reused).
pub struct AttackSession<'a> {
    anon: &'a Dataset,
    platform: &'a PlatformIndex,
    config: AttackConfig,
    anon_post_stats: CorpusStats,
    anon_user_stats: CorpusStats,
    profile_cache: CellMap<Arc<FeatureProfile>>,
    degree_cache: CellMap<usize>,
}

/// Per-key once-initialization map: the outer lock only hands out the
/// per-key cell, and the value is built under the cell's own lock, so
/// each key is computed exactly once no matter how calls interleave.
/// That keeps platform query totals independent of thread scheduling.
struct CellMap<T>(Mutex<HashMap<UserId, Arc<Mutex<Option<T>>>>>);

impl<T: Clone> CellMap<T> {
    fn new() -> Self {
        CellMap(Mutex::new(HashMap::new()))
    }

    fn get_or_try_init(&self, key: &UserId, init: impl FnOnce() -> Result<T>) -> Result<T> {
        let cell = {
            let mut map = self.0.lock().unwrap();
            map.entry(key.clone()).or_default().clone()
        };
        let mut guard = cell.lock().unwrap();
        if let Some(v) = &*guard {
            return Ok(v.clone());
        }
        let v = init()?;
        *guard = Some(v.clone());
        Ok(v)
    }
}

impl<'a> AttackSession<'a> {
    pub fn new(anon: &'a Dataset, platform: &'a PlatformIndex, config: AttackConfig) -> Result<Self> {
        config.validate()?;
        config.weights.validate_sum()?;
        Ok(AttackSession {
            anon,
            platform,
            config,
            anon_post_stats: CorpusStats::per_post(anon),
            anon_user_stats: CorpusStats::per_user(anon),
            profile_cache: CellMap::new(),
            degree_cache: CellMap::new(),
        })
    }

    pub fn config(&self) -> &AttackConfig {
        &self.config
    }

    fn platform_degree(&self, user: &UserId) -> Result<usize> {
        self.degree_cache
            .get_or_try_init(user, || Ok(self.platform.neighbors(user)?.len()))
    }

    /// Candidate-side profile, built exclusively from platform queries
    /// with the platform's corpus as idf source.
    pub fn candidate_profile(&self, user: &UserId) -> Result<Arc<FeatureProfile>> {
        self.profile_cache.get_or_try_init(user, || {
            let posts = self.platform.posts_of(user)?;
            let neighbors = self.platform.neighbors(user)?;
            let mut neighbor_posts = BTreeMap::new();
            let mut neighbor_degrees = BTreeMap::new();
            let mut neighbor2 = Vec::new();
            for n in &neighbors {
                neighbor_posts.insert(n.clone(), self.platform.posts_of(n)?);
                let two_hop = self.platform.neighbors(n)?;
                neighbor_degrees.insert(n.clone(), two_hop.len());
                for w in &two_hop {
                    neighbor2.push(self.platform_degree(w)?);
                }
            }
            Ok(Arc::new(build_feature_profile(
                &posts,
                &neighbor_posts,
                &neighbor_degrees,
                &neighbor2,
                self.platform.corpus_stats(),
                self.config.histogram_buckets,
            )))
        })
    }

    /// Target-side profile from the anonymized release only.
    pub fn target_profile(&self, target: &UserId) -> FeatureProfile {
        let graph = &self.anon.graph;
        let neighbors: Vec<UserId> = graph
            .neighbors(target)
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default();
        let mut neighbor_posts = BTreeMap::new();
        let mut neighbor_degrees = BTreeMap::new();
        let mut neighbor2 = Vec::new();
        for n in &neighbors {
            neighbor_posts.insert(n.clone(), self.anon.posts_of(n).to_vec());
            neighbor_degrees.insert(n.clone(), graph.degree(n));
            if let Some(two_hop) = graph.neighbors(n) {
                for w in two_hop {
                    neighbor2.push(graph.degree(w));
                }
            }
        }
        build_feature_profile(
            self.anon.posts_of(target),
            &neighbor_posts,
            &neighbor_degrees,
            &neighbor2,
            &self.anon_user_stats,
            self.config.histogram_buckets,
        )
    }

    /// Full Step 1 -> 2 -> 3 composition for one target.
    pub fn map_user(&self, target: &UserId) -> Result<MappingResult> {
        if !self.anon.graph.has_vertex(target) {
            return Err(Error::UnknownUser(target.to_string()));
        }
        let queries_before = self.platform.query_count();

        let revealing = extract_revealing_posts(
            self.anon.posts_of(target),
            &self.anon_post_stats,
            self.config.top_k_posts,
        );
        let candidates =
            select_candidates(self.platform, &revealing, self.config.candidate_limit)?;

        let target_profile = self.target_profile(target);
        let mut ranked: Vec<(UserId, f64)> = Vec::with_capacity(candidates.len());
        for (candidate, _) in &candidates {
            let profile = self.candidate_profile(candidate)?;
            let score = score_candidate(&target_profile, &profile, &self.config.weights);
            ranked.push((candidate.clone(), score));
        }
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));

        let queries_used = self.platform.query_count() - queries_before;
        let (claimed, score) = match ranked.first() {
            Some((u, s)) => (Some(u.clone()), *s),
            None => (None, 0.0),
        };
        Ok(MappingResult {
            target: target.clone(),
            claimed,
            score,
            ranked_candidates: ranked,
            queries_used,
        })
    }
}

impl Weights {
    fn validate_sum(&self) -> Result<()> {
        Weights::new(self.text, self.structural, self.nbr_text, self.nbr_struct).map(|_| ())
    }
}

/// One-shot convenience wrapper around a fresh session.
pub fn map_user(
    target: &UserId,
    anon: &Dataset,
    platform: &PlatformIndex,
    config: AttackConfig,
) -> Result<MappingResult> {
    AttackSession::new(anon, platform, config)?.map_user(target)
}

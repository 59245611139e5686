//! Textual anonymizers: idf-ranked term suppression and random token
//! substitution. Both keep the post set, post ids, and authorship
//! intact and rewrite each post's text from its surviving tokens.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{Post, UserId};
use crate::tfidf::CorpusStats;

pub type PostMap = BTreeMap<UserId, Vec<Post>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextTechnique {
    IdfSuppression,
    RandomSubstitution,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextAnonConfig {
    pub technique: TextTechnique,
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_rate() -> f64 {
    0.2
}

impl Default for TextAnonConfig {
    fn default() -> Self {
        TextAnonConfig {
            technique: TextTechnique::IdfSuppression,
            rate: default_rate(),
            seed: 0,
        }
    }
}

impl TextAnonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::InvalidArgument(format!(
                "text rate {} outside [0,1]",
                self.rate
            )));
        }
        Ok(())
    }

    pub fn apply(&self, posts: &PostMap) -> Result<PostMap> {
        self.validate()?;
        match self.technique {
            TextTechnique::IdfSuppression => idf_suppression(posts, self.rate),
            TextTechnique::RandomSubstitution => random_substitution(posts, self.rate, self.seed),
        }
    }
}

fn corpus_vocab(posts: &PostMap) -> Vec<String> {
    let set: BTreeSet<&String> = posts
        .values()
        .flatten()
        .flat_map(|p| p.tokens().iter())
        .collect();
    set.into_iter().cloned().collect()
}

/// Deletes every occurrence of the round(rate * |vocabulary|) terms with
/// the highest idf (per-post documents; ties broken lexicographically).
/// These are exactly the rarest, most identifying terms.
pub fn idf_suppression(posts: &PostMap, rate: f64) -> Result<PostMap> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("rate {rate} outside [0,1]")));
    }
    let stats = CorpusStats::from_docs(
        posts
            .values()
            .flatten()
            .map(|p| p.tokens().iter()),
    );
    // round() is half away from zero, i.e. half-up for nonnegative input.
    let n_suppress = (rate * stats.vocab_size() as f64).round() as usize;

    let mut ranked: Vec<&String> = stats.terms();
    ranked.sort_by(|a, b| {
        stats
            .idf(b)
            .partial_cmp(&stats.idf(a))
            .unwrap()
            .then_with(|| a.cmp(b))
    });
    let suppressed: BTreeSet<&String> = ranked.into_iter().take(n_suppress).collect();

    Ok(posts
        .iter()
        .map(|(author, list)| {
            let new_list = list
                .iter()
                .map(|p| {
                    let kept: Vec<String> = p
                        .tokens()
                        .iter()
                        .filter(|t| !suppressed.contains(t))
                        .cloned()
                        .collect();
                    Post::from_tokens(p.post_id.clone(), p.author.clone(), kept)
                })
                .collect();
            (author.clone(), new_list)
        })
        .collect())
}

/// Each token position is independently replaced, with probability
/// `rate`, by a uniform draw from the corpus vocabulary. Per-post token
/// counts are preserved.
pub fn random_substitution(posts: &PostMap, rate: f64, seed: u64) -> Result<PostMap> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("rate {rate} outside [0,1]")));
    }
    let vocab = corpus_vocab(posts);
    if vocab.is_empty() && rate > 0.0 {
        return Err(Error::InvalidArgument(
            "cannot substitute tokens: corpus vocabulary is empty".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    Ok(posts
        .iter()
        .map(|(author, list)| {
            let new_list = list
                .iter()
                .map(|p| {
                    let tokens: Vec<String> = p
                        .tokens()
                        .iter()
                        .map(|t| {
                            if rate > 0.0 && rng.random::<f64>() < rate {
                                vocab[rng.random_range(0..vocab.len())].clone()
                            } else {
                                t.clone()
                            }
                        })
                        .collect();
                    Post::from_tokens(p.post_id.clone(), p.author.clone(), tokens)
                })
                .collect();
            (author.clone(), new_list)
        })
        .collect())
}

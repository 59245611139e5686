//! Synthetic data generation: a preferential-attachment graph with
//! community-correlated vocabularies, and the pseudonymized release
//! with its ground-truth bijection.
//!
//! Linked users tend to share a community and communities share
//! vocabulary, so the text and structure aspects are correlated — the
//! property the cross-aspect attack exploits.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{Dataset, Graph, GroundTruth, Post, UserId};

/// Probability that a new vertex adopts the community of one of its
/// attachment targets rather than a uniform one.
const COMMUNITY_INHERIT_PROB: f64 = 0.7;
/// Non-personal tokens split community/shared 70/30.
const COMMUNITY_TOKEN_PROB: f64 = 0.7;
/// Size of each user's private vocabulary.
const PERSONAL_VOCAB_SIZE: usize = 10;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(default = "d_n_users")]
    pub n_users: usize,
    #[serde(default = "d_edges_per_new_vertex")]
    pub edges_per_new_vertex: usize,
    #[serde(default = "d_posts_per_user")]
    pub posts_per_user: usize,
    #[serde(default = "d_tokens_per_post")]
    pub tokens_per_post: usize,
    #[serde(default = "d_vocab_shared")]
    pub vocab_shared: usize,
    #[serde(default = "d_vocab_per_community")]
    pub vocab_per_community: usize,
    #[serde(default = "d_n_communities")]
    pub n_communities: usize,
    #[serde(default = "d_personal_term_prob")]
    pub personal_term_prob: f64,
    #[serde(default = "d_seed")]
    pub seed: u64,
}

fn d_n_users() -> usize {
    500
}
fn d_edges_per_new_vertex() -> usize {
    4
}
fn d_posts_per_user() -> usize {
    20
}
fn d_tokens_per_post() -> usize {
    8
}
fn d_vocab_shared() -> usize {
    200
}
fn d_vocab_per_community() -> usize {
    150
}
fn d_n_communities() -> usize {
    5
}
fn d_personal_term_prob() -> f64 {
    0.3
}
fn d_seed() -> u64 {
    7
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: d_n_users(),
            edges_per_new_vertex: d_edges_per_new_vertex(),
            posts_per_user: d_posts_per_user(),
            tokens_per_post: d_tokens_per_post(),
            vocab_shared: d_vocab_shared(),
            vocab_per_community: d_vocab_per_community(),
            n_communities: d_n_communities(),
            personal_term_prob: d_personal_term_prob(),
            seed: d_seed(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0
            || self.edges_per_new_vertex == 0
            || self.posts_per_user == 0
            || self.tokens_per_post == 0
            || self.vocab_shared == 0
            || self.vocab_per_community == 0
            || self.n_communities == 0
        {
            return Err(Error::InvalidArgument(
                "all synthetic counts must be >= 1".into(),
            ));
        }
        if self.edges_per_new_vertex >= self.n_users {
            return Err(Error::InvalidArgument(format!(
                "edges_per_new_vertex {} must be < n_users {}",
                self.edges_per_new_vertex, self.n_users
            )));
        }
        if !(0.0..=1.0).contains(&self.personal_term_prob) {
            return Err(Error::InvalidArgument(
                "personal_term_prob outside [0,1]".into(),
            ));
        }
        Ok(())
    }
}

fn user_id(i: usize) -> UserId {
    UserId::new(format!("u{i:05}")).expect("generated id is valid")
}

/// Preferential attachment: an initial clique of `m` vertices, then each
/// new vertex attaches to `m` distinct existing vertices chosen with
/// probability proportional to current degree. Total edges:
/// m*(n-m) + C(m,2).
fn generate_graph(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Graph {
    let n = cfg.n_users;
    let m = cfg.edges_per_new_vertex;
    let mut graph = Graph::new();
    // endpoints holds one entry per edge endpoint, so sampling an index
    // uniformly is degree-proportional sampling.
    let mut endpoints: Vec<usize> = Vec::new();

    for i in 0..m {
        graph.ensure_vertex(user_id(i));
        for j in 0..i {
            graph.add_edge(user_id(i), user_id(j));
            endpoints.push(i);
            endpoints.push(j);
        }
    }
    for i in m..n {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        while targets.len() < m {
            let t = if endpoints.is_empty() {
                rng.random_range(0..i)
            } else {
                endpoints[rng.random_range(0..endpoints.len())]
            };
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for t in targets {
            graph.add_edge(user_id(i), user_id(t));
            endpoints.push(i);
            endpoints.push(t);
        }
    }
    graph
}

fn assign_communities(cfg: &SynthConfig, graph: &Graph, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = cfg.n_users;
    let m = cfg.edges_per_new_vertex.min(n);
    let mut community = Vec::with_capacity(n);
    for _ in 0..m {
        community.push(rng.random_range(0..cfg.n_communities));
    }
    // New vertices usually inherit the community of an earlier link
    // target, which is what correlates text with structure.
    for i in m..n {
        let earlier: Vec<usize> = graph
            .neighbors(&user_id(i))
            .map(|nbrs| {
                nbrs.iter()
                    .filter_map(|v| {
                        let idx: usize = v.as_str()[1..].parse().ok()?;
                        (idx < i).then_some(idx)
                    })
                    .collect()
            })
            .unwrap_or_default();
        let c = if !earlier.is_empty() && rng.random::<f64>() < COMMUNITY_INHERIT_PROB {
            community[earlier[rng.random_range(0..earlier.len())]]
        } else {
            rng.random_range(0..cfg.n_communities)
        };
        community.push(c);
    }
    community
}

fn generate_posts(
    cfg: &SynthConfig,
    community: &[usize],
    rng: &mut ChaCha8Rng,
) -> BTreeMap<UserId, Vec<Post>> {
    let mut posts = BTreeMap::new();
    for i in 0..cfg.n_users {
        let uid = user_id(i);
        let com = community[i];
        let mut list = Vec::with_capacity(cfg.posts_per_user);
        for p in 0..cfg.posts_per_user {
            let mut tokens = Vec::with_capacity(cfg.tokens_per_post);
            for _ in 0..cfg.tokens_per_post {
                let token = if rng.random::<f64>() < cfg.personal_term_prob {
                    format!("pu{i:05}t{:02}", rng.random_range(0..PERSONAL_VOCAB_SIZE))
                } else if rng.random::<f64>() < COMMUNITY_TOKEN_PROB {
                    format!("cm{com:02}t{:04}", rng.random_range(0..cfg.vocab_per_community))
                } else {
                    format!("sh{:04}", rng.random_range(0..cfg.vocab_shared))
                };
                tokens.push(token);
            }
            list.push(Post::from_tokens(
                format!("{uid}-p{p:04}"),
                uid.clone(),
                tokens,
            ));
        }
        posts.insert(uid, list);
    }
    posts
}

/// Deterministic public dataset for the given config.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let graph = generate_graph(cfg, &mut rng);
    let community = assign_communities(cfg, &graph, &mut rng);
    let posts = generate_posts(cfg, &community, &mut rng);
    Dataset::new(graph, posts, "public")
}

/// Verbatim pseudonymized copy: every user id is replaced by a fresh
/// pseudonym from a seeded permutation (disjoint from the public id
/// namespace), post ids are re-randomized, and the bijection is recorded
/// as ground truth. This is the PII-removal baseline every case starts
/// from.
pub fn make_release(public: &Dataset, seed: u64) -> Result<(Dataset, GroundTruth)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users: Vec<UserId> = public.users().cloned().collect();
    let n = users.len();
    let mut codes: Vec<usize> = (0..n).collect();
    codes.shuffle(&mut rng);

    let pseudonym: BTreeMap<&UserId, UserId> = users
        .iter()
        .zip(&codes)
        .map(|(u, c)| {
            (
                u,
                UserId::new(format!("a{c:06}")).expect("generated pseudonym is valid"),
            )
        })
        .collect();

    let mut graph = Graph::new();
    for u in &users {
        graph.ensure_vertex(pseudonym[u].clone());
    }
    for (a, b) in public.graph.edges() {
        graph.add_edge(pseudonym[&a].clone(), pseudonym[&b].clone());
    }

    let mut posts: BTreeMap<UserId, Vec<Post>> = BTreeMap::new();
    for (u, list) in public.posts() {
        let anon_id = pseudonym[u].clone();
        let mut order: Vec<usize> = (0..list.len()).collect();
        order.shuffle(&mut rng);
        let new_list: Vec<Post> = order
            .iter()
            .enumerate()
            .map(|(j, &orig)| {
                Post::new(
                    format!("{anon_id}-q{j:04}"),
                    anon_id.clone(),
                    list[orig].text.clone(),
                )
            })
            .collect();
        posts.insert(anon_id, new_list);
    }

    let mapping: BTreeMap<UserId, UserId> = users
        .iter()
        .map(|u| (pseudonym[u].clone(), u.clone()))
        .collect();
    let truth = GroundTruth::new(mapping)?;
    let anon = Dataset::new(graph, posts, "release")?;
    Ok((anon, truth))
}

//! Canonical data types shared by every stage of the pipeline: users,
//! posts, the undirected social graph, and full datasets with their
//! evaluation-only ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Opaque user identifier, either a real handle or a pseudonym.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(String);

impl UserId {
    /// Tab and newline are reserved by the on-disk formats.
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::InvalidArgument("empty user id".into()));
        }
        if id.contains(['\t', '\n', '\r']) {
            return Err(Error::InvalidArgument(format!(
                "user id {id:?} contains a reserved character"
            )));
        }
        Ok(UserId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Lowercase, split on every non-alphanumeric codepoint, drop tokens
/// shorter than two characters. No stemming, no stop words; the same
/// input always yields the same output.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(|t| t.to_string())
        .collect()
}

/// A single post; `tokens` is always exactly `tokenize(text)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Post {
    pub post_id: String,
    pub author: UserId,
    pub text: String,
    tokens: Vec<String>,
}

impl Post {
    pub fn new(post_id: impl Into<String>, author: UserId, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Post {
            post_id: post_id.into(),
            author,
            text,
            tokens,
        }
    }

    /// Rebuild a post from an already-normalized token list. The text is
    /// the tokens joined by single spaces, which tokenizes back to the
    /// same list.
    pub fn from_tokens(post_id: impl Into<String>, author: UserId, tokens: Vec<String>) -> Self {
        let text = tokens.join(" ");
        debug_assert_eq!(tokenize(&text), tokens);
        Post {
            post_id: post_id.into(),
            author,
            text,
            tokens,
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Undirected simple graph over user ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Graph {
    adjacency: BTreeMap<UserId, BTreeSet<UserId>>,
    edge_count: usize,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn ensure_vertex(&mut self, u: UserId) {
        self.adjacency.entry(u).or_default();
    }

    /// Adds an undirected edge. Returns false (and changes nothing) for
    /// self-loops and edges already present.
    pub fn add_edge(&mut self, a: UserId, b: UserId) -> bool {
        if a == b {
            return false;
        }
        if self.has_edge(&a, &b) {
            return false;
        }
        self.adjacency.entry(a.clone()).or_default().insert(b.clone());
        self.adjacency.entry(b).or_default().insert(a);
        self.edge_count += 1;
        true
    }

    pub fn remove_edge(&mut self, a: &UserId, b: &UserId) -> bool {
        if !self.has_edge(a, b) {
            return false;
        }
        self.adjacency.get_mut(a).unwrap().remove(b);
        self.adjacency.get_mut(b).unwrap().remove(a);
        self.edge_count -= 1;
        true
    }

    pub fn has_edge(&self, a: &UserId, b: &UserId) -> bool {
        self.adjacency.get(a).is_some_and(|n| n.contains(b))
    }

    pub fn has_vertex(&self, u: &UserId) -> bool {
        self.adjacency.contains_key(u)
    }

    pub fn neighbors(&self, u: &UserId) -> Option<&BTreeSet<UserId>> {
        self.adjacency.get(u)
    }

    pub fn degree(&self, u: &UserId) -> usize {
        self.adjacency.get(u).map_or(0, |n| n.len())
    }

    pub fn vertices(&self) -> impl Iterator<Item = &UserId> {
        self.adjacency.keys()
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// All edges, each reported once with endpoints in ascending order,
    /// sorted.
    pub fn edges(&self) -> Vec<(UserId, UserId)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (u, nbrs) in &self.adjacency {
            for v in nbrs.range(u.clone()..) {
                if v > u {
                    out.push((u.clone(), v.clone()));
                }
            }
        }
        out
    }

    /// Symmetry, loop-freedom, and edge-count consistency.
    pub fn check_invariants(&self) -> Result<()> {
        let mut half_degree_sum = 0usize;
        for (u, nbrs) in &self.adjacency {
            if nbrs.contains(u) {
                return Err(Error::Invariant(format!("self-loop at {u}")));
            }
            for v in nbrs {
                if !self.has_edge(v, u) {
                    return Err(Error::Invariant(format!("asymmetric edge {u}-{v}")));
                }
            }
            half_degree_sum += nbrs.len();
        }
        if half_degree_sum != 2 * self.edge_count {
            return Err(Error::Invariant(format!(
                "edge_count {} does not match degree sum {}",
                self.edge_count, half_degree_sum
            )));
        }
        Ok(())
    }
}

/// One side of a release: graph plus per-user posts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub graph: Graph,
    posts: BTreeMap<UserId, Vec<Post>>,
    pub label: String,
}

impl Dataset {
    /// Post authors not yet in the graph become isolated vertices, so
    /// the vertex set is always the union of edge endpoints and post
    /// authors. Post ids must be unique across the whole dataset.
    pub fn new(
        mut graph: Graph,
        posts: BTreeMap<UserId, Vec<Post>>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let mut seen_ids = BTreeSet::new();
        for (author, list) in &posts {
            graph.ensure_vertex(author.clone());
            for p in list {
                if &p.author != author {
                    return Err(Error::Invariant(format!(
                        "post {} filed under {author} but authored by {}",
                        p.post_id, p.author
                    )));
                }
                if !seen_ids.insert(&p.post_id) {
                    return Err(Error::Invariant(format!("duplicate post id {}", p.post_id)));
                }
            }
        }
        Ok(Dataset {
            graph,
            posts,
            label: label.into(),
        })
    }

    pub fn posts_of(&self, u: &UserId) -> &[Post] {
        self.posts.get(u).map_or(&[], |v| v.as_slice())
    }

    pub fn posts(&self) -> &BTreeMap<UserId, Vec<Post>> {
        &self.posts
    }

    pub fn all_posts(&self) -> impl Iterator<Item = &Post> {
        self.posts.values().flatten()
    }

    pub fn post_count(&self) -> usize {
        self.posts.values().map(Vec::len).sum()
    }

    pub fn users(&self) -> impl Iterator<Item = &UserId> {
        self.graph.vertices()
    }
}

/// Evaluation-only bijection from pseudonyms to real identities. Every
/// lookup is counted so tests can assert the attack never touches it.
#[derive(Debug, Default)]
pub struct GroundTruth {
    mapping: BTreeMap<UserId, UserId>,
    reads: AtomicU64,
}

impl GroundTruth {
    pub fn new(mapping: BTreeMap<UserId, UserId>) -> Result<Self> {
        let images: BTreeSet<&UserId> = mapping.values().collect();
        if images.len() != mapping.len() {
            return Err(Error::Invariant(
                "ground truth mapping is not injective".into(),
            ));
        }
        Ok(GroundTruth {
            mapping,
            reads: AtomicU64::new(0),
        })
    }

    pub fn public_id_of(&self, anon: &UserId) -> Option<&UserId> {
        self.reads.fetch_add(1, Ordering::Relaxed);
        self.mapping.get(anon)
    }

    pub fn anonymized_ids(&self) -> impl Iterator<Item = &UserId> {
        self.mapping.keys()
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    /// Number of lookups served so far.
    pub fn read_count(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }

    /// Non-counting view, for serialization only.
    pub fn raw_mapping(&self) -> &BTreeMap<UserId, UserId> {
        &self.mapping
    }
}

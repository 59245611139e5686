//! Query-only simulation of the public platform: an inverted index over
//! user profiles plus the public adjacency. This interface is the
//! attack's sole source of information, and every call is logged so the
//! query-only contract is observable.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::io;
use crate::model::{Dataset, Post, UserId};
use crate::tfidf::CorpusStats;

const META_FILE: &str = "platform.meta";
const MAGIC: &str = "anonybench-platform";
const VERSION: u32 = 1;

#[derive(Debug, Default)]
pub struct QueryLog {
    entries: Vec<(String, String)>,
}

impl QueryLog {
    pub fn count(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

pub struct PlatformIndex {
    /// token -> postings sorted by user id, with term frequency over the
    /// user's concatenated posts.
    inverted: HashMap<String, Vec<(UserId, u64)>>,
    adjacency: crate::model::Graph,
    posts: BTreeMap<UserId, Vec<Post>>,
    stats: CorpusStats,
    label: String,
    log: Mutex<QueryLog>,
    query_budget: Option<u64>,
}

impl PlatformIndex {
    /// Builds the index from the public dataset. Documents are users
    /// (search returns profiles); idf(t) = ln(N / df) over users with at
    /// least one post.
    pub fn build(public: &Dataset) -> Self {
        let mut inverted: HashMap<String, Vec<(UserId, u64)>> = HashMap::new();
        for (user, list) in public.posts() {
            let mut tf: BTreeMap<&String, u64> = BTreeMap::new();
            for p in list {
                for t in p.tokens() {
                    *tf.entry(t).or_insert(0) += 1;
                }
            }
            for (t, n) in tf {
                inverted
                    .entry(t.clone())
                    .or_default()
                    .push((user.clone(), n));
            }
        }
        // posts iterate in user order, so postings are already sorted.
        PlatformIndex {
            inverted,
            adjacency: public.graph.clone(),
            posts: public.posts().clone(),
            stats: CorpusStats::per_user(public),
            label: public.label.clone(),
            log: Mutex::new(QueryLog::default()),
            query_budget: None,
        }
    }

    /// Optional cap on total platform calls per index instance.
    pub fn with_query_budget(mut self, budget: u64) -> Self {
        self.query_budget = Some(budget);
        self
    }

    fn record(&self, op: &str, digest: String) -> Result<()> {
        let mut log = self.log.lock().unwrap();
        if let Some(budget) = self.query_budget {
            if log.count() >= budget {
                return Err(Error::QueryBudgetExhausted(budget));
            }
        }
        log.entries.push((op.to_string(), digest));
        Ok(())
    }

    pub fn query_count(&self) -> u64 {
        self.log.lock().unwrap().count()
    }

    pub fn log_entries(&self) -> Vec<(String, String)> {
        self.log.lock().unwrap().entries.clone()
    }

    /// Corpus statistics an adversary could derive from public search
    /// behavior; used as the idf source for candidate-side features.
    pub fn corpus_stats(&self) -> &CorpusStats {
        &self.stats
    }

    pub fn user_count(&self) -> usize {
        self.adjacency.vertex_count()
    }

    pub fn users(&self) -> Vec<UserId> {
        self.adjacency.vertices().cloned().collect()
    }

    /// Keyword search over profiles: score(user) = sum over query tokens
    /// of tf(token, user) * idf(token). Zero-scoring users are excluded;
    /// ranking is by descending score, then ascending user id.
    pub fn search(&self, query: &[String], limit: usize) -> Result<Vec<(UserId, f64)>> {
        if limit == 0 {
            return Err(Error::InvalidArgument("search limit must be >= 1".into()));
        }
        self.record("search", format!("limit={limit} q={}", query.join(",")))?;
        if query.is_empty() {
            return Ok(Vec::new());
        }
        let mut scores: HashMap<&UserId, f64> = HashMap::new();
        for token in query {
            let idf = self.stats.idf(token);
            if idf <= 0.0 {
                continue;
            }
            if let Some(postings) = self.inverted.get(token) {
                for (user, tf) in postings {
                    *scores.entry(user).or_insert(0.0) += *tf as f64 * idf;
                }
            }
        }
        let mut ranked: Vec<(UserId, f64)> = scores
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(u, s)| (u.clone(), s))
            .collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(limit);
        Ok(ranked)
    }

    /// Exact public adjacency list; unknown user is an error distinct
    /// from "no neighbors".
    pub fn neighbors(&self, user: &UserId) -> Result<Vec<UserId>> {
        self.record("neighbors", user.to_string())?;
        match self.adjacency.neighbors(user) {
            Some(n) => Ok(n.iter().cloned().collect()),
            None => Err(Error::UnknownUser(user.to_string())),
        }
    }

    pub fn posts_of(&self, user: &UserId) -> Result<Vec<Post>> {
        self.record("posts", user.to_string())?;
        if !self.adjacency.has_vertex(user) {
            return Err(Error::UnknownUser(user.to_string()));
        }
        Ok(self.posts.get(user).cloned().unwrap_or_default())
    }

    /// Persists the index directory: a versioned meta header plus the
    /// public dataset files the index is rebuilt from (the build is
    /// deterministic, so this round-trips bit-identically).
    pub fn save_to_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = dir.join(META_FILE);
        fs::write(&meta, format!("{MAGIC} v{VERSION}\nlabel={}\n", self.label))
            .map_err(|e| Error::io(&meta, e))?;
        let dataset = Dataset::new(self.adjacency.clone(), self.posts.clone(), &*self.label)?;
        io::save_dataset(&dataset, dir)
    }

    pub fn load_from_dir(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(META_FILE);
        let meta = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let mut lines = meta.lines();
        let header = lines.next().unwrap_or("");
        if header != format!("{MAGIC} v{VERSION}") {
            return Err(Error::parse(
                meta_path.display().to_string(),
                1,
                format!("unrecognized platform index header {header:?}"),
            ));
        }
        let label = lines
            .next()
            .and_then(|l| l.strip_prefix("label="))
            .unwrap_or("public")
            .to_string();
        let (dataset, _) = io::load_dataset(
            &dir.join(io::EDGES_FILE),
            &dir.join(io::POSTS_FILE),
            &label,
        )?;
        Ok(PlatformIndex::build(&dataset))
    }
}

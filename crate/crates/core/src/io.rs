//! File ingestion and serialization.
//!
//! Formats: `edges.tsv` (one `<user>\t<user>` per line, undirected),
//! `posts.jsonl` (one object per line with exactly the keys `user_id`,
//! `post_id`, `text`), `ground_truth.tsv` (`<anon_id>\t<public_id>`),
//! and `mapping.tsv` (`<anon_id>\t<claimed or ->\t<score>`).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Graph, GroundTruth, Post, UserId};

pub const EDGES_FILE: &str = "edges.tsv";
pub const POSTS_FILE: &str = "posts.jsonl";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.tsv";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PostRecord {
    user_id: String,
    post_id: String,
    text: String,
}

/// Counts of input lines dropped during ingestion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub dropped_self_loops: usize,
    pub dropped_duplicate_edges: usize,
}

fn read_utf8(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes)
        .map_err(|_| Error::parse(path.display().to_string(), 0, "file is not valid UTF-8"))
}

/// Loads a dataset from an edge list and a post stream. Self-loops and
/// duplicate edges are dropped and counted; any malformed line is an
/// error naming the file and 1-based line number.
pub fn load_dataset(
    edges_path: &Path,
    posts_path: &Path,
    label: &str,
) -> Result<(Dataset, LoadStats)> {
    let mut stats = LoadStats::default();
    let mut graph = Graph::new();

    let edges_name = edges_path.display().to_string();
    for (idx, line) in read_utf8(edges_path)?.lines().enumerate() {
        let lineno = idx + 1;
        let mut fields = line.split('\t');
        let (a, b) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::parse(
                    &edges_name,
                    lineno,
                    format!("expected exactly two tab-separated fields, got {line:?}"),
                ))
            }
        };
        let a = UserId::new(a)
            .map_err(|e| Error::parse(&edges_name, lineno, e.to_string()))?;
        let b = UserId::new(b)
            .map_err(|e| Error::parse(&edges_name, lineno, e.to_string()))?;
        if a == b {
            stats.dropped_self_loops += 1;
        } else if !graph.add_edge(a, b) {
            stats.dropped_duplicate_edges += 1;
        }
    }

    let posts_name = posts_path.display().to_string();
    let mut posts: BTreeMap<UserId, Vec<Post>> = BTreeMap::new();
    for (idx, line) in read_utf8(posts_path)?.lines().enumerate() {
        let lineno = idx + 1;
        let rec: PostRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(&posts_name, lineno, e.to_string()))?;
        let author = UserId::new(rec.user_id)
            .map_err(|e| Error::parse(&posts_name, lineno, e.to_string()))?;
        posts
            .entry(author.clone())
            .or_default()
            .push(Post::new(rec.post_id, author, rec.text));
    }

    let dataset = Dataset::new(graph, posts, label)?;
    Ok((dataset, stats))
}

/// Writes `edges.tsv` and `posts.jsonl` under `out_dir`, sorted by user
/// id then post id so repeated saves are byte-identical.
pub fn save_dataset(dataset: &Dataset, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let edges_path = out_dir.join(EDGES_FILE);
    let mut edges_out = String::new();
    for (a, b) in dataset.graph.edges() {
        edges_out.push_str(a.as_str());
        edges_out.push('\t');
        edges_out.push_str(b.as_str());
        edges_out.push('\n');
    }
    fs::write(&edges_path, edges_out).map_err(|e| Error::io(&edges_path, e))?;

    let posts_path = out_dir.join(POSTS_FILE);
    let mut file = fs::File::create(&posts_path).map_err(|e| Error::io(&posts_path, e))?;
    for (author, list) in dataset.posts() {
        let mut sorted: Vec<&Post> = list.iter().collect();
        sorted.sort_by(|a, b| a.post_id.cmp(&b.post_id));
        for p in sorted {
            let rec = PostRecord {
                user_id: author.as_str().to_string(),
                post_id: p.post_id.clone(),
                text: p.text.clone(),
            };
            let line = serde_json::to_string(&rec).expect("post record serializes");
            writeln!(file, "{line}").map_err(|e| Error::io(&posts_path, e))?;
        }
    }
    Ok(())
}

pub fn save_ground_truth(truth: &GroundTruth, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (anon, public) in truth.raw_mapping() {
        out.push_str(anon.as_str());
        out.push('\t');
        out.push_str(public.as_str());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruth> {
    let name = path.display().to_string();
    let mut mapping = BTreeMap::new();
    for (idx, line) in read_utf8(path)?.lines().enumerate() {
        let lineno = idx + 1;
        let mut fields = line.split('\t');
        let (a, p) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(p), None) => (a, p),
            _ => {
                return Err(Error::parse(
                    &name,
                    lineno,
                    "expected exactly two tab-separated fields",
                ))
            }
        };
        let anon = UserId::new(a).map_err(|e| Error::parse(&name, lineno, e.to_string()))?;
        let public = UserId::new(p).map_err(|e| Error::parse(&name, lineno, e.to_string()))?;
        if mapping.insert(anon, public).is_some() {
            return Err(Error::parse(&name, lineno, "duplicate anonymized id"));
        }
    }
    GroundTruth::new(mapping)
}

/// One attack verdict per line: target, claimed identity (`-` when the
/// candidate set was empty), score with six decimals.
pub fn save_mapping(results: &[(UserId, Option<UserId>, f64)], path: &Path) -> Result<()> {
    let mut out = String::new();
    for (target, claimed, score) in results {
        out.push_str(target.as_str());
        out.push('\t');
        out.push_str(claimed.as_ref().map_or("-", |c| c.as_str()));
        out.push('\t');
        out.push_str(&format!("{score:.6}"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_mapping(path: &Path) -> Result<Vec<(UserId, Option<UserId>, f64)>> {
    let name = path.display().to_string();
    let mut out = Vec::new();
    for (idx, line) in read_utf8(path)?.lines().enumerate() {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(&name, lineno, "expected three fields"));
        }
        let target =
            UserId::new(fields[0]).map_err(|e| Error::parse(&name, lineno, e.to_string()))?;
        let claimed = if fields[1] == "-" {
            None
        } else {
            Some(UserId::new(fields[1]).map_err(|e| Error::parse(&name, lineno, e.to_string()))?)
        };
        let score: f64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(&name, lineno, "bad score"))?;
        out.push((target, claimed, score));
    }
    Ok(out)
}

//! Structural anonymizers: seeded edge perturbation and an
//! edge-addition variant of k-degree anonymity.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{Graph, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphTechnique {
    EdgePerturbation,
    KDegree,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphAnonConfig {
    pub technique: GraphTechnique,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_fraction() -> f64 {
    0.2
}

fn default_k() -> usize {
    5
}

impl Default for GraphAnonConfig {
    fn default() -> Self {
        GraphAnonConfig {
            technique: GraphTechnique::EdgePerturbation,
            fraction: default_fraction(),
            k: default_k(),
            seed: 0,
        }
    }
}

impl GraphAnonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::InvalidArgument(format!(
                "graph fraction {} outside [0,1]",
                self.fraction
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        Ok(())
    }

    pub fn apply(&self, graph: &Graph) -> Result<Graph> {
        self.validate()?;
        match self.technique {
            GraphTechnique::EdgePerturbation => perturb_edges(graph, self.fraction, self.seed),
            GraphTechnique::KDegree => k_degree_anonymize(graph, self.k, self.seed),
        }
    }
}

fn canonical(a: UserId, b: UserId) -> (UserId, UserId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Deletes round(fraction * |E|) uniformly chosen edges and inserts the
/// same number of fresh edges drawn uniformly from pairs that were not
/// adjacent in the input. |V| and |E| are unchanged and no original
/// edge can reappear, so |E_out ∩ E_in| = |E| - round(fraction * |E|).
pub fn perturb_edges(graph: &Graph, fraction: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "fraction {fraction} outside [0,1]"
        )));
    }
    let edges = graph.edges();
    let n_change = (fraction * edges.len() as f64).round() as usize;
    if n_change == 0 {
        return Ok(graph.clone());
    }

    let vertices: Vec<UserId> = graph.vertices().cloned().collect();
    let n = vertices.len();
    let total_pairs = n * (n - 1) / 2;
    let complement = total_pairs - edges.len();
    if complement < n_change {
        return Err(Error::EdgeInsertShortfall {
            requested: n_change,
            available: complement,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let delete: HashSet<usize> = rand::seq::index::sample(&mut rng, edges.len(), n_change)
        .into_iter()
        .collect();

    let original: HashSet<(UserId, UserId)> = edges.iter().cloned().collect();
    let mut inserted: HashSet<(UserId, UserId)> = HashSet::new();

    if complement <= 4 * n_change || total_pairs <= 200_000 {
        // Dense enough that rejection sampling may stall; enumerate the
        // complement and sample without replacement.
        let mut free: Vec<(UserId, UserId)> = Vec::with_capacity(complement);
        for i in 0..n {
            for j in (i + 1)..n {
                let pair = (vertices[i].clone(), vertices[j].clone());
                if !original.contains(&pair) {
                    free.push(pair);
                }
            }
        }
        for idx in rand::seq::index::sample(&mut rng, free.len(), n_change) {
            inserted.insert(free[idx].clone());
        }
    } else {
        while inserted.len() < n_change {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            let pair = canonical(vertices[i].clone(), vertices[j].clone());
            if original.contains(&pair) || inserted.contains(&pair) {
                continue;
            }
            inserted.insert(pair);
        }
    }

    let mut out = Graph::new();
    for v in &vertices {
        out.ensure_vertex(v.clone());
    }
    for (idx, (a, b)) in edges.iter().enumerate() {
        if !delete.contains(&idx) {
            out.add_edge(a.clone(), b.clone());
        }
    }
    for (a, b) in inserted {
        out.add_edge(a, b);
    }
    debug_assert_eq!(out.edge_count(), graph.edge_count());
    Ok(out)
}

fn degree_condition_holds(graph: &Graph, k: usize) -> bool {
    let mut counts: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    for v in graph.vertices() {
        *counts.entry(graph.degree(v)).or_insert(0) += 1;
    }
    counts.values().all(|&c| c >= k)
}

/// Edge-addition k-degree anonymization: after it returns, every degree
/// value present in the graph is shared by at least k vertices.
///
/// Greedy pass: sort vertices by descending degree with seeded
/// tie-breaks, partition into groups of k (short tail merged into the
/// previous group), and raise each member to its group maximum by adding
/// edges toward the lowest-degree eligible non-neighbors, preferring
/// partners that still need edges themselves. Additions can push a
/// bystander's degree into a singleton value, so passes repeat until the
/// degree multiset satisfies the condition.
pub fn k_degree_anonymize(graph: &Graph, k: usize, seed: u64) -> Result<Graph> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if k > graph.vertex_count().max(1) {
        return Err(Error::InvalidArgument(format!(
            "k={k} exceeds vertex count {}",
            graph.vertex_count()
        )));
    }
    let mut out = graph.clone();
    if k == 1 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    const MAX_PASSES: usize = 200;
    for _ in 0..MAX_PASSES {
        if degree_condition_holds(&out, k) {
            return Ok(out);
        }

        let mut order: Vec<UserId> = out.vertices().cloned().collect();
        order.shuffle(&mut rng);
        order.sort_by_key(|v| std::cmp::Reverse(out.degree(v)));

        // Group targets: each group of k takes its (current) maximum
        // degree; a short tail joins the previous group.
        let n = order.len();
        let n_groups = (n / k).max(1);
        let mut target: std::collections::HashMap<UserId, usize> =
            std::collections::HashMap::new();
        for g in 0..n_groups {
            let start = g * k;
            let end = if g + 1 == n_groups { n } else { (g + 1) * k };
            let group = &order[start..end];
            let max_deg = group.iter().map(|v| out.degree(v)).max().unwrap_or(0);
            for v in group {
                target.insert(v.clone(), max_deg);
            }
        }

        for u in order.clone() {
            while out.degree(&u) < target[&u] {
                // Lowest-degree eligible non-neighbor; partners still in
                // deficit first, then ascending id.
                let mut best: Option<(bool, usize, UserId)> = None;
                for v in out.vertices() {
                    if v == &u || out.has_edge(&u, v) {
                        continue;
                    }
                    let deficit = out.degree(v) < *target.get(v).unwrap_or(&0);
                    let key = (!deficit, out.degree(v), v.clone());
                    if best.as_ref().map_or(true, |b| key < *b) {
                        best = Some(key);
                    }
                }
                match best {
                    Some((_, _, v)) => {
                        out.add_edge(u.clone(), v);
                    }
                    None => return Err(Error::BlockedVertex(u.to_string())),
                }
            }
        }
    }
    Err(Error::Invariant(format!(
        "k-degree anonymization did not converge within {MAX_PASSES} passes"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn uid(s: &str) -> UserId {
        UserId::new(s).unwrap()
    }

    fn path_graph(n: usize) -> Graph {
        let mut g = Graph::new();
        for i in 0..n.saturating_sub(1) {
            g.add_edge(uid(&format!("v{i:03}")), uid(&format!("v{:03}", i + 1)));
        }
        g
    }

    fn edge_set(g: &Graph) -> BTreeSet<(UserId, UserId)> {
        g.edges().into_iter().collect()
    }

    #[test]
    fn perturb_zero_fraction_is_identity() {
        let g = path_graph(10);
        let out = perturb_edges(&g, 0.0, 1).unwrap();
        assert_eq!(out, g);
    }

    #[test]
    fn perturb_full_fraction_rewires_everything() {
        let mut g = path_graph(11); // 10 edges, 11 vertices
        g.ensure_vertex(uid("z"));
        let out = perturb_edges(&g, 1.0, 42).unwrap();
        assert_eq!(out.edge_count(), 10);
        assert!(edge_set(&out).is_disjoint(&edge_set(&g)));
        out.check_invariants().unwrap();
    }

    #[test]
    fn perturb_partial_fraction_changes_exact_count() {
        let g = path_graph(101); // 100 edges
        let out = perturb_edges(&g, 0.3, 7).unwrap();
        assert_eq!(out.edge_count(), 100);
        let shared = edge_set(&out).intersection(&edge_set(&g)).count();
        assert_eq!(shared, 70);
        assert_eq!(
            out.vertices().collect::<Vec<_>>(),
            g.vertices().collect::<Vec<_>>()
        );
        // Same seed reproduces the exact edge set.
        let again = perturb_edges(&g, 0.3, 7).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn perturb_rejects_bad_fraction_and_dense_graph() {
        let g = path_graph(4);
        assert!(perturb_edges(&g, 1.5, 0).is_err());

        // K4 has no room to insert anything.
        let mut k4 = Graph::new();
        let vs: Vec<UserId> = (0..4).map(|i| uid(&format!("v{i}"))).collect();
        for i in 0..4 {
            for j in (i + 1)..4 {
                k4.add_edge(vs[i].clone(), vs[j].clone());
            }
        }
        assert!(matches!(
            perturb_edges(&k4, 0.5, 0),
            Err(Error::EdgeInsertShortfall { .. })
        ));
    }

    fn degree_counts(g: &Graph) -> std::collections::HashMap<usize, usize> {
        let mut counts = std::collections::HashMap::new();
        for v in g.vertices() {
            *counts.entry(g.degree(v)).or_insert(0) += 1;
        }
        counts
    }

    #[test]
    fn k1_is_identity() {
        let g = path_graph(6);
        assert_eq!(k_degree_anonymize(&g, 1, 9).unwrap(), g);
    }

    #[test]
    fn star_becomes_two_anonymous() {
        let mut g = Graph::new();
        for i in 1..5 {
            g.add_edge(uid("hub"), uid(&format!("leaf{i}")));
        }
        let out = k_degree_anonymize(&g, 2, 3).unwrap();
        out.check_invariants().unwrap();
        // Only additions.
        for (a, b) in g.edges() {
            assert!(out.has_edge(&a, &b));
        }
        for (_, c) in degree_counts(&out) {
            assert!(c >= 2, "degree present fewer than k times");
        }
    }

    #[test]
    fn complete_graph_is_already_anonymous() {
        let mut k4 = Graph::new();
        let vs: Vec<UserId> = (0..4).map(|i| uid(&format!("v{i}"))).collect();
        for i in 0..4 {
            for j in (i + 1)..4 {
                k4.add_edge(vs[i].clone(), vs[j].clone());
            }
        }
        for k in 1..=4 {
            assert_eq!(k_degree_anonymize(&k4, k, 0).unwrap(), k4);
        }
    }

    #[test]
    fn k_degree_is_deterministic_given_seed() {
        let g = path_graph(12);
        let a = k_degree_anonymize(&g, 3, 5).unwrap();
        let b = k_degree_anonymize(&g, 3, 5).unwrap();
        assert_eq!(a, b);
    }
}

//! Four-case evaluation pipeline: generate a synthetic world, release a
//! pseudonymized copy, anonymize it per case, attack every user through
//! the platform interface, and score the results against ground truth.

use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use crate::anon_graph::GraphAnonConfig;
use crate::anon_text::TextAnonConfig;
use crate::attack::{AttackConfig, AttackSession, MappingResult};
use crate::error::{Error, Result};
use crate::model::{Dataset, GroundTruth, UserId};
use crate::platform::PlatformIndex;
use crate::synth::{generate_synthetic, make_release, SynthConfig};

/// The four anonymization configurations: neither aspect (beyond
/// pseudonymization), text only, structure only, or both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CaseId {
    Case1,
    Case2,
    Case3,
    Case4,
}

impl CaseId {
    pub const ALL: [CaseId; 4] = [CaseId::Case1, CaseId::Case2, CaseId::Case3, CaseId::Case4];

    pub fn anonymizes_structure(self) -> bool {
        matches!(self, CaseId::Case3 | CaseId::Case4)
    }

    pub fn anonymizes_text(self) -> bool {
        matches!(self, CaseId::Case2 | CaseId::Case4)
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(CaseId::Case1),
            2 => Ok(CaseId::Case2),
            3 => Ok(CaseId::Case3),
            4 => Ok(CaseId::Case4),
            other => Err(Error::InvalidArgument(format!("no case {other}"))),
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            CaseId::Case1 => 1,
            CaseId::Case2 => 2,
            CaseId::Case3 => 3,
            CaseId::Case4 => 4,
        };
        write!(f, "case{n}")
    }
}

/// Applies a case's anonymizers to the pseudonymized release. Case 4
/// runs the graph step first, then the text step.
pub fn apply_case(
    anon: &Dataset,
    case: CaseId,
    graph_cfg: &GraphAnonConfig,
    text_cfg: &TextAnonConfig,
) -> Result<Dataset> {
    let graph = if case.anonymizes_structure() {
        graph_cfg.apply(&anon.graph)?
    } else {
        anon.graph.clone()
    };
    let posts = if case.anonymizes_text() {
        text_cfg.apply(anon.posts())?
    } else {
        anon.posts().clone()
    };
    Dataset::new(graph, posts, format!("anon-{case}"))
}

/// Per-case attack quality metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseMetrics {
    pub top1_accuracy: f64,
    pub candidate_recall: f64,
    /// Mean 1-based rank of the true identity, over recalled targets
    /// only; 0 when nothing was recalled.
    pub mean_rank_of_truth: f64,
    pub n_targets: usize,
    pub mean_queries: f64,
}

/// Scores one attack run against ground truth. A target missing from
/// the truth mapping is an error; an absent claim counts as a miss.
pub fn evaluate_attack(mappings: &[MappingResult], truth: &GroundTruth) -> Result<CaseMetrics> {
    let n = mappings.len();
    let mut hits = 0usize;
    let mut recalled = 0usize;
    let mut rank_sum = 0usize;
    let mut query_sum = 0u64;
    for m in mappings {
        let true_id = truth
            .public_id_of(&m.target)
            .ok_or_else(|| Error::UnknownUser(format!("{} not in ground truth", m.target)))?;
        if m.claimed.as_ref() == Some(true_id) {
            hits += 1;
        }
        if let Some(pos) = m
            .ranked_candidates
            .iter()
            .position(|(u, _)| u == true_id)
        {
            recalled += 1;
            rank_sum += pos + 1;
        }
        query_sum += m.queries_used;
    }
    let frac = |x: usize| if n == 0 { 0.0 } else { x as f64 / n as f64 };
    Ok(CaseMetrics {
        top1_accuracy: frac(hits),
        candidate_recall: frac(recalled),
        mean_rank_of_truth: if recalled == 0 {
            0.0
        } else {
            rank_sum as f64 / recalled as f64
        },
        n_targets: n,
        mean_queries: if n == 0 { 0.0 } else { query_sum as f64 / n as f64 },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub case: CaseId,
    pub seed: u64,
    pub metrics: CaseMetrics,
    pub params_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseAggregate {
    pub case: CaseId,
    pub n_seeds: usize,
    pub mean: CaseMetrics,
    pub top1_std: f64,
    pub recall_std: f64,
    pub params_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixReport {
    pub reports: Vec<CaseReport>,
    pub aggregates: Vec<CaseAggregate>,
}

/// Full configuration of one case-matrix run.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    #[serde(default = "default_n_seeds")]
    pub n_seeds: u64,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub graph_anon: GraphAnonConfig,
    #[serde(default)]
    pub text_anon: TextAnonConfig,
    #[serde(default)]
    pub attack: AttackConfig,
}

fn default_n_seeds() -> u64 {
    1
}

impl Default for MatrixConfig {
    fn default() -> Self {
        MatrixConfig {
            n_seeds: default_n_seeds(),
            synth: SynthConfig::default(),
            graph_anon: GraphAnonConfig::default(),
            text_anon: TextAnonConfig::default(),
            attack: AttackConfig::default(),
        }
    }
}

impl MatrixConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("bad config: {e}")))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Stable fingerprint of every parameter that shapes the run.
    pub fn params_digest(&self) -> String {
        // FNV-1a over the debug rendering; hex-truncated. Only has to be
        // stable and collision-resistant at config-file scale.
        let s = format!("{self:?}");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in s.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Attacks every user of the anonymized dataset and returns results in
/// target order. `jobs` > 1 parallelizes across targets; results do not
/// depend on it.
pub fn attack_all_users(
    anon: &Dataset,
    platform: &PlatformIndex,
    config: AttackConfig,
    jobs: usize,
) -> Result<Vec<MappingResult>> {
    let session = AttackSession::new(anon, platform, config)?;
    let targets: Vec<UserId> = anon.users().cloned().collect();
    if jobs <= 1 {
        targets.iter().map(|t| session.map_user(t)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        pool.install(|| {
            targets
                .par_iter()
                .map(|t| session.map_user(t))
                .collect::<Result<Vec<_>>>()
        })
    }
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    var.sqrt()
}

/// Runs the whole pipeline for every (case, seed) pair and aggregates
/// per case. Seeds are `base..base+n_seeds` applied as offsets to every
/// component seed, so each repetition is a fully independent world.
pub fn run_case_matrix(config: &MatrixConfig, jobs: usize) -> Result<MatrixReport> {
    if config.n_seeds == 0 {
        return Err(Error::InvalidArgument("n_seeds must be >= 1".into()));
    }
    config.synth.validate()?;
    config.graph_anon.validate()?;
    config.text_anon.validate()?;
    config.attack.validate()?;

    let digest = config.params_digest();
    let mut reports = Vec::new();

    for offset in 0..config.n_seeds {
        let synth = SynthConfig {
            seed: config.synth.seed + offset,
            ..config.synth.clone()
        };
        let public = generate_synthetic(&synth)?;
        // Release pseudonyms come from an independent stream.
        let (release, truth) = make_release(&public, synth.seed ^ 0x9e37_79b9_7f4a_7c15)?;

        let graph_cfg = GraphAnonConfig {
            seed: config.graph_anon.seed + offset,
            ..config.graph_anon.clone()
        };
        let text_cfg = TextAnonConfig {
            seed: config.text_anon.seed + offset,
            ..config.text_anon.clone()
        };

        for case in CaseId::ALL {
            let cased = apply_case(&release, case, &graph_cfg, &text_cfg)?;
            let platform = PlatformIndex::build(&public);
            let mappings = attack_all_users(&cased, &platform, config.attack.clone(), jobs)?;
            let mut metrics = evaluate_attack(&mappings, &truth)?;
            // Query accounting from the platform log: total calls this
            // case run, averaged per target. Independent of scheduling.
            metrics.mean_queries = if metrics.n_targets == 0 {
                0.0
            } else {
                platform.query_count() as f64 / metrics.n_targets as f64
            };
            reports.push(CaseReport {
                case,
                seed: synth.seed,
                metrics,
                params_digest: digest.clone(),
            });
        }
    }
    // Stable ordering: case-major, seed-minor.
    reports.sort_by_key(|r| (r.case, r.seed));

    let mut aggregates = Vec::new();
    for case in CaseId::ALL {
        let rows: Vec<&CaseReport> = reports.iter().filter(|r| r.case == case).collect();
        let n = rows.len();
        let mean_of = |f: &dyn Fn(&CaseMetrics) -> f64| {
            rows.iter().map(|r| f(&r.metrics)).sum::<f64>() / n as f64
        };
        let top1: Vec<f64> = rows.iter().map(|r| r.metrics.top1_accuracy).collect();
        let recall: Vec<f64> = rows.iter().map(|r| r.metrics.candidate_recall).collect();
        aggregates.push(CaseAggregate {
            case,
            n_seeds: n,
            mean: CaseMetrics {
                top1_accuracy: mean_of(&|m| m.top1_accuracy),
                candidate_recall: mean_of(&|m| m.candidate_recall),
                mean_rank_of_truth: mean_of(&|m| m.mean_rank_of_truth),
                n_targets: rows.iter().map(|r| r.metrics.n_targets).sum::<usize>() / n,
                mean_queries: mean_of(&|m| m.mean_queries),
            },
            top1_std: sample_std(&top1),
            recall_std: sample_std(&recall),
            params_digest: digest.clone(),
        });
    }

    Ok(MatrixReport { reports, aggregates })
}

impl MatrixReport {
    pub fn aggregate(&self, case: CaseId) -> &CaseAggregate {
        self.aggregates
            .iter()
            .find(|a| a.case == case)
            .expect("aggregate exists for every case")
    }

    /// Tab-separated report: header, one row per (case, seed), then one
    /// aggregate row per case. Reals use six decimals; std columns hold
    /// `-` on per-seed rows.
    pub fn to_tsv(&self, version: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!("# anonybench case-matrix report v{version}\n"));
        out.push_str(
            "case\tseed\tn_targets\ttop1_accuracy\tcandidate_recall\tmean_rank_of_truth\tmean_queries\ttop1_std\trecall_std\tparams_digest\n",
        );
        for r in &self.reports {
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t-\t-\t{}\n",
                r.case,
                r.seed,
                r.metrics.n_targets,
                r.metrics.top1_accuracy,
                r.metrics.candidate_recall,
                r.metrics.mean_rank_of_truth,
                r.metrics.mean_queries,
                r.params_digest,
            ));
        }
        for a in &self.aggregates {
            out.push_str(&format!(
                "{}\tall\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\n",
                a.case,
                a.mean.n_targets,
                a.mean.top1_accuracy,
                a.mean.candidate_recall,
                a.mean.mean_rank_of_truth,
                a.mean.mean_queries,
                a.top1_std,
                a.recall_std,
                a.params_digest,
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anon_graph::GraphTechnique;
    use crate::anon_text::TextTechnique;
    use std::collections::BTreeSet;

    fn small_matrix_config() -> MatrixConfig {
        MatrixConfig {
            n_seeds: 1,
            synth: SynthConfig {
                n_users: 30,
                posts_per_user: 5,
                tokens_per_post: 6,
                vocab_shared: 40,
                vocab_per_community: 30,
                n_communities: 3,
                seed: 5,
                ..SynthConfig::default()
            },
            graph_anon: GraphAnonConfig::default(),
            text_anon: TextAnonConfig::default(),
            attack: AttackConfig {
                candidate_limit: 10,
                ..AttackConfig::default()
            },
        }
    }

    fn small_world() -> (Dataset, Dataset, GroundTruth) {
        let cfg = small_matrix_config();
        let public = generate_synthetic(&cfg.synth).unwrap();
        let (release, truth) = make_release(&public, 99).unwrap();
        (public, release, truth)
    }

    #[test]
    fn case1_is_identity() {
        let (_, release, _) = small_world();
        let out = apply_case(
            &release,
            CaseId::Case1,
            &GraphAnonConfig::default(),
            &TextAnonConfig::default(),
        )
        .unwrap();
        assert_eq!(out.graph, release.graph);
        assert_eq!(out.posts(), release.posts());
    }

    #[test]
    fn case2_only_touches_text() {
        let (_, release, _) = small_world();
        let out = apply_case(
            &release,
            CaseId::Case2,
            &GraphAnonConfig::default(),
            &TextAnonConfig::default(),
        )
        .unwrap();
        assert_eq!(out.graph, release.graph);
        assert_ne!(out.posts(), release.posts());
    }

    #[test]
    fn case3_only_touches_graph() {
        let (_, release, _) = small_world();
        let out = apply_case(
            &release,
            CaseId::Case3,
            &GraphAnonConfig::default(),
            &TextAnonConfig::default(),
        )
        .unwrap();
        assert_ne!(out.graph, release.graph);
        let orig_tokens: BTreeSet<&str> = release
            .all_posts()
            .flat_map(|p| p.tokens().iter().map(String::as_str))
            .collect();
        let new_tokens: BTreeSet<&str> = out
            .all_posts()
            .flat_map(|p| p.tokens().iter().map(String::as_str))
            .collect();
        assert_eq!(orig_tokens, new_tokens);
    }

    #[test]
    fn case4_composes_case3_with_text_step() {
        let (_, release, _) = small_world();
        let g = GraphAnonConfig::default();
        let t = TextAnonConfig::default();
        let case4 = apply_case(&release, CaseId::Case4, &g, &t).unwrap();
        let case3 = apply_case(&release, CaseId::Case3, &g, &t).unwrap();
        let composed = Dataset::new(
            case3.graph.clone(),
            t.apply(case3.posts()).unwrap(),
            case4.label.clone(),
        )
        .unwrap();
        assert_eq!(case4, composed);
    }

    #[test]
    fn evaluate_handles_perfect_and_empty_claims() {
        let (_, release, truth) = small_world();
        let targets: Vec<UserId> = release.users().cloned().collect();
        let perfect: Vec<MappingResult> = targets
            .iter()
            .map(|t| {
                let true_id = truth.public_id_of(t).unwrap().clone();
                MappingResult {
                    target: t.clone(),
                    claimed: Some(true_id.clone()),
                    score: 1.0,
                    ranked_candidates: vec![(true_id, 1.0)],
                    queries_used: 3,
                }
            })
            .collect();
        let m = evaluate_attack(&perfect, &truth).unwrap();
        assert_eq!(m.top1_accuracy, 1.0);
        assert_eq!(m.candidate_recall, 1.0);
        assert_eq!(m.mean_rank_of_truth, 1.0);

        let absent: Vec<MappingResult> = targets
            .iter()
            .map(|t| MappingResult {
                target: t.clone(),
                claimed: None,
                score: 0.0,
                ranked_candidates: vec![],
                queries_used: 0,
            })
            .collect();
        let m = evaluate_attack(&absent, &truth).unwrap();
        assert_eq!(m.top1_accuracy, 0.0);
        assert_eq!(m.candidate_recall, 0.0);
        assert_eq!(m.mean_rank_of_truth, 0.0);
    }

    #[test]
    fn evaluate_rejects_unknown_target() {
        let (_, _, truth) = small_world();
        let rogue = MappingResult {
            target: UserId::new("not-in-truth").unwrap(),
            claimed: None,
            score: 0.0,
            ranked_candidates: vec![],
            queries_used: 0,
        };
        assert!(evaluate_attack(&[rogue], &truth).is_err());
    }

    #[test]
    fn metric_bounds_hold_on_a_real_run() {
        let report = run_case_matrix(&small_matrix_config(), 1).unwrap();
        assert_eq!(report.reports.len(), 4);
        assert_eq!(report.aggregates.len(), 4);
        for r in &report.reports {
            let m = &r.metrics;
            assert!(m.top1_accuracy >= 0.0);
            assert!(m.top1_accuracy <= m.candidate_recall);
            assert!(m.candidate_recall <= 1.0);
        }
    }

    #[test]
    fn matrix_is_deterministic_and_case_ordered() {
        let cfg = small_matrix_config();
        let a = run_case_matrix(&cfg, 1).unwrap();
        let b = run_case_matrix(&cfg, 1).unwrap();
        assert_eq!(a, b);
        let cases: Vec<CaseId> = a.reports.iter().map(|r| r.case).collect();
        assert_eq!(cases, CaseId::ALL.to_vec());
        assert_eq!(a.to_tsv("test"), b.to_tsv("test"));
    }

    #[test]
    fn parallel_run_matches_serial() {
        let cfg = small_matrix_config();
        let serial = run_case_matrix(&cfg, 1).unwrap();
        let parallel = run_case_matrix(&cfg, 4).unwrap();
        for (s, p) in serial.reports.iter().zip(&parallel.reports) {
            assert_eq!(s.case, p.case);
            assert_eq!(s.metrics.top1_accuracy, p.metrics.top1_accuracy);
            assert_eq!(s.metrics.candidate_recall, p.metrics.candidate_recall);
            assert_eq!(s.metrics.mean_queries, p.metrics.mean_queries);
        }
    }

    #[test]
    fn toml_config_round_trip() {
        let text = r#"
n_seeds = 2

[synth]
n_users = 40
seed = 3

[graph_anon]
technique = "k_degree"
k = 3

[text_anon]
technique = "random_substitution"
rate = 0.5

[attack]
top_k_posts = 4
weights = [0.25, 0.25, 0.25, 0.25]
"#;
        let cfg = MatrixConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.n_seeds, 2);
        assert_eq!(cfg.synth.n_users, 40);
        assert_eq!(cfg.graph_anon.technique, GraphTechnique::KDegree);
        assert_eq!(cfg.graph_anon.k, 3);
        assert_eq!(cfg.text_anon.technique, TextTechnique::RandomSubstitution);
        assert_eq!(cfg.attack.top_k_posts, 4);
        assert!((cfg.attack.weights.text - 0.25).abs() < 1e-12);

        assert!(MatrixConfig::from_toml_str("nonsense = true").is_err());
    }
}

//! Command-line front end: thin orchestration over the library. Exit
//! codes: 0 success, 1 domain error, 2 usage error. All randomness
//! flows from explicit --seed flags.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use anonybench::anon_graph::{GraphAnonConfig, GraphTechnique};
use anonybench::anon_text::{TextAnonConfig, TextTechnique};
use anonybench::attack::{AttackConfig, Weights};
use anonybench::error::{Error, Result};
use anonybench::harness::{self, CaseId, MatrixConfig};
use anonybench::io;
use anonybench::model::UserId;
use anonybench::platform::PlatformIndex;
use anonybench::synth::{generate_synthetic, make_release, SynthConfig};

#[derive(Parser)]
#[command(name = "anonybench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic public dataset, its pseudonymized release,
    /// ground truth, and a platform index directory.
    Synth(SynthArgs),
    /// Anonymize a released dataset under one of the four cases.
    Anonymize(AnonymizeArgs),
    /// Run the de-anonymization attack against an anonymized release.
    Attack(AttackArgs),
    /// Score an attack mapping against ground truth.
    Evaluate(EvaluateArgs),
    /// Run the full four-case pipeline over several seeds.
    CaseMatrix(CaseMatrixArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    users: usize,
    #[arg(long, default_value_t = 4)]
    edges_per_vertex: usize,
    #[arg(long, default_value_t = 20)]
    posts_per_user: usize,
    #[arg(long, default_value_t = 8)]
    tokens_per_post: usize,
    #[arg(long, default_value_t = 200)]
    vocab_shared: usize,
    #[arg(long, default_value_t = 150)]
    vocab_per_community: usize,
    #[arg(long, default_value_t = 5)]
    communities: usize,
    #[arg(long, default_value_t = 0.3)]
    personal_term_prob: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphTechniqueArg {
    EdgePerturbation,
    KDegree,
}

#[derive(Clone, Copy, ValueEnum)]
enum TextTechniqueArg {
    IdfSuppression,
    RandomSubstitution,
}

#[derive(Args)]
struct AnonymizeArgs {
    /// Directory holding the released dataset (edges.tsv, posts.jsonl).
    #[arg(long)]
    in_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Case 1 = neither aspect, 2 = text only, 3 = structure only,
    /// 4 = both.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    case: u8,
    #[arg(long, value_enum, default_value = "edge-perturbation")]
    graph_technique: GraphTechniqueArg,
    #[arg(long, default_value_t = 0.2)]
    graph_fraction: f64,
    #[arg(long, default_value_t = 5)]
    k_degree: usize,
    #[arg(long, value_enum, default_value = "idf-suppression")]
    text_technique: TextTechniqueArg,
    #[arg(long, default_value_t = 0.2)]
    text_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    anon_dir: PathBuf,
    #[arg(long)]
    platform_dir: PathBuf,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    #[arg(long, default_value_t = 50)]
    candidates: usize,
    /// Four comma-separated weights summing to 1:
    /// text,structure,neighbor-text,neighbor-structure.
    #[arg(long, default_value = "0.40,0.20,0.25,0.15", value_parser = parse_weights)]
    weights: Weights,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    mapping: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Optional TSV output; metrics always print to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CaseMatrixArgs {
    /// TOML run configuration (sections: synth, graph_anon, text_anon,
    /// attack; top-level n_seeds).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn parse_weights(s: &str) -> std::result::Result<Weights, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err("expected four comma-separated weights".into());
    }
    let mut vals = [0.0f64; 4];
    for (slot, p) in vals.iter_mut().zip(&parts) {
        *slot = p
            .trim()
            .parse()
            .map_err(|_| format!("bad weight {p:?}"))?;
    }
    Weights::new(vals[0], vals[1], vals[2], vals[3]).map_err(|e| e.to_string())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_users: args.users,
        edges_per_new_vertex: args.edges_per_vertex,
        posts_per_user: args.posts_per_user,
        tokens_per_post: args.tokens_per_post,
        vocab_shared: args.vocab_shared,
        vocab_per_community: args.vocab_per_community,
        n_communities: args.communities,
        personal_term_prob: args.personal_term_prob,
        seed: args.seed,
    };
    let public = generate_synthetic(&cfg)?;
    let (release, truth) = make_release(&public, cfg.seed ^ 0x9e37_79b9_7f4a_7c15)?;

    io::save_dataset(&public, &args.out_dir.join("public"))?;
    io::save_dataset(&release, &args.out_dir.join("release"))?;
    io::save_ground_truth(&truth, &args.out_dir.join(io::GROUND_TRUTH_FILE))?;
    PlatformIndex::build(&public).save_to_dir(&args.out_dir.join("platform"))?;
    println!(
        "synth: {} users, {} edges, {} posts -> {}",
        public.graph.vertex_count(),
        public.graph.edge_count(),
        public.post_count(),
        args.out_dir.display()
    );
    Ok(())
}

fn run_anonymize(args: AnonymizeArgs) -> Result<()> {
    let (release, stats) = io::load_dataset(
        &args.in_dir.join(io::EDGES_FILE),
        &args.in_dir.join(io::POSTS_FILE),
        "release",
    )?;
    if stats.dropped_self_loops + stats.dropped_duplicate_edges > 0 {
        eprintln!(
            "anonymize: dropped {} self-loops, {} duplicate edges on load",
            stats.dropped_self_loops, stats.dropped_duplicate_edges
        );
    }
    let case = CaseId::from_number(args.case)?;
    let graph_cfg = GraphAnonConfig {
        technique: match args.graph_technique {
            GraphTechniqueArg::EdgePerturbation => GraphTechnique::EdgePerturbation,
            GraphTechniqueArg::KDegree => GraphTechnique::KDegree,
        },
        fraction: args.graph_fraction,
        k: args.k_degree,
        seed: args.seed,
    };
    let text_cfg = TextAnonConfig {
        technique: match args.text_technique {
            TextTechniqueArg::IdfSuppression => TextTechnique::IdfSuppression,
            TextTechniqueArg::RandomSubstitution => TextTechnique::RandomSubstitution,
        },
        rate: args.text_rate,
        seed: args.seed,
    };
    let out = harness::apply_case(&release, case, &graph_cfg, &text_cfg)?;
    io::save_dataset(&out, &args.out_dir)?;
    println!("anonymize: {case} written to {}", args.out_dir.display());
    Ok(())
}

fn run_attack(args: AttackArgs) -> Result<()> {
    let (anon, _) = io::load_dataset(
        &args.anon_dir.join(io::EDGES_FILE),
        &args.anon_dir.join(io::POSTS_FILE),
        "anon",
    )?;
    let platform = PlatformIndex::load_from_dir(&args.platform_dir)?;
    let config = AttackConfig {
        top_k_posts: args.top_k,
        candidate_limit: args.candidates,
        weights: args.weights,
        ..AttackConfig::default()
    };
    let results = harness::attack_all_users(&anon, &platform, config, args.jobs)?;
    let rows: Vec<(UserId, Option<UserId>, f64)> = results
        .into_iter()
        .map(|r| (r.target, r.claimed, r.score))
        .collect();
    io::save_mapping(&rows, &args.out)?;
    println!(
        "attack: {} targets mapped, {} platform queries -> {}",
        rows.len(),
        platform.query_count(),
        args.out.display()
    );
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let truth = io::load_ground_truth(&args.truth)?;
    let rows = io::load_mapping(&args.mapping)?;
    let n = rows.len();
    let mut hits = 0usize;
    for (target, claimed, _) in &rows {
        let true_id = truth
            .public_id_of(target)
            .ok_or_else(|| Error::UnknownUser(format!("{target} not in ground truth")))?;
        if claimed.as_ref() == Some(true_id) {
            hits += 1;
        }
    }
    let top1 = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
    let summary = format!("n_targets\t{n}\ntop1_accuracy\t{top1:.6}\n");
    print!("{summary}");
    if let Some(out) = &args.out {
        std::fs::write(out, &summary).map_err(|e| Error::io(out, e))?;
    }
    Ok(())
}

fn run_case_matrix(args: CaseMatrixArgs) -> Result<()> {
    let config = MatrixConfig::from_toml_file(&args.config)?;
    let report = harness::run_case_matrix(&config, args.jobs)?;
    let tsv = report.to_tsv(anonybench::VERSION);
    std::fs::write(&args.out, &tsv).map_err(|e| Error::io(&args.out, e))?;
    for a in &report.aggregates {
        println!(
            "{}: top1 {:.3} ± {:.3}, recall {:.3}",
            a.case, a.mean.top1_accuracy, a.top1_std, a.mean.candidate_recall
        );
    }
    println!("case-matrix: report -> {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => run_synth(args),
        Command::Anonymize(args) => run_anonymize(args),
        Command::Attack(args) => run_attack(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::CaseMatrix(args) => run_case_matrix(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

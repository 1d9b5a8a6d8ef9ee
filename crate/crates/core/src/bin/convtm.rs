//! Command-line pipeline: synth -> train -> topics -> coherence ->
//! summarize -> recover, plus corpus validation.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use convtm::corpus::{self, Corpus};
use convtm::eval::{self, DocUnit};
use convtm::model::{read_model, write_model, Hyperparams, Variant};
use convtm::summarize;
use convtm::synth::{self, GroundTruth, SynthConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "convtm", version, about = "Conversational discourse + topic modeling over conversation trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with known ground truth
    Synth(SynthArgs),
    /// Train a model with collapsed Gibbs sampling
    Train(TrainArgs),
    /// Print the top words of each topic as TSV
    Topics(TopicsArgs),
    /// Score topic coherence (UMass) against a reference corpus
    Coherence(CoherenceArgs),
    /// Extract a KL-greedy summary of one conversation tree
    Summarize(SummarizeArgs),
    /// Compare a trained model's assignments against synthetic ground truth
    Recover(RecoverArgs),
    /// Validate a JSONL corpus and report invariant violations
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output corpus path (JSONL)
    #[arg(long)]
    out: PathBuf,
    /// Output ground-truth archive path (JSON)
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 5)]
    topics: usize,
    #[arg(long, default_value_t = 3)]
    discourse: usize,
    #[arg(long, default_value_t = 200)]
    vocab: usize,
    #[arg(long, default_value_t = 10.0)]
    mean_messages: f64,
    #[arg(long, default_value_t = 4)]
    branching: usize,
    #[arg(long, default_value_t = 8.0)]
    mean_tokens: f64,
    #[arg(long, default_value_t = 0.5)]
    gen_alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    gen_beta: f64,
    #[arg(long, default_value_t = 0.1)]
    gen_gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    gen_delta: f64,
    #[arg(long, default_value_t = 0.2)]
    ineligible_frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Input corpus (JSONL)
    #[arg(long)]
    input: PathBuf,
    /// Output model archive
    #[arg(long, default_value = "model.tsv")]
    output: PathBuf,
    #[arg(long, default_value_t = 50)]
    topics: usize,
    #[arg(long, default_value_t = 10)]
    discourse: usize,
    /// alpha (default 50/topics)
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    #[arg(long, default_value = "full")]
    variant: String,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    burnin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    /// Progress line interval in sweeps (0 disables)
    #[arg(long, default_value_t = 100)]
    log_every: usize,
    /// Also write the vocabulary sidecar TSV next to the model
    #[arg(long)]
    vocab_out: Option<PathBuf>,
}

#[derive(Args)]
struct TopicsArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 10)]
    top: usize,
}

#[derive(Args)]
struct CoherenceArgs {
    #[arg(long)]
    model: PathBuf,
    /// Reference corpus (defaults to scoring against the training corpus,
    /// which must then be supplied here)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 10)]
    top: usize,
    /// Document unit: message or tree
    #[arg(long, default_value = "message")]
    unit: String,
    #[arg(long, default_value_t = 1)]
    min_count: u64,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Corpus containing the tree (same JSONL the model was trained on)
    #[arg(long)]
    input: PathBuf,
    /// Tree id to summarize
    #[arg(long)]
    tree: String,
    /// Number of messages to extract
    #[arg(long)]
    length: usize,
    /// Allow the root message to be selected
    #[arg(long)]
    include_root: bool,
    #[arg(long, default_value_t = 1)]
    min_count: u64,
}

#[derive(Args)]
struct RecoverArgs {
    /// Ground-truth archive from `synth`
    #[arg(long)]
    truth: PathBuf,
    /// Model archive from `train`
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    min_count: u64,
}

#[derive(Serialize)]
struct RunManifest {
    subcommand: String,
    config: serde_json::Value,
    input_hashes: Vec<(String, String)>,
    seed: Option<u64>,
    tool_version: String,
    wall_clock_secs: f64,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{:02x}", b)).collect())
}

/// Write the manifest atomically next to an output artifact.
fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<()> {
    let path = out.with_extension(format!(
        "{}manifest.json",
        out.extension()
            .map(|e| format!("{}.", e.to_string_lossy()))
            .unwrap_or_default()
    ));
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_vec_pretty(manifest)?)?;
    std::fs::rename(&tmp, &path)?;
    Ok(())
}

fn load_corpus(path: &Path, min_count: u64) -> Result<Corpus> {
    corpus::load_corpus(path, min_count).map_err(|e| anyhow!("{}", e))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version on stdout with success status
            if e.use_stderr() {
                eprintln!("{}", e);
                return ExitCode::from(1);
            }
            print!("{}", e);
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let started = Instant::now();
    match cli.command {
        Command::Synth(a) => {
            let config = SynthConfig {
                trees: a.trees,
                topics: a.topics,
                discourse: a.discourse,
                vocab: a.vocab,
                mean_messages: a.mean_messages,
                branching: a.branching,
                mean_tokens: a.mean_tokens,
                alpha: a.gen_alpha,
                beta: a.gen_beta,
                gamma: a.gen_gamma,
                delta: a.gen_delta,
                ineligible_frac: a.ineligible_frac,
                seed: a.seed,
            };
            let (corpus, truth) = synth::generate(&config);
            corpus::write_corpus(&corpus, &a.out).map_err(|e| anyhow!("{}", e))?;
            let tmp = a.truth.with_extension("tmp");
            std::fs::write(&tmp, serde_json::to_vec(&truth)?)?;
            std::fs::rename(&tmp, &a.truth)?;
            write_manifest(
                &a.out,
                &RunManifest {
                    subcommand: "synth".into(),
                    config: serde_json::to_value(&config)?,
                    input_hashes: vec![],
                    seed: Some(a.seed),
                    tool_version: env!("CARGO_PKG_VERSION").into(),
                    wall_clock_secs: started.elapsed().as_secs_f64(),
                },
            )?;
            eprintln!(
                "wrote {} trees, {} messages to {}",
                corpus.num_trees(),
                corpus.total_messages(),
                a.out.display()
            );
            Ok(())
        }
        Command::Train(a) => {
            let variant = Variant::parse(&a.variant)
                .ok_or_else(|| anyhow!("unknown variant {:?}", a.variant))?;
            let corpus = load_corpus(&a.input, a.min_count)?;
            let mut hyper = Hyperparams::new(a.topics, variant);
            hyper.discourse = a.discourse;
            hyper.alpha = a.alpha.unwrap_or(50.0 / a.topics as f64);
            hyper.beta = a.beta;
            hyper.gamma = a.gamma;
            hyper.delta = a.delta;
            hyper.iters = a.iters;
            hyper.burnin = a.burnin;
            hyper.seed = a.seed;
            hyper.validate().map_err(|e| anyhow!("{}", e))?;
            if let Some(vocab_out) = &a.vocab_out {
                corpus::write_vocab_tsv(&corpus.vocab, vocab_out).map_err(|e| anyhow!("{}", e))?;
            }
            let input_hash = sha256_file(&a.input)?;
            let (model, _state, _stats) =
                convtm::sampler::train_with_progress(Arc::new(corpus), hyper.clone(), a.log_every);
            write_model(&model, &a.output).map_err(|e| anyhow!("{}", e))?;
            write_manifest(
                &a.output,
                &RunManifest {
                    subcommand: "train".into(),
                    config: serde_json::to_value(&hyper)?,
                    input_hashes: vec![(a.input.display().to_string(), input_hash)],
                    seed: Some(a.seed),
                    tool_version: env!("CARGO_PKG_VERSION").into(),
                    wall_clock_secs: started.elapsed().as_secs_f64(),
                },
            )?;
            eprintln!("wrote model archive to {}", a.output.display());
            Ok(())
        }
        Command::Topics(a) => {
            let model = read_model(&a.model).map_err(|e| anyhow!("{}", e))?;
            println!("topic\trank\tword\tprob");
            for k in 0..model.hyper.topics {
                let report = eval::top_words(&model, k, a.top).map_err(|e| anyhow!("{}", e))?;
                for (rank, (w, p)) in report.words.iter().enumerate() {
                    let word = model
                        .vocab_words
                        .get(*w)
                        .map(|s| s.as_str())
                        .unwrap_or("?");
                    println!("{}\t{}\t{}\t{}", k, rank + 1, word, p);
                }
            }
            Ok(())
        }
        Command::Coherence(a) => {
            let model = read_model(&a.model).map_err(|e| anyhow!("{}", e))?;
            let corpus = load_corpus(&a.input, a.min_count)?;
            let unit = match a.unit.as_str() {
                "message" => DocUnit::Message,
                "tree" => DocUnit::Tree,
                other => return Err(anyhow!("unknown document unit {:?}", other)),
            };
            // top words are scored by id, so the reference vocabulary must
            // line up with the model's
            if corpus.vocab.hash() != model.vocab_hash {
                log::warn!("reference corpus vocabulary differs from the training vocabulary; words are matched by surface");
            }
            let docs = eval::reference_docs(&corpus, unit);
            // remap model word ids to the reference corpus ids by surface
            let mut per_topic = Vec::new();
            println!("# doc_unit={} (CV coherence is not implemented here; see the Palmetto toolkit)", unit.as_str());
            println!("topic\tN\tscore");
            for k in 0..model.hyper.topics {
                let report = eval::top_words(&model, k, a.top).map_err(|e| anyhow!("{}", e))?;
                let ids: Vec<usize> = report
                    .words
                    .iter()
                    .filter_map(|&(w, _)| corpus.vocab.id(&model.vocab_words[w]))
                    .collect();
                let (score, _) =
                    eval::umass_coherence(&ids, &docs).map_err(|e| anyhow!("{}", e))?;
                println!("{}\t{}\t{}", k, a.top, score);
                per_topic.push(score);
            }
            let avg = per_topic.iter().sum::<f64>() / per_topic.len().max(1) as f64;
            println!("AVG\t{}\t{}", a.top, avg);
            Ok(())
        }
        Command::Summarize(a) => {
            let model = read_model(&a.model).map_err(|e| anyhow!("{}", e))?;
            let corpus = load_corpus(&a.input, a.min_count)?;
            let c = corpus
                .tree_by_id(&a.tree)
                .ok_or_else(|| anyhow!("tree id {:?} not found", a.tree))?;
            let result = summarize::greedy_extract(&model, &corpus, c, a.length, a.include_root)
                .map_err(|e| anyhow!("{}", e))?;
            #[derive(Serialize)]
            struct Out<'a> {
                tree_id: &'a str,
                selected: &'a [usize],
                surfaces: Vec<Vec<&'a str>>,
                kl_trace: &'a [f64],
                include_root: bool,
                char_len: usize,
            }
            let surfaces = result
                .selected
                .iter()
                .map(|&m| {
                    corpus.trees[c].messages[m]
                        .tokens
                        .iter()
                        .map(|t| t.surface.as_str())
                        .collect()
                })
                .collect();
            let out = Out {
                tree_id: &result.tree_id,
                selected: &result.selected,
                surfaces,
                kl_trace: &result.kl_trace,
                include_root: result.include_root,
                char_len: result.char_len,
            };
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(())
        }
        Command::Recover(a) => {
            let truth: GroundTruth = serde_json::from_slice(&std::fs::read(&a.truth)?)?;
            let model = read_model(&a.model).map_err(|e| anyhow!("{}", e))?;
            let assign = &model.assignments;
            if model.hyper.variant == Variant::Lda {
                return Err(anyhow!(
                    "LDA has per-token topics; message-level recovery is undefined"
                ));
            }
            let d = if assign.d.is_empty() {
                None
            } else {
                Some(assign.d.as_slice())
            };
            let (topic_acc, disc_acc) = synth::recovery_from_assignments(
                &truth,
                &assign.z,
                d,
                model.hyper.topics,
                model.hyper.discourse,
            )
            .map_err(|e| anyhow!("{}", e))?;
            println!("topic_accuracy\t{:.4}", topic_acc);
            match disc_acc {
                Some(acc) => println!("discourse_accuracy\t{:.4}", acc),
                None => println!("discourse_accuracy\t-"),
            }
            Ok(())
        }
        Command::Validate(a) => {
            let corpus = load_corpus(&a.input, a.min_count)?;
            let mut total = 0;
            for t in &corpus.trees {
                for v in corpus::validate_tree(t) {
                    println!("{}\t{}", t.tree_id, v);
                    total += 1;
                }
            }
            eprintln!(
                "{} trees, {} messages, {} tokens, V={}, {} violations",
                corpus.num_trees(),
                corpus.total_messages(),
                corpus.total_tokens(),
                corpus.vocab.size(),
                total
            );
            if total > 0 {
                return Err(anyhow!("{} invariant violations", total));
            }
            Ok(())
        }
    }
}

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use wsi_cli::pipeline::{
    self, read_predictions, read_sense_clusters, resolve_targets, sense_cluster_lines, target_key, Baselines, Inputs,
    MappingLine,
};
use wsi_cli::{exit, ConfigOverrides, Failure, Method, RunConfig, Targets};
use wsi_core::corpus::Occurrence;
use wsi_core::evaluation::{evaluate_word, first_sense_baseline, most_frequent_baseline, partition_for, Report};
use wsi_core::method_one::{assign_all, collect_neighbor_set, induce_senses, SenseClusters};
use wsi_core::method_two::{build_lemma_vectors, run_method_two, write_vectors_jsonl};

#[derive(Parser)]
#[command(name = "wsi", version, about = "Word sense induction from embeddings or substitutes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct OutArg {
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Neighbour set of one word.
    Neighbors {
        #[arg(long)]
        lemma: String,
        #[command(flatten)]
        out: OutArg,
        #[command(flatten)]
        common: Common,
    },
    /// Sense clusters from embedding neighbours.
    Induce {
        #[command(flatten)]
        out: OutArg,
        #[command(flatten)]
        common: Common,
    },
    /// Assign occurrences to embedding sense clusters.
    Assign {
        /// Clusters JSONL from `induce`; induced on the fly if omitted.
        #[arg(long)]
        senses: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
        #[command(flatten)]
        common: Common,
    },
    /// Representative vectors built from substitutes.
    Repvec {
        #[command(flatten)]
        out: OutArg,
        #[command(flatten)]
        common: Common,
    },
    /// Cluster representative vectors and map occurrences to clusters.
    Map {
        #[command(flatten)]
        out: OutArg,
        #[command(flatten)]
        common: Common,
    },
    /// Score a predictions file against gold annotations.
    Evaluate {
        /// Assignments or mapping JSONL.
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        #[command(flatten)]
        out: OutArg,
        #[command(flatten)]
        common: Common,
    },
    /// First-sense and most-frequent-sense baselines.
    Baseline {
        #[command(flatten)]
        out: OutArg,
        #[command(flatten)]
        common: Common,
    },
    /// Full pipeline into the output directory.
    Run {
        #[command(flatten)]
        common: Common,
    },
}

fn resolve(common: &Common) -> Result<RunConfig, Failure> {
    RunConfig::resolve(&ConfigOverrides::load(common.config.as_deref(), &common.overrides)?)
}

fn sink(out: &OutArg) -> Result<Box<dyn Write>, Failure> {
    Ok(match &out.out {
        Some(p) => Box::new(BufWriter::new(create_file(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn create_file(p: &Path) -> Result<File, Failure> {
    File::create(p).map_err(|e| Failure::Internal(format!("cannot create {}: {e}", p.display())))
}

fn emit_json<T: Serialize>(out: &OutArg, value: &T) -> Result<(), Failure> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Internal(e.to_string()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Targets, needing the corpus only when they default to the annotated set.
fn targets_for(cfg: &RunConfig, inputs: &Inputs) -> Result<Vec<(String, wsi_core::Pos)>, Failure> {
    resolve_targets(cfg, inputs.corpus.as_ref())
}

fn annotated_requirement(cfg: &RunConfig, base: &[&'static str]) -> Vec<&'static str> {
    let mut v = base.to_vec();
    if cfg.targets == Targets::AllAnnotated {
        v.extend(["corpus", "annotations"]);
    }
    v
}

fn cmd_neighbors(lemma: &str, out: &OutArg, cfg: &RunConfig) -> Result<(), Failure> {
    let inputs = Inputs::load(cfg, &["embeddings"], &[])?;
    let set = collect_neighbor_set(inputs.store(), lemma, &cfg.method_one())?;
    emit_json(out, &set)
}

fn induce_target(cfg: &RunConfig, inputs: &Inputs, lemma: &str, pos: wsi_core::Pos) -> Result<SenseClusters, Failure> {
    let seed = pipeline::lemma_seed(cfg.seed, lemma, pos);
    Ok(induce_senses(inputs.store(), lemma, pos, seed, &cfg.method_one())?)
}

fn cmd_induce(out: &OutArg, cfg: &RunConfig) -> Result<(), Failure> {
    let inputs = Inputs::load(cfg, &annotated_requirement(cfg, &["embeddings"]), &[])?;
    let mut lines = Vec::new();
    for (lemma, pos) in targets_for(cfg, &inputs)? {
        lines.extend(sense_cluster_lines(&induce_target(cfg, &inputs, &lemma, pos)?));
    }
    Ok(pipeline::write_jsonl(&lines, sink(out)?)?)
}

fn cmd_assign(senses: Option<&Path>, out: &OutArg, cfg: &RunConfig) -> Result<(), Failure> {
    let inputs = Inputs::load(cfg, &annotated_requirement(cfg, &["corpus", "embeddings"]), &[])?;
    let corpus = inputs.corpus();
    let given = senses.map(read_sense_clusters).transpose()?;
    let mut all = Vec::new();
    for (lemma, pos) in targets_for(cfg, &inputs)? {
        let clusters = match &given {
            Some(map) => {
                let words = map.get(&(lemma.clone(), pos)).ok_or_else(|| {
                    Failure::Data(format!("senses file has no clusters for {}", target_key(&lemma, pos)))
                })?;
                SenseClusters::from_words(inputs.store(), &lemma, pos, words)?
            }
            None => induce_target(cfg, &inputs, &lemma, pos)?,
        };
        let occs = corpus.collect_occurrences(&lemma, pos, cfg.occurrence_cap)?;
        all.extend(assign_all(
            inputs.store(),
            &clusters,
            &occs,
            |o| corpus.sentence(o.sentence),
            cfg.variant,
            &cfg.method_one(),
        ));
    }
    Ok(pipeline::write_jsonl(&all, sink(out)?)?)
}

fn cmd_repvec(out: &OutArg, cfg: &RunConfig) -> Result<(), Failure> {
    let inputs = Inputs::load(cfg, &annotated_requirement(cfg, &["corpus", "substitutes"]), &[])?;
    let corpus = inputs.corpus();
    let mut w = sink(out)?;
    for (lemma, pos) in targets_for(cfg, &inputs)? {
        let occs = corpus.collect_occurrences(&lemma, pos, cfg.occurrence_cap)?;
        let seed = pipeline::lemma_seed(cfg.seed, &lemma, pos);
        let (space, vectors, _) =
            build_lemma_vectors(corpus, &lemma, pos, &occs, inputs.table(), &cfg.method_two(), seed)?;
        write_vectors_jsonl(&space, &vectors, &mut w)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_map(out: &OutArg, cfg: &RunConfig) -> Result<(), Failure> {
    let inputs = Inputs::load(cfg, &annotated_requirement(cfg, &["corpus", "substitutes"]), &[])?;
    let corpus = inputs.corpus();
    let mut lines = Vec::new();
    for (lemma, pos) in targets_for(cfg, &inputs)? {
        let occs = corpus.collect_occurrences(&lemma, pos, cfg.occurrence_cap)?;
        let seed = pipeline::lemma_seed(cfg.seed, &lemma, pos);
        let result = run_method_two(corpus, &lemma, pos, &occs, inputs.table(), &cfg.method_two(), seed)?;
        lines.extend(result.mappings.into_iter().map(|mapping| MappingLine {
            lemma: lemma.clone(),
            pos,
            mapping,
        }));
    }
    Ok(pipeline::write_jsonl(&lines, sink(out)?)?)
}

fn cmd_evaluate(predictions: &Path, format: Format, out: &OutArg, cfg: &RunConfig) -> Result<(), Failure> {
    let inputs = Inputs::load(cfg, &["corpus", "annotations"], &[])?;
    let corpus = inputs.corpus();
    let predicted = read_predictions(predictions)?;
    let mut rows = Vec::new();
    for (lemma, pos) in targets_for(cfg, &inputs)? {
        let occs = corpus.collect_occurrences(&lemma, pos, cfg.occurrence_cap)?;
        let partition = partition_for(&occs, |id| predicted.get(id).copied().flatten(), cfg.report_mode)?;
        if partition.is_empty() {
            log::warn!("nothing to score for {}", target_key(&lemma, pos));
            continue;
        }
        rows.push(evaluate_word(&lemma, pos, &partition)?);
    }
    let report = Report::build(rows);
    match format {
        Format::Json => emit_json(out, &report),
        Format::Table => {
            let mut w = sink(out)?;
            w.write_all(report.to_table().as_bytes())?;
            w.flush()?;
            Ok(())
        }
    }
}

fn cmd_baseline(out: &OutArg, cfg: &RunConfig) -> Result<(), Failure> {
    let inputs = Inputs::load(cfg, &["corpus", "annotations"], &["inventory"])?;
    let corpus = inputs.corpus();
    let mut occs: Vec<Occurrence> = Vec::new();
    for (lemma, pos) in targets_for(cfg, &inputs)? {
        occs.extend(corpus.collect_occurrences(&lemma, pos, cfg.occurrence_cap)?);
    }
    let baselines = Baselines {
        first_sense: inputs
            .inventory
            .as_ref()
            .map(|inv| first_sense_baseline(&occs, inv))
            .transpose()?,
        most_frequent: most_frequent_baseline(&occs)?,
    };
    emit_json(out, &baselines)
}

fn cmd_run(cfg: &RunConfig) -> Result<(), Failure> {
    let summary = pipeline::run(cfg)?;
    let dir = cfg.output.as_deref().expect("run requires output");
    eprintln!(
        "{} targets, {} scored; method {}; outputs in {}",
        summary.manifest.targets.len(),
        summary.report.rows.len(),
        match cfg.method {
            Method::One => "one",
            Method::Two => "two",
        },
        dir.display()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Neighbors { lemma, out, common } => cmd_neighbors(lemma, out, &resolve(common)?),
        Command::Induce { out, common } => cmd_induce(out, &resolve(common)?),
        Command::Assign { senses, out, common } => cmd_assign(senses.as_deref(), out, &resolve(common)?),
        Command::Repvec { out, common } => cmd_repvec(out, &resolve(common)?),
        Command::Map { out, common } => cmd_map(out, &resolve(common)?),
        Command::Evaluate {
            predictions,
            format,
            out,
            common,
        } => cmd_evaluate(predictions, *format, out, &resolve(common)?),
        Command::Baseline { out, common } => cmd_baseline(out, &resolve(common)?),
        Command::Run { common } => cmd_run(&resolve(common)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match std::panic::catch_unwind(|| dispatch(cli)) {
        Ok(Ok(())) => exit::OK,
        Ok(Err(failure)) => {
            eprintln!("{}", failure.to_json());
            failure.exit_code()
        }
        Err(_) => {
            eprintln!("{}", Failure::Internal("panic".into()).to_json());
            exit::INTERNAL
        }
    };
    ExitCode::from(code as u8)
}

//! Loading inputs, running a method over every target and writing the run
//! directory.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wsi_core::corpus::{load_corpus, CorpusFormat, Occurrence, Pos, SenseInventory};
use wsi_core::evaluation::{
    evaluate_word, first_sense_baseline, most_frequent_baseline, partition_for, BaselineReport, EvalRow, Report,
};
use wsi_core::method_one::{assign_all, induce_senses, Assignment, NeighborRule, SenseClusters};
use wsi_core::method_two::{run_method_two, vector_node_id, OccurrenceMapping, SubstituteTable};
use wsi_core::seed::{derive_seed, fnv1a};
use wsi_core::{Corpus, EmbeddingStore, Error};

use crate::config::{Method, RunConfig, Targets};
use crate::Failure;

/// Input data for one command. Only what the command asked for is loaded.
#[derive(Default)]
pub struct Inputs {
    pub corpus: Option<Corpus>,
    pub store: Option<EmbeddingStore>,
    pub table: Option<SubstituteTable>,
    pub inventory: Option<SenseInventory>,
}

impl Inputs {
    /// Loads every `required` input and any `optional` one that is configured.
    /// Annotations are attached to the corpus whenever configured.
    pub fn load(cfg: &RunConfig, required: &[&str], optional: &[&str]) -> Result<Self, Failure> {
        cfg.require(required)?;
        let wanted = |key: &str| required.contains(&key) || optional.contains(&key);
        let mut inputs = Inputs::default();
        if wanted("corpus") {
            if let Some(path) = &cfg.corpus {
                let mut corpus = load_corpus(path, CorpusFormat::Jsonl)?;
                if let Some(ann) = &cfg.annotations {
                    let n = corpus.load_annotations(ann)?;
                    log::info!("{n} annotated tokens");
                }
                inputs.corpus = Some(corpus);
            }
        }
        if wanted("embeddings") {
            if let Some(path) = &cfg.embeddings {
                inputs.store = Some(EmbeddingStore::load(path)?);
            }
        }
        if wanted("substitutes") {
            if let Some(path) = &cfg.substitutes {
                inputs.table = Some(SubstituteTable::load(path)?);
            }
        }
        if wanted("inventory") {
            if let Some(path) = &cfg.inventory {
                inputs.inventory = Some(SenseInventory::load(path)?);
            }
        }
        Ok(inputs)
    }

    pub fn corpus(&self) -> &Corpus {
        self.corpus.as_ref().expect("corpus was required")
    }

    pub fn store(&self) -> &EmbeddingStore {
        self.store.as_ref().expect("embeddings were required")
    }

    pub fn table(&self) -> &SubstituteTable {
        self.table.as_ref().expect("substitutes were required")
    }
}

/// The configured target list, or every annotated lemma in the corpus.
pub fn resolve_targets(cfg: &RunConfig, corpus: Option<&Corpus>) -> Result<Vec<(String, Pos)>, Failure> {
    match &cfg.targets {
        Targets::List(list) => Ok(list.clone()),
        Targets::AllAnnotated => {
            let corpus = corpus
                .ok_or_else(|| Failure::config("targets default to all annotated lemmas, which needs `corpus`"))?;
            if cfg.annotations.is_none() {
                return Err(Failure::config(
                    "targets default to all annotated lemmas, which needs `annotations`; set `targets` otherwise",
                ));
            }
            let targets = corpus.annotated_targets();
            if targets.is_empty() {
                return Err(Failure::Data("annotations cover no corpus tokens".into()));
            }
            Ok(targets)
        }
    }
}

pub fn target_key(lemma: &str, pos: Pos) -> String {
    format!("{lemma}/{pos}")
}

/// Seed for one target, independent of which other targets run.
pub fn lemma_seed(master: u64, lemma: &str, pos: Pos) -> u64 {
    derive_seed(master, &target_key(lemma, pos))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLine {
    pub lemma: String,
    pub pos: Pos,
    pub node: String,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingLine {
    pub lemma: String,
    pub pos: Pos,
    #[serde(flatten)]
    pub mapping: OccurrenceMapping,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    One(Vec<Assignment>),
    Two(Vec<MappingLine>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LemmaWarnings {
    pub unassigned: usize,
    pub neighbor_fallback: bool,
    pub neighbor_shortfall: bool,
    pub missing_predictions: usize,
    pub short_vectors: usize,
    pub target_filtered: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaOutcome {
    pub lemma: String,
    pub pos: Pos,
    pub seed: u64,
    pub occurrences: Vec<Occurrence>,
    /// Why the target produced nothing, if it did not.
    pub skipped: Option<String>,
    pub clusters: Vec<ClusterLine>,
    pub num_clusters: usize,
    pub predictions: Predictions,
    pub warnings: LemmaWarnings,
}

impl LemmaOutcome {
    pub fn predicted(&self) -> HashMap<&str, usize> {
        match &self.predictions {
            Predictions::One(a) => a
                .iter()
                .filter_map(|a| a.cluster.map(|c| (a.occurrence_id.as_str(), c)))
                .collect(),
            Predictions::Two(m) => m
                .iter()
                .map(|m| (m.mapping.occurrence_id.as_str(), m.mapping.cluster))
                .collect(),
        }
    }

    /// Scores against gold; `None` when no annotated occurrence is left to
    /// score.
    pub fn evaluate(&self, cfg: &RunConfig) -> Result<Option<EvalRow>, Failure> {
        let predicted = self.predicted();
        let partition = partition_for(&self.occurrences, |id| predicted.get(id).copied(), cfg.report_mode)?;
        if partition.is_empty() {
            return Ok(None);
        }
        Ok(Some(evaluate_word(&self.lemma, self.pos, &partition)?))
    }
}

fn empty_outcome(lemma: &str, pos: Pos, seed: u64, occurrences: Vec<Occurrence>, method: Method) -> LemmaOutcome {
    LemmaOutcome {
        lemma: lemma.to_owned(),
        pos,
        seed,
        occurrences,
        skipped: None,
        clusters: Vec::new(),
        num_clusters: 0,
        predictions: match method {
            Method::One => Predictions::One(Vec::new()),
            Method::Two => Predictions::Two(Vec::new()),
        },
        warnings: LemmaWarnings::default(),
    }
}

pub fn sense_cluster_lines(senses: &SenseClusters) -> Vec<ClusterLine> {
    senses
        .clusters
        .iter()
        .enumerate()
        .flat_map(|(c, members)| {
            members.iter().map(move |m| ClusterLine {
                lemma: senses.lemma.clone(),
                pos: senses.pos,
                node: m.word.clone(),
                cluster: c,
            })
        })
        .collect()
}

/// Runs the configured method on one target.
pub fn run_lemma(cfg: &RunConfig, inputs: &Inputs, lemma: &str, pos: Pos) -> Result<LemmaOutcome, Failure> {
    let corpus = inputs.corpus();
    let seed = lemma_seed(cfg.seed, lemma, pos);
    let occurrences = corpus.collect_occurrences(lemma, pos, cfg.occurrence_cap)?;
    let mut out = empty_outcome(lemma, pos, seed, occurrences, cfg.method);
    if out.occurrences.is_empty() {
        out.skipped = Some("no occurrences in corpus".into());
        return Ok(out);
    }
    match cfg.method {
        Method::One => {
            let store = inputs.store();
            let params = cfg.method_one();
            let senses = match induce_senses(store, lemma, pos, seed, &params) {
                Ok(s) => s,
                Err(Error::UnknownWord(w)) => {
                    out.skipped = Some(format!("`{w}` has no embedding"));
                    let assignments = out
                        .occurrences
                        .iter()
                        .map(|o| Assignment::unassigned(o, cfg.variant))
                        .collect();
                    out.warnings.unassigned = out.occurrences.len();
                    out.predictions = Predictions::One(assignments);
                    return Ok(out);
                }
                Err(e) => return Err(e.into()),
            };
            if let Some(src) = &senses.source {
                out.warnings.neighbor_fallback = src.rule == NeighborRule::Fallback;
                out.warnings.neighbor_shortfall = src.shortfall;
            }
            let assignments = assign_all(
                store,
                &senses,
                &out.occurrences,
                |o| corpus.sentence(o.sentence),
                cfg.variant,
                &params,
            );
            out.warnings.unassigned = assignments.iter().filter(|a| a.cluster.is_none()).count();
            out.clusters = sense_cluster_lines(&senses);
            out.num_clusters = senses.len();
            out.predictions = Predictions::One(assignments);
        }
        Method::Two => {
            let result = run_method_two(
                corpus,
                lemma,
                pos,
                &out.occurrences,
                inputs.table(),
                &cfg.method_two(),
                seed,
            )?;
            out.warnings.missing_predictions = result.warnings.missing_predictions.len();
            out.warnings.short_vectors = result.warnings.short_vectors;
            out.warnings.target_filtered = result.warnings.target_filtered;
            out.clusters = result
                .vectors
                .iter()
                .enumerate()
                .map(|(i, v)| ClusterLine {
                    lemma: lemma.to_owned(),
                    pos,
                    node: vector_node_id(v),
                    cluster: result.clustering.label(i),
                })
                .collect();
            out.num_clusters = result.clustering.num_clusters();
            out.predictions = Predictions::Two(
                result
                    .mappings
                    .into_iter()
                    .map(|mapping| MappingLine {
                        lemma: lemma.to_owned(),
                        pos,
                        mapping,
                    })
                    .collect(),
            );
        }
    }
    Ok(out)
}

/// Runs every target on a pool of `cfg.workers` threads. Results come back
/// in target order.
pub fn run_targets(cfg: &RunConfig, inputs: &Inputs, targets: &[(String, Pos)]) -> Result<Vec<LemmaOutcome>, Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Failure::Internal(format!("thread pool: {e}")))?;
    pool.install(|| {
        targets
            .par_iter()
            .map(|(lemma, pos)| run_lemma(cfg, inputs, lemma, *pos))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TargetSummary {
    pub target: String,
    pub seed: u64,
    pub occurrences: usize,
    pub annotated: usize,
    pub clusters: usize,
    pub skipped: Option<String>,
    pub warnings: LemmaWarnings,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunWarnings {
    pub skipped_targets: Vec<String>,
    pub unassigned: usize,
    pub neighbor_fallbacks: Vec<String>,
    pub neighbor_shortfalls: Vec<String>,
    pub missing_predictions: usize,
    pub short_vectors: usize,
    pub target_filtered: usize,
    pub unscored_targets: Vec<String>,
    pub unknown_pos_tokens: usize,
    pub duplicate_embedding_words: usize,
    pub zero_embedding_vectors: usize,
    pub inventory_issues: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub role: String,
    pub path: PathBuf,
    pub bytes: u64,
    pub fnv1a: String,
}

fn describe_input(role: &str, path: &Path) -> Result<InputFile, Failure> {
    let data = fs::read(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok(InputFile {
        role: role.to_owned(),
        path: path.to_owned(),
        bytes: data.len() as u64,
        fnv1a: format!("{:016x}", fnv1a(&data)),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: RunConfig,
    pub seed: u64,
    pub inputs: Vec<InputFile>,
    pub targets: Vec<TargetSummary>,
    pub warnings: RunWarnings,
    pub outputs: Vec<String>,
    pub wall_time_ms: u128,
}

#[derive(Debug, Clone, Serialize)]
pub struct Baselines {
    pub first_sense: Option<BaselineReport>,
    pub most_frequent: BaselineReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportFile<'a> {
    pub method: Method,
    pub report_mode: wsi_core::evaluation::ReportMode,
    #[serde(flatten)]
    pub report: &'a Report,
}

pub const CLUSTERS_FILE: &str = "clusters.jsonl";
pub const ASSIGNMENTS_FILE: &str = "assignments.jsonl";
pub const MAPPING_FILE: &str = "mapping.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const BASELINES_FILE: &str = "baselines.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn write_jsonl<T: Serialize, W: Write>(items: impl IntoIterator<Item = T>, mut out: W) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Internal(format!("cannot create {}: {e}", path.display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Failure> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Internal(e.to_string()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// What a finished `run` produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: Report,
    pub manifest: Manifest,
}

/// The end-to-end pipeline: load, run every target, evaluate, write the
/// output directory.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, Failure> {
    let started = Instant::now();
    let method_input = match cfg.method {
        Method::One => "embeddings",
        Method::Two => "substitutes",
    };
    let mut required = vec!["corpus", "output", method_input];
    if cfg.targets == Targets::AllAnnotated {
        required.push("annotations");
    }
    let inputs = Inputs::load(cfg, &required, &["inventory"])?;
    let corpus = inputs.corpus();
    let targets = resolve_targets(cfg, Some(corpus))?;
    log::info!("{} targets, method {}", targets.len(), cfg.method);
    let outcomes = run_targets(cfg, &inputs, &targets)?;

    let mut warnings = RunWarnings {
        unknown_pos_tokens: corpus.stats().unknown_pos,
        ..Default::default()
    };
    if let Some(store) = &inputs.store {
        let w = store.warnings();
        warnings.duplicate_embedding_words = w.duplicate_words;
        warnings.zero_embedding_vectors = w.zero_vectors;
    }
    if let Some(inv) = &inputs.inventory {
        warnings.inventory_issues = inv.validate(corpus);
    }
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for o in &outcomes {
        let key = target_key(&o.lemma, o.pos);
        if let Some(reason) = &o.skipped {
            warnings.skipped_targets.push(format!("{key}: {reason}"));
        }
        if o.warnings.neighbor_fallback {
            warnings.neighbor_fallbacks.push(key.clone());
        }
        if o.warnings.neighbor_shortfall {
            warnings.neighbor_shortfalls.push(key.clone());
        }
        warnings.unassigned += o.warnings.unassigned;
        warnings.missing_predictions += o.warnings.missing_predictions;
        warnings.short_vectors += o.warnings.short_vectors;
        warnings.target_filtered += o.warnings.target_filtered;
        match o.evaluate(cfg)? {
            Some(row) => rows.push(row),
            None => warnings.unscored_targets.push(key.clone()),
        }
        summaries.push(TargetSummary {
            target: key,
            seed: o.seed,
            occurrences: o.occurrences.len(),
            annotated: o.occurrences.iter().filter(|x| x.gold_sense.is_some()).count(),
            clusters: o.num_clusters,
            skipped: o.skipped.clone(),
            warnings: o.warnings.clone(),
        });
    }
    let report = Report::build(rows);

    let dir = cfg.output.as_deref().expect("output was required");
    fs::create_dir_all(dir).map_err(|e| Failure::Internal(format!("cannot create {}: {e}", dir.display())))?;
    let mut outputs = vec![CLUSTERS_FILE.to_owned()];
    write_jsonl(outcomes.iter().flat_map(|o| &o.clusters), create(dir, CLUSTERS_FILE)?)?;
    match cfg.method {
        Method::One => {
            let lines = outcomes.iter().flat_map(|o| match &o.predictions {
                Predictions::One(a) => a.as_slice(),
                Predictions::Two(_) => &[],
            });
            write_jsonl(lines, create(dir, ASSIGNMENTS_FILE)?)?;
            outputs.push(ASSIGNMENTS_FILE.to_owned());
        }
        Method::Two => {
            let lines = outcomes.iter().flat_map(|o| match &o.predictions {
                Predictions::Two(m) => m.as_slice(),
                Predictions::One(_) => &[],
            });
            write_jsonl(lines, create(dir, MAPPING_FILE)?)?;
            outputs.push(MAPPING_FILE.to_owned());
        }
    }
    write_json(
        dir,
        REPORT_JSON,
        &ReportFile {
            method: cfg.method,
            report_mode: cfg.report_mode,
            report: &report,
        },
    )?;
    let mut txt = create(dir, REPORT_TXT)?;
    txt.write_all(report.to_table().as_bytes())?;
    txt.flush()?;
    outputs.extend([REPORT_JSON.to_owned(), REPORT_TXT.to_owned()]);

    if cfg.annotations.is_some() {
        let all: Vec<Occurrence> = outcomes.iter().flat_map(|o| o.occurrences.iter().cloned()).collect();
        let baselines = Baselines {
            first_sense: inputs
                .inventory
                .as_ref()
                .map(|inv| first_sense_baseline(&all, inv))
                .transpose()?,
            most_frequent: most_frequent_baseline(&all)?,
        };
        write_json(dir, BASELINES_FILE, &baselines)?;
        outputs.push(BASELINES_FILE.to_owned());
    }

    let mut input_files = Vec::new();
    for (role, path) in [
        ("corpus", &cfg.corpus),
        ("annotations", &cfg.annotations),
        ("inventory", &cfg.inventory),
        ("embeddings", &cfg.embeddings),
        ("substitutes", &cfg.substitutes),
    ] {
        if let Some(p) = path {
            let used = match role {
                "embeddings" => cfg.method == Method::One,
                "substitutes" => cfg.method == Method::Two,
                _ => true,
            };
            if used {
                input_files.push(describe_input(role, p)?);
            }
        }
    }
    outputs.push(MANIFEST_FILE.to_owned());
    let manifest = Manifest {
        tool: "wsi",
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        seed: cfg.seed,
        inputs: input_files,
        targets: summaries,
        warnings,
        outputs,
        wall_time_ms: started.elapsed().as_millis(),
    };
    write_json(dir, MANIFEST_FILE, &manifest)?;
    Ok(RunSummary { report, manifest })
}

fn read_lines(path: &Path) -> Result<impl Iterator<Item = (usize, String)>, Failure> {
    let file = File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let lines = BufReader::new(file)
        .lines()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok(lines
        .into_iter()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty()))
}

#[derive(Deserialize)]
struct PredictionRecord {
    occurrence: String,
    cluster: Option<usize>,
}

/// Reads assignments or mapping JSONL into occurrence -> cluster.
pub fn read_predictions(path: &Path) -> Result<HashMap<String, Option<usize>>, Failure> {
    let mut out = HashMap::new();
    for (line, text) in read_lines(path)? {
        let rec: PredictionRecord =
            serde_json::from_str(&text).map_err(|e| Failure::Data(format!("{}:{line}: {e}", path.display())))?;
        if out.insert(rec.occurrence.clone(), rec.cluster).is_some() {
            return Err(Failure::Data(format!(
                "{}:{line}: occurrence {} predicted twice",
                path.display(),
                rec.occurrence
            )));
        }
    }
    Ok(out)
}

/// Reads a clusters JSONL back into per-target word lists.
/// Cluster word lists per `(lemma, pos)`.
pub type SenseWordLists = BTreeMap<(String, Pos), Vec<Vec<String>>>;

pub fn read_sense_clusters(path: &Path) -> Result<SenseWordLists, Failure> {
    let mut out = SenseWordLists::new();
    for (line, text) in read_lines(path)? {
        let rec: ClusterLine =
            serde_json::from_str(&text).map_err(|e| Failure::Data(format!("{}:{line}: {e}", path.display())))?;
        let clusters = out.entry((rec.lemma, rec.pos)).or_default();
        if clusters.len() <= rec.cluster {
            clusters.resize(rec.cluster + 1, Vec::new());
        }
        clusters[rec.cluster].push(rec.node);
    }
    Ok(out)
}

//! Sense induction from masked-LM substitutes.
//!
//! Each occurrence contributes `r` sparse representative vectors. One vector
//! is a bag of substitutes drawn uniformly without replacement from the
//! occurrence's top-`k` predictions: `l` from the left-context list plus `l`
//! from the right-context list (one-side mode), or `2l` from a single
//! whole-sentence list (both-sides mode). The per-lemma bag of vectors is
//! TF-IDF weighted, linked by positive cosine, and clustered with Chinese
//! Whispers; an occurrence then takes the cluster holding most of its
//! vectors.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::clustering::{
    build_sparse_positive_graph, chinese_whispers, Clustering, WeightedGraph, DEFAULT_MAX_ITERATIONS,
};
use crate::corpus::{jsonl_lines, open, Corpus, Occurrence, Pos};
use crate::error::{Error, Result};
use crate::seed::{self, derive_seed};
use crate::sparse::SparseVector;

/// Which context a prediction list was produced from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextMode {
    Left,
    Right,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    /// Target kept, followed (or preceded) by a conjunction and the mask.
    And,
    /// Target replaced by the mask.
    Substitution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DrawMode {
    OneSide,
    BothSides,
}

impl DrawMode {
    /// Per-side draw size used unless configured otherwise.
    pub fn default_l(self) -> usize {
        match self {
            DrawMode::OneSide => 4,
            DrawMode::BothSides => 6,
        }
    }
}

macro_rules! str_enum {
    ($ty:ty, $($name:literal => $variant:expr),+) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    _ => Err(Error::Config(format!(
                        "unknown {} `{s}` (expected {})",
                        stringify!($ty),
                        [$($name),+].join("|")
                    ))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $variant { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}

str_enum!(ContextMode, "left" => ContextMode::Left, "right" => ContextMode::Right, "both" => ContextMode::Both);
str_enum!(Pattern, "and" => Pattern::And, "substitution" => Pattern::Substitution);
str_enum!(DrawMode, "one-side" => DrawMode::OneSide, "both-sides" => DrawMode::BothSides);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub token: String,
    pub score: f64,
}

/// One line of the substitutes file: predictions for one (occurrence, side).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstituteRecord {
    pub occurrence: String,
    pub lemma: String,
    pub pos: String,
    pub mode: ContextMode,
    pub pattern: Pattern,
    pub predictions: Vec<Prediction>,
}

/// Raw prediction lists of one occurrence under one pattern.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SidePredictions {
    pub left: Option<Vec<Prediction>>,
    pub right: Option<Vec<Prediction>>,
    pub both: Option<Vec<Prediction>>,
}

impl SidePredictions {
    fn slot(&mut self, mode: ContextMode) -> &mut Option<Vec<Prediction>> {
        match mode {
            ContextMode::Left => &mut self.left,
            ContextMode::Right => &mut self.right,
            ContextMode::Both => &mut self.both,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SubstituteTable {
    entries: HashMap<(String, Pattern), SidePredictions>,
    records: usize,
}

impl SubstituteTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(open(path.as_ref())?)
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut table = SubstituteTable::default();
        for line in jsonl_lines(reader, "substitutes") {
            let (line_no, text) = line?;
            let record: SubstituteRecord =
                serde_json::from_str(&text).map_err(|e| Error::parse("substitutes", line_no, e))?;
            table
                .insert(record)
                .map_err(|msg| Error::parse("substitutes", line_no, msg))?;
        }
        Ok(table)
    }

    pub fn from_records(records: impl IntoIterator<Item = SubstituteRecord>) -> Result<Self> {
        let mut table = SubstituteTable::default();
        for (i, record) in records.into_iter().enumerate() {
            table
                .insert(record)
                .map_err(|msg| Error::parse("substitutes", i + 1, msg))?;
        }
        Ok(table)
    }

    fn insert(&mut self, record: SubstituteRecord) -> std::result::Result<(), String> {
        if record.mode == ContextMode::Both && record.pattern == Pattern::And {
            return Err("both-sides context is only defined for the substitution pattern".into());
        }
        let slot = self
            .entries
            .entry((record.occurrence.clone(), record.pattern))
            .or_default()
            .slot(record.mode);
        if slot.is_some() {
            return Err(format!(
                "duplicate {} / {} record for {}",
                record.mode, record.pattern, record.occurrence
            ));
        }
        *slot = Some(record.predictions);
        self.records += 1;
        Ok(())
    }

    pub fn get(&self, occurrence: &str, pattern: Pattern) -> Option<&SidePredictions> {
        self.entries.get(&(occurrence.to_owned(), pattern))
    }

    pub fn record_count(&self) -> usize {
        self.records
    }
}

/// Cleaned prediction lists: at most `k` tokens each, best first, target
/// forms removed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PreparedPredictions {
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub both: Vec<String>,
    /// Tokens dropped because they were the target word itself.
    pub target_filtered: usize,
}

/// Sorts by score (stable), removes the target's lemma and surface form,
/// de-duplicates and keeps the top `k`.
pub fn prepare_predictions(
    raw: &SidePredictions,
    target_forms: &[&str],
    k: usize,
    normalize_case: bool,
) -> PreparedPredictions {
    let mut filtered = 0;
    let forms: Vec<String> = target_forms.iter().map(|f| f.to_lowercase()).collect();
    let mut clean = |list: &Option<Vec<Prediction>>| -> Vec<String> {
        let Some(list) = list else { return Vec::new() };
        let mut sorted: Vec<&Prediction> = list.iter().collect();
        sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
        let mut out: Vec<String> = Vec::with_capacity(k);
        for p in sorted {
            if out.len() == k {
                break;
            }
            if forms.contains(&p.token.to_lowercase()) {
                filtered += 1;
                continue;
            }
            let token = if normalize_case {
                p.token.to_lowercase()
            } else {
                p.token.clone()
            };
            if !out.contains(&token) {
                out.push(token);
            }
        }
        out
    };
    let left = clean(&raw.left);
    let right = clean(&raw.right);
    let both = clean(&raw.both);
    PreparedPredictions {
        left,
        right,
        both,
        target_filtered: filtered,
    }
}

/// Token ↔ coordinate index shared by all vectors of one `(lemma, pos)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RepresentativeSpace {
    pub lemma: String,
    pub pos: Option<Pos>,
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl RepresentativeSpace {
    pub fn new(lemma: impl Into<String>, pos: Pos) -> Self {
        RepresentativeSpace {
            lemma: lemma.into(),
            pos: Some(pos),
            ..Default::default()
        }
    }

    pub fn intern(&mut self, token: &str) -> u32 {
        if let Some(&c) = self.index.get(token) {
            return c;
        }
        let c = u32::try_from(self.tokens.len()).expect("representative space exceeds u32");
        self.index.insert(token.to_owned(), c);
        self.tokens.push(token.to_owned());
        c
    }

    pub fn coordinate(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, coord: u32) -> &str {
        &self.tokens[coord as usize]
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepresentativeVector {
    pub occurrence_id: String,
    pub draw_index: usize,
    pub counts: BTreeMap<u32, u32>,
    pub weighted: Option<SparseVector>,
    /// Fewer predictions were available than the draw size.
    pub short: bool,
}

impl RepresentativeVector {
    pub fn nnz(&self) -> usize {
        self.counts.len()
    }
}

fn draw_into(
    list: &[String],
    amount: usize,
    rng: &mut seed::Rng,
    space: &mut RepresentativeSpace,
    counts: &mut BTreeMap<u32, u32>,
) -> bool {
    let take = amount.min(list.len());
    for i in rand::seq::index::sample(rng, list.len(), take) {
        *counts.entry(space.intern(&list[i])).or_insert(0) += 1;
    }
    take < amount
}

/// Draws `r` representative vectors for one occurrence. In one-side mode an
/// occurrence with only one non-empty side draws all `2l` tokens from it.
pub fn build_representative_vectors(
    occurrence_id: &str,
    preds: &PreparedPredictions,
    mode: DrawMode,
    l: usize,
    r: usize,
    seed: u64,
    space: &mut RepresentativeSpace,
) -> Result<Vec<RepresentativeVector>> {
    let sources: Vec<(&[String], usize)> = match mode {
        DrawMode::OneSide => match (preds.left.is_empty(), preds.right.is_empty()) {
            (false, false) => vec![(&preds.left, l), (&preds.right, l)],
            (false, true) => vec![(&preds.left, 2 * l)],
            (true, false) => vec![(&preds.right, 2 * l)],
            (true, true) => vec![],
        },
        DrawMode::BothSides if !preds.both.is_empty() => vec![(&preds.both, 2 * l)],
        DrawMode::BothSides => vec![],
    };
    if sources.is_empty() {
        return Err(Error::MissingPredictions(occurrence_id.to_owned()));
    }
    let mut rng = seed::rng(seed);
    Ok((0..r)
        .map(|draw_index| {
            let mut counts = BTreeMap::new();
            let mut short = false;
            for &(list, amount) in &sources {
                short |= draw_into(list, amount, &mut rng, space, &mut counts);
            }
            RepresentativeVector {
                occurrence_id: occurrence_id.to_owned(),
                draw_index,
                counts,
                weighted: None,
                short,
            }
        })
        .collect())
}

/// `weight = count · ln(N / df)` with every vector treated as a document.
pub fn tfidf_transform(vectors: &mut [RepresentativeVector]) {
    let n = vectors.len() as f64;
    let mut df: HashMap<u32, u32> = HashMap::new();
    for v in vectors.iter() {
        for &c in v.counts.keys() {
            *df.entry(c).or_insert(0) += 1;
        }
    }
    for v in vectors.iter_mut() {
        let weighted = SparseVector::from_pairs(
            v.counts
                .iter()
                .map(|(&c, &count)| (c, f64::from(count) * (n / f64::from(df[&c])).ln())),
        );
        v.weighted = Some(weighted);
    }
}

pub fn vector_node_id(v: &RepresentativeVector) -> String {
    format!("{}#{}", v.occurrence_id, v.draw_index)
}

/// Positive-cosine graph over the weighted vectors, clustered with Chinese
/// Whispers. Vectors whose weights are all zero stay isolated.
pub fn cluster_representatives(
    vectors: &[RepresentativeVector],
    seed: u64,
    max_iterations: usize,
) -> Result<(WeightedGraph, Clustering)> {
    let items: Vec<(String, SparseVector)> = vectors
        .iter()
        .map(|v| {
            let w = v.weighted.clone().ok_or_else(|| {
                Error::Config("representative vectors must be TF-IDF weighted before clustering".into())
            })?;
            Ok((vector_node_id(v), w))
        })
        .collect::<Result<_>>()?;
    let graph = build_sparse_positive_graph(&items)?;
    let clustering = chinese_whispers(&graph, max_iterations, seed);
    Ok((graph, clustering))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccurrenceMapping {
    #[serde(rename = "occurrence")]
    pub occurrence_id: String,
    pub cluster: usize,
    pub votes: BTreeMap<usize, usize>,
    pub tie_broken: bool,
}

/// Majority vote of each occurrence's vectors; exact ties are settled by a
/// seeded uniform pick. `clustering` is indexed like `vectors`.
pub fn map_occurrences(clustering: &Clustering, vectors: &[RepresentativeVector], seed: u64) -> Vec<OccurrenceMapping> {
    let mut order: Vec<&str> = Vec::new();
    let mut votes: HashMap<&str, BTreeMap<usize, usize>> = HashMap::new();
    for (i, v) in vectors.iter().enumerate() {
        let entry = votes.entry(&v.occurrence_id).or_insert_with(|| {
            order.push(&v.occurrence_id);
            BTreeMap::new()
        });
        *entry.entry(clustering.label(i)).or_insert(0) += 1;
    }
    order
        .into_iter()
        .map(|occ| {
            let votes = votes.remove(occ).unwrap_or_default();
            let top = votes.values().copied().max().unwrap_or(0);
            let leaders: Vec<usize> = votes.iter().filter(|&(_, &n)| n == top).map(|(&c, _)| c).collect();
            let tie_broken = leaders.len() > 1;
            let cluster = if tie_broken {
                let mut rng = seed::rng(derive_seed(seed, occ));
                leaders[rng.random_range(0..leaders.len())]
            } else {
                leaders[0]
            };
            OccurrenceMapping {
                occurrence_id: occ.to_owned(),
                cluster,
                votes,
                tie_broken,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTwoParams {
    pub mode: DrawMode,
    pub pattern: Pattern,
    pub k: usize,
    pub r: usize,
    /// Per-side draw size; `None` means the mode's default (4 or 6).
    pub l: Option<usize>,
    pub max_iterations: usize,
    pub normalize_case: bool,
}

impl Default for MethodTwoParams {
    fn default() -> Self {
        MethodTwoParams {
            mode: DrawMode::OneSide,
            pattern: Pattern::Substitution,
            k: 20,
            r: 20,
            l: None,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            normalize_case: false,
        }
    }
}

impl MethodTwoParams {
    pub fn l(&self) -> usize {
        self.l.unwrap_or_else(|| self.mode.default_l())
    }

    /// Every violated constraint, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.mode == DrawMode::BothSides && self.pattern == Pattern::And {
            v.push("both-sides context requires pattern = substitution".to_owned());
        }
        for (name, value) in [
            ("k", self.k),
            ("r", self.r),
            ("l", self.l()),
            ("max_iterations", self.max_iterations),
        ] {
            if value == 0 {
                v.push(format!("{name} must be at least 1"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MethodTwoWarnings {
    /// Occurrences dropped because the substitutes file has nothing usable.
    pub missing_predictions: Vec<String>,
    pub short_vectors: usize,
    pub target_filtered: usize,
}

#[derive(Debug, Clone)]
pub struct MethodTwoOutput {
    pub space: RepresentativeSpace,
    pub vectors: Vec<RepresentativeVector>,
    pub graph: WeightedGraph,
    pub clustering: Clustering,
    pub mappings: Vec<OccurrenceMapping>,
    pub warnings: MethodTwoWarnings,
}

/// Builds the weighted representative vectors for `occurrences` without
/// clustering them.
pub fn build_lemma_vectors(
    corpus: &Corpus,
    lemma: &str,
    pos: Pos,
    occurrences: &[Occurrence],
    table: &SubstituteTable,
    params: &MethodTwoParams,
    seed: u64,
) -> Result<(RepresentativeSpace, Vec<RepresentativeVector>, MethodTwoWarnings)> {
    params.validate()?;
    let mut space = RepresentativeSpace::new(lemma, pos);
    let mut vectors = Vec::new();
    let mut warnings = MethodTwoWarnings::default();
    for occ in occurrences {
        let Some(raw) = table.get(&occ.id, params.pattern) else {
            log::warn!("no substitutes for {}", occ.id);
            warnings.missing_predictions.push(occ.id.clone());
            continue;
        };
        let orth = corpus
            .sentences()
            .get(occ.sentence)
            .and_then(|s| s.tokens.get(occ.token_index))
            .map(|t| t.orth.as_str())
            .unwrap_or(lemma);
        let prepared = prepare_predictions(raw, &[lemma, orth], params.k, params.normalize_case);
        warnings.target_filtered += prepared.target_filtered;
        match build_representative_vectors(
            &occ.id,
            &prepared,
            params.mode,
            params.l(),
            params.r,
            derive_seed(seed, &occ.id),
            &mut space,
        ) {
            Ok(vs) => {
                warnings.short_vectors += vs.iter().filter(|v| v.short).count();
                vectors.extend(vs);
            }
            Err(Error::MissingPredictions(id)) => {
                log::warn!("no usable substitutes for {id}");
                warnings.missing_predictions.push(id);
            }
            Err(e) => return Err(e),
        }
    }
    tfidf_transform(&mut vectors);
    Ok((space, vectors, warnings))
}

/// The full pipeline for one lemma.
pub fn run_method_two(
    corpus: &Corpus,
    lemma: &str,
    pos: Pos,
    occurrences: &[Occurrence],
    table: &SubstituteTable,
    params: &MethodTwoParams,
    seed: u64,
) -> Result<MethodTwoOutput> {
    let (space, vectors, warnings) = build_lemma_vectors(corpus, lemma, pos, occurrences, table, params, seed)?;
    let (graph, clustering) = cluster_representatives(&vectors, seed, params.max_iterations)?;
    let mappings = map_occurrences(&clustering, &vectors, seed);
    Ok(MethodTwoOutput {
        space,
        vectors,
        graph,
        clustering,
        mappings,
        warnings,
    })
}

#[derive(Serialize)]
struct VectorRecord<'a> {
    occurrence: &'a str,
    draw: usize,
    counts: BTreeMap<&'a str, u32>,
    weighted: BTreeMap<&'a str, f64>,
    short: bool,
}

/// One JSON line per vector, with tokens in place of coordinates.
pub fn write_vectors_jsonl<W: Write>(
    space: &RepresentativeSpace,
    vectors: &[RepresentativeVector],
    mut out: W,
) -> std::io::Result<()> {
    for v in vectors {
        let record = VectorRecord {
            occurrence: &v.occurrence_id,
            draw: v.draw_index,
            counts: v.counts.iter().map(|(&c, &n)| (space.token(c), n)).collect(),
            weighted: v
                .weighted
                .iter()
                .flat_map(|w| w.entries().iter().map(|&(c, x)| (space.token(c), x)))
                .collect(),
            short: v.short,
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_mappings_jsonl<W: Write>(mappings: &[OccurrenceMapping], mut out: W) -> std::io::Result<()> {
    for m in mappings {
        serde_json::to_writer(&mut out, m)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

//! BCubed evaluation of induced clusters against gold senses.
//!
//! Every item gets a precision (share of its cluster that shares its gold
//! sense) and a recall (share of its gold class that shares its cluster). The
//! `1/n` weighting averages these over items. The `1/nc` weighting averages
//! precision per predicted cluster and recall per gold class first, then
//! across clusters (classes).

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Occurrence, Pos, SenseInventory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledItem {
    pub id: String,
    /// `None` only in strict mode, for an occurrence the method left
    /// unassigned.
    pub cluster: Option<usize>,
    pub gold: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledPartition {
    items: Vec<LabeledItem>,
}

impl LabeledPartition {
    pub fn new(items: Vec<LabeledItem>) -> Result<Self> {
        let mut seen = HashSet::new();
        for item in &items {
            if !seen.insert(item.id.as_str()) {
                return Err(Error::DuplicateItem(item.id.clone()));
            }
        }
        Ok(LabeledPartition { items })
    }

    /// Convenience constructor from parallel label slices; ids are positions.
    pub fn from_labels<G: ToString>(clusters: &[usize], gold: &[G]) -> Self {
        assert_eq!(clusters.len(), gold.len());
        LabeledPartition {
            items: clusters
                .iter()
                .zip(gold)
                .enumerate()
                .map(|(i, (&c, g))| LabeledItem {
                    id: i.to_string(),
                    cluster: Some(c),
                    gold: g.to_string(),
                })
                .collect(),
        }
    }

    pub fn items(&self) -> &[LabeledItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.items
            .iter()
            .filter_map(|i| i.cluster)
            .collect::<HashSet<_>>()
            .len()
    }

    pub fn num_senses(&self) -> usize {
        self.items.iter().map(|i| &i.gold).collect::<HashSet<_>>().len()
    }
}

/// Per-item precision and recall for the whole partition, in item order.
/// Unassigned items score (0, 0) and never enter anyone's cluster.
pub fn bcubed_items(partition: &LabeledPartition) -> Vec<(f64, f64)> {
    let mut cluster_size: HashMap<usize, usize> = HashMap::new();
    let mut gold_size: HashMap<&str, usize> = HashMap::new();
    let mut joint: HashMap<(usize, &str), usize> = HashMap::new();
    for item in &partition.items {
        *gold_size.entry(&item.gold).or_insert(0) += 1;
        if let Some(c) = item.cluster {
            *cluster_size.entry(c).or_insert(0) += 1;
            *joint.entry((c, &item.gold)).or_insert(0) += 1;
        }
    }
    partition
        .items
        .iter()
        .map(|item| match item.cluster {
            None => (0.0, 0.0),
            Some(c) => {
                let both = joint[&(c, item.gold.as_str())] as f64;
                (
                    both / cluster_size[&c] as f64,
                    both / gold_size[item.gold.as_str()] as f64,
                )
            }
        })
        .collect()
}

pub fn bcubed_item(partition: &LabeledPartition, index: usize) -> (f64, f64) {
    bcubed_items(partition)[index]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// 1/n: mean over items.
    N,
    /// 1/nc: mean over clusters (precision) and gold classes (recall).
    Nc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl Scores {
    pub fn new(precision: f64, recall: f64) -> Self {
        Scores {
            precision,
            recall,
            f1: harmonic_mean(precision, recall),
        }
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean of per-group means. Group means are summed in sorted order so the
/// result does not depend on hash iteration order.
fn grouped_mean<K: Eq + std::hash::Hash>(keys: impl Iterator<Item = K>, values: &[f64]) -> f64 {
    let mut groups: HashMap<K, (f64, usize)> = HashMap::new();
    for (k, &v) in keys.zip(values) {
        let slot = groups.entry(k).or_insert((0.0, 0));
        slot.0 += v;
        slot.1 += 1;
    }
    let mut means: Vec<f64> = groups.into_values().map(|(sum, n)| sum / n as f64).collect();
    means.sort_by(f64::total_cmp);
    mean(means)
}

pub fn bcubed_scores(partition: &LabeledPartition, weighting: Weighting) -> Result<Scores> {
    if partition.is_empty() {
        return Err(Error::EmptyPartition);
    }
    let per_item = bcubed_items(partition);
    let (precisions, recalls): (Vec<f64>, Vec<f64>) = per_item.into_iter().unzip();
    Ok(match weighting {
        Weighting::N => Scores::new(mean(precisions.iter().copied()), mean(recalls.iter().copied())),
        Weighting::Nc => {
            // unassigned items form one pseudo-cluster of their own
            let p = grouped_mean(partition.items.iter().map(|i| i.cluster), &precisions);
            let r = grouped_mean(partition.items.iter().map(|i| i.gold.as_str()), &recalls);
            Scores::new(p, r)
        }
    })
}

/// One evaluated word. Field names follow the report's column headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub word: String,
    pub pos: Pos,
    #[serde(rename = "P_n")]
    pub p_n: f64,
    #[serde(rename = "R_n")]
    pub r_n: f64,
    #[serde(rename = "F1_n")]
    pub f1_n: f64,
    #[serde(rename = "P_nc")]
    pub p_nc: f64,
    #[serde(rename = "R_nc")]
    pub r_nc: f64,
    #[serde(rename = "F1_nc")]
    pub f1_nc: f64,
    /// Items scored.
    pub n: usize,
    /// Predicted clusters among the scored items.
    pub nc: usize,
    /// Distinct gold senses among the scored items.
    pub senses: usize,
}

pub fn evaluate_word(word: &str, pos: Pos, partition: &LabeledPartition) -> Result<EvalRow> {
    let n = bcubed_scores(partition, Weighting::N)?;
    let nc = bcubed_scores(partition, Weighting::Nc)?;
    Ok(EvalRow {
        word: word.to_owned(),
        pos,
        p_n: n.precision,
        r_n: n.recall,
        f1_n: n.f1,
        p_nc: nc.precision,
        r_nc: nc.recall,
        f1_nc: nc.f1,
        n: partition.len(),
        nc: partition.num_clusters(),
        senses: partition.num_senses(),
    })
}

/// How occurrences the method could not place are scored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportMode {
    /// Unplaced occurrences are left out entirely.
    #[default]
    AssignedOnly,
    /// Unplaced occurrences stay in and score zero precision and recall.
    Strict,
}

impl FromStr for ReportMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "assigned-only" => Ok(ReportMode::AssignedOnly),
            "strict" => Ok(ReportMode::Strict),
            _ => Err(Error::Config(format!(
                "unknown report mode `{s}` (expected assigned-only|strict)"
            ))),
        }
    }
}

/// Builds the partition of gold-annotated occurrences from a predicted
/// cluster lookup. Occurrences without gold are ignored; occurrences with no
/// prediction are handled per `mode`.
pub fn partition_for<'a, F>(occurrences: &[Occurrence], predicted: F, mode: ReportMode) -> Result<LabeledPartition>
where
    F: Fn(&str) -> Option<usize> + 'a,
{
    let items = occurrences
        .iter()
        .filter_map(|occ| {
            let gold = occ.gold_sense.clone()?;
            let cluster = predicted(&occ.id);
            match (cluster, mode) {
                (None, ReportMode::AssignedOnly) => None,
                _ => Some(LabeledItem {
                    id: occ.id.clone(),
                    cluster,
                    gold,
                }),
            }
        })
        .collect();
    LabeledPartition::new(items)
}

/// Baseline output: the scored row plus which sense was predicted and how
/// often it matches gold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    #[serde(flatten)]
    pub row: EvalRow,
    pub predicted_sense: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub rows: Vec<BaselineRow>,
    /// `(lemma, pos)` pairs skipped for lack of an inventory entry.
    pub missing_inventory: Vec<String>,
}

fn gold_groups(occurrences: &[Occurrence]) -> BTreeMap<(String, Pos), Vec<&Occurrence>> {
    let mut groups: BTreeMap<(String, Pos), Vec<&Occurrence>> = BTreeMap::new();
    for occ in occurrences.iter().filter(|o| o.gold_sense.is_some()) {
        groups.entry((occ.lemma.clone(), occ.pos)).or_default().push(occ);
    }
    groups
}

fn constant_prediction_row(word: &str, pos: Pos, group: &[&Occurrence], sense: &str) -> Result<BaselineRow> {
    // Every occurrence receives the same sense: one predicted cluster.
    let items = group
        .iter()
        .map(|o| LabeledItem {
            id: o.id.clone(),
            cluster: Some(0),
            gold: o.gold_sense.clone().expect("filtered to annotated"),
        })
        .collect();
    let partition = LabeledPartition::new(items)?;
    let hits = group.iter().filter(|o| o.gold_sense.as_deref() == Some(sense)).count();
    Ok(BaselineRow {
        row: evaluate_word(word, pos, &partition)?,
        predicted_sense: sense.to_owned(),
        accuracy: hits as f64 / group.len() as f64,
    })
}

/// Every occurrence gets the first sense listed in the inventory.
pub fn first_sense_baseline(occurrences: &[Occurrence], inventory: &SenseInventory) -> Result<BaselineReport> {
    let mut report = BaselineReport::default();
    for ((lemma, pos), group) in gold_groups(occurrences) {
        match inventory.first_sense(&lemma, pos) {
            Some(sense) => report.rows.push(constant_prediction_row(&lemma, pos, &group, sense)?),
            None => {
                log::warn!("no inventory entry for {lemma}/{pos}; skipped");
                report.missing_inventory.push(format!("{lemma}/{pos}"));
            }
        }
    }
    Ok(report)
}

/// Every occurrence gets the sense most frequent among the annotated
/// occurrences of its `(lemma, pos)`; ties go to the smallest sense id.
pub fn most_frequent_baseline(occurrences: &[Occurrence]) -> Result<BaselineReport> {
    let mut report = BaselineReport::default();
    for ((lemma, pos), group) in gold_groups(occurrences) {
        let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
        for o in &group {
            *freq.entry(o.gold_sense.as_deref().expect("annotated")).or_insert(0) += 1;
        }
        let top = freq.values().copied().max().unwrap_or(0);
        let sense = freq
            .iter()
            .find(|&(_, &n)| n == top)
            .map(|(s, _)| s.to_string())
            .expect("group is non-empty");
        report.rows.push(constant_prediction_row(&lemma, pos, &group, &sense)?);
    }
    Ok(report)
}

/// The fixed list of thirty ambiguous words singled out for detailed
/// evaluation: fourteen nouns, seven adjectives and nine verbs.
pub const SELECTED_WORDS: [(&str, Pos); 30] = [
    ("badanie", Pos::Noun),
    ("biuro", Pos::Noun),
    ("blok", Pos::Noun),
    ("głos", Pos::Noun),
    ("historia", Pos::Noun),
    ("interes", Pos::Noun),
    ("język", Pos::Noun),
    ("kierunek", Pos::Noun),
    ("klasa", Pos::Noun),
    ("kolej", Pos::Noun),
    ("koło", Pos::Noun),
    ("komórka", Pos::Noun),
    ("linia", Pos::Noun),
    ("zamek", Pos::Noun),
    ("biały", Pos::Adj),
    ("ciężki", Pos::Adj),
    ("łagodny", Pos::Adj),
    ("niski", Pos::Adj),
    ("prawdziwy", Pos::Adj),
    ("szybki", Pos::Adj),
    ("zły", Pos::Adj),
    ("działać", Pos::Verb),
    ("należeć", Pos::Verb),
    ("przyjąć", Pos::Verb),
    ("uważać", Pos::Verb),
    ("zakładać", Pos::Verb),
    ("zamykać", Pos::Verb),
    ("zobaczyć", Pos::Verb),
    ("związać", Pos::Verb),
    ("żyć", Pos::Verb),
];

pub fn is_selected(word: &str, pos: Pos) -> bool {
    SELECTED_WORDS.iter().any(|&(w, p)| w == word && p == pos)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    /// One group per part of speech.
    Pos,
    /// Words from [`SELECTED_WORDS`].
    Selected30,
    /// Words with at least two distinct gold senses in the data.
    Ambiguous,
    All,
}

impl Grouping {
    pub const ALL: [Grouping; 4] = [Grouping::Pos, Grouping::Selected30, Grouping::Ambiguous, Grouping::All];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: String,
    pub words: usize,
    #[serde(rename = "P_n")]
    pub p_n: f64,
    #[serde(rename = "R_n")]
    pub r_n: f64,
    #[serde(rename = "F1_n")]
    pub f1_n: f64,
    #[serde(rename = "P_nc")]
    pub p_nc: f64,
    #[serde(rename = "R_nc")]
    pub r_nc: f64,
    #[serde(rename = "F1_nc")]
    pub f1_nc: f64,
}

fn macro_average(name: String, rows: &[&EvalRow]) -> GroupRow {
    let col = |f: fn(&EvalRow) -> f64| mean(rows.iter().map(|r| f(r)));
    GroupRow {
        group: name,
        words: rows.len(),
        p_n: col(|r| r.p_n),
        r_n: col(|r| r.r_n),
        f1_n: col(|r| r.f1_n),
        p_nc: col(|r| r.p_nc),
        r_nc: col(|r| r.r_nc),
        f1_nc: col(|r| r.f1_nc),
    }
}

/// Macro-averaged summary rows. Empty groups are omitted (and logged).
pub fn aggregate(rows: &[EvalRow], grouping: Grouping) -> Vec<GroupRow> {
    let groups: Vec<(String, Vec<&EvalRow>)> = match grouping {
        Grouping::Pos => Pos::ALL
            .iter()
            .map(|&p| (format!("avg_{p}"), rows.iter().filter(|r| r.pos == p).collect()))
            .collect(),
        Grouping::Selected30 => vec![(
            "avg_30".to_owned(),
            rows.iter().filter(|r| is_selected(&r.word, r.pos)).collect(),
        )],
        Grouping::Ambiguous => vec![("avg_ambig".to_owned(), rows.iter().filter(|r| r.senses >= 2).collect())],
        Grouping::All => vec![("avg_all".to_owned(), rows.iter().collect())],
    };
    groups
        .into_iter()
        .filter_map(|(name, members)| {
            if members.is_empty() {
                log::info!("group {name} is empty; omitted");
                None
            } else {
                Some(macro_average(name, &members))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<EvalRow>,
    pub groups: Vec<GroupRow>,
}

impl Report {
    /// Rows sorted by (pos, word), with every grouping appended.
    pub fn build(mut rows: Vec<EvalRow>) -> Self {
        rows.sort_by(|a, b| (a.pos, &a.word).cmp(&(b.pos, &b.word)));
        let groups = Grouping::ALL.iter().flat_map(|&g| aggregate(&rows, g)).collect();
        Report { rows, groups }
    }

    /// Aligned plain-text table: word, then P/R/F1 under 1/n and 1/nc.
    pub fn to_table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.word.chars().count())
            .chain(self.groups.iter().map(|g| g.group.chars().count()))
            .chain([4])
            .max()
            .unwrap_or(4);
        let mut out = String::new();
        let header = ["P_n", "R_n", "F1_n", "P_nc", "R_nc", "F1_nc"];
        let _ = write!(out, "{:<width$}  {:<5}", "word", "pos");
        for h in header {
            let _ = write!(out, "  {h:>6}");
        }
        out.push('\n');
        let line = |out: &mut String, name: &str, pos: &str, vals: [f64; 6]| {
            let pad = width - name.chars().count();
            let _ = write!(out, "{name}{:pad$}  {pos:<5}", "");
            for v in vals {
                let _ = write!(out, "  {v:>6.2}");
            }
            out.push('\n');
        };
        let mut last_pos = None;
        for r in &self.rows {
            if last_pos.is_some_and(|p| p != r.pos) {
                out.push('\n');
            }
            last_pos = Some(r.pos);
            line(
                &mut out,
                &r.word,
                r.pos.as_str(),
                [r.p_n, r.r_n, r.f1_n, r.p_nc, r.r_nc, r.f1_nc],
            );
        }
        if !self.groups.is_empty() {
            out.push('\n');
        }
        for g in &self.groups {
            line(&mut out, &g.group, "", [g.p_n, g.r_n, g.f1_n, g.p_nc, g.r_nc, g.f1_nc]);
        }
        out
    }
}

/// Distinct words per part of speech in `rows`.
pub fn words_by_pos(rows: &[EvalRow]) -> BTreeMap<Pos, BTreeSet<String>> {
    let mut out: BTreeMap<Pos, BTreeSet<String>> = BTreeMap::new();
    for r in rows {
        out.entry(r.pos).or_default().insert(r.word.clone());
    }
    out
}

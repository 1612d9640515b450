//! Sense induction from embedding neighbours.
//!
//! For a lemma, the nearest neighbours in the embedding space are collected
//! (everything above a similarity floor, or a fixed top-N when the floor
//! admits too few), linked whenever their pairwise cosine reaches the edge
//! threshold, and clustered with Chinese Whispers. Each occurrence is then
//! represented by the mean vector of its context lemmas and assigned to the
//! best-scoring cluster.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::{build_similarity_graph, chinese_whispers, EdgeRule, DEFAULT_MAX_ITERATIONS};
use crate::corpus::{Occurrence, Pos, Sentence};
use crate::embeddings::{norm, EmbeddingStore, Neighbor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOneParams {
    /// Minimum similarity for the primary neighbour rule.
    pub similarity_floor: f64,
    /// Neighbour set size below which the top-N fallback applies.
    pub neighbor_minimum: usize,
    /// Cosine at or above which two neighbours are linked.
    pub edge_threshold: f64,
    /// Context lemmas taken on each side of the target.
    pub window: usize,
    /// Fewest in-vocabulary context lemmas needed to build a context vector.
    pub min_support: usize,
    pub max_iterations: usize,
}

impl Default for MethodOneParams {
    fn default() -> Self {
        MethodOneParams {
            similarity_floor: 0.4,
            neighbor_minimum: 100,
            edge_threshold: 0.4,
            window: 5,
            min_support: 4,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborRule {
    /// Every neighbour at or above the floor.
    Primary,
    /// The top `neighbor_minimum` neighbours regardless of similarity.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborSet {
    pub lemma: String,
    pub neighbors: Vec<Neighbor>,
    pub rule: NeighborRule,
    pub floor: f64,
    /// Set when the vocabulary is too small to supply `neighbor_minimum`
    /// neighbours.
    pub shortfall: bool,
}

pub fn collect_neighbor_set(store: &EmbeddingStore, lemma: &str, params: &MethodOneParams) -> Result<NeighborSet> {
    let above = store.nearest_neighbors(lemma, usize::MAX, Some(params.similarity_floor))?;
    let (neighbors, rule) = if above.len() >= params.neighbor_minimum {
        (above, NeighborRule::Primary)
    } else {
        (
            store.nearest_neighbors(lemma, params.neighbor_minimum, None)?,
            NeighborRule::Fallback,
        )
    };
    Ok(NeighborSet {
        lemma: lemma.to_owned(),
        shortfall: neighbors.len() < params.neighbor_minimum,
        neighbors,
        rule,
        floor: params.similarity_floor,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SenseMember {
    pub word: String,
    /// Row in the embedding store.
    #[serde(skip)]
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborSource {
    pub rule: NeighborRule,
    pub floor: f64,
    pub set_size: usize,
    pub shortfall: bool,
    pub edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SenseClusters {
    pub lemma: String,
    pub pos: Pos,
    pub clusters: Vec<Vec<SenseMember>>,
    pub source: Option<NeighborSource>,
}

impl SenseClusters {
    /// Clusters given directly as word lists; every word must be in `store`.
    pub fn from_words<S: AsRef<str>>(
        store: &EmbeddingStore,
        lemma: &str,
        pos: Pos,
        clusters: &[Vec<S>],
    ) -> Result<Self> {
        let clusters = clusters
            .iter()
            .filter(|c| !c.is_empty())
            .map(|words| {
                words
                    .iter()
                    .map(|w| {
                        let w = w.as_ref();
                        store
                            .index_of(w)
                            .map(|row| SenseMember {
                                word: w.to_owned(),
                                row,
                            })
                            .ok_or_else(|| Error::UnknownWord(w.to_owned()))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SenseClusters {
            lemma: lemma.to_owned(),
            pos,
            clusters,
            source: None,
        })
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

pub fn induce_senses(
    store: &EmbeddingStore,
    lemma: &str,
    pos: Pos,
    seed: u64,
    params: &MethodOneParams,
) -> Result<SenseClusters> {
    let set = collect_neighbor_set(store, lemma, params)?;
    let vectors: Vec<(String, &[f64])> = set
        .neighbors
        .iter()
        .map(|n| {
            (
                n.word.clone(),
                store.vector(&n.word).expect("neighbour is in vocabulary"),
            )
        })
        .collect();
    let graph = build_similarity_graph(&vectors, EdgeRule::AtLeast(params.edge_threshold))?;
    let clustering = chinese_whispers(&graph, params.max_iterations, seed);
    let clusters = clustering
        .clusters()
        .into_iter()
        .map(|members| {
            members
                .into_iter()
                .map(|node| {
                    let word = graph.id(node).to_owned();
                    let row = store.index_of(&word).expect("neighbour is in vocabulary");
                    SenseMember { word, row }
                })
                .collect()
        })
        .collect();
    Ok(SenseClusters {
        lemma: lemma.to_owned(),
        pos,
        clusters,
        source: Some(NeighborSource {
            rule: set.rule,
            floor: set.floor,
            set_size: set.neighbors.len(),
            shortfall: set.shortfall,
            edges: graph.edge_count(),
        }),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector {
    pub occurrence_id: String,
    pub vector: Vec<f64>,
    /// In-vocabulary context lemmas averaged into `vector`.
    pub support: usize,
}

/// Lemmas of up to `window` non-punctuation tokens on each side of the target.
pub fn context_lemmas(sentence: &Sentence, target: usize, window: usize) -> Vec<&str> {
    let keep = |t: &&crate::corpus::Token| !t.is_punctuation();
    let left = sentence.tokens[..target].iter().rev().filter(keep).take(window);
    let right = sentence.tokens[target + 1..].iter().filter(keep).take(window);
    let mut lemmas: Vec<&str> = left.map(|t| t.lemma.as_str()).collect();
    lemmas.reverse();
    lemmas.extend(right.map(|t| t.lemma.as_str()));
    lemmas
}

/// Mean embedding of the occurrence's context, or `None` when fewer than
/// `min_support` context lemmas are in the vocabulary (or they cancel out).
pub fn context_vector(
    store: &EmbeddingStore,
    sentence: &Sentence,
    occ: &Occurrence,
    params: &MethodOneParams,
) -> Option<ContextVector> {
    let rows: Vec<usize> = context_lemmas(sentence, occ.token_index, params.window)
        .into_iter()
        .filter_map(|l| store.index_of(l))
        .collect();
    if rows.len() < params.min_support.max(1) {
        return None;
    }
    let mut mean = vec![0.0; store.dim()];
    for &r in &rows {
        for (m, x) in mean.iter_mut().zip(store.row(r)) {
            *m += x;
        }
    }
    let count = rows.len() as f64;
    mean.iter_mut().for_each(|m| *m /= count);
    if norm(&mean) == 0.0 {
        return None;
    }
    Some(ContextVector {
        occurrence_id: occ.id.clone(),
        vector: mean,
        support: rows.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Highest mean cosine over cluster members.
    Avg,
    /// Highest single-member cosine.
    Max,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avg" => Ok(Variant::Avg),
            "max" => Ok(Variant::Max),
            _ => Err(Error::Config(format!("unknown variant `{s}` (expected avg|max)"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Avg => "avg",
            Variant::Max => "max",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    #[serde(rename = "occurrence")]
    pub occurrence_id: String,
    pub lemma: String,
    pub cluster: Option<usize>,
    pub score: f64,
    pub variant: Variant,
}

impl Assignment {
    pub fn unassigned(occ: &Occurrence, variant: Variant) -> Self {
        Assignment {
            occurrence_id: occ.id.clone(),
            lemma: occ.lemma.clone(),
            cluster: None,
            score: 0.0,
            variant,
        }
    }
}

/// Per-cluster scores of `ctx` under `variant`.
pub fn cluster_scores(
    store: &EmbeddingStore,
    senses: &SenseClusters,
    ctx: &ContextVector,
    variant: Variant,
) -> Vec<f64> {
    let ctx_norm = norm(&ctx.vector);
    senses
        .clusters
        .iter()
        .map(|members| {
            let sims = members
                .iter()
                .map(|m| store.cosine_to_row(m.row, &ctx.vector, ctx_norm));
            match variant {
                Variant::Avg => sims.sum::<f64>() / members.len() as f64,
                Variant::Max => sims.fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

/// Picks the best cluster for a context vector; ties go to the lower index.
pub fn assign_occurrence(
    store: &EmbeddingStore,
    senses: &SenseClusters,
    ctx: &ContextVector,
    variant: Variant,
) -> Assignment {
    let scores = cluster_scores(store, senses, ctx, variant);
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    Assignment {
        occurrence_id: ctx.occurrence_id.clone(),
        lemma: senses.lemma.clone(),
        cluster: best.map(|(i, _)| i),
        score: best.map_or(0.0, |(_, s)| s),
        variant,
    }
}

/// Assigns every occurrence; the ones without a usable context come back with
/// `cluster: None`.
pub fn assign_all<'a>(
    store: &EmbeddingStore,
    senses: &SenseClusters,
    occurrences: &[Occurrence],
    sentence_of: impl Fn(&Occurrence) -> &'a Sentence,
    variant: Variant,
    params: &MethodOneParams,
) -> Vec<Assignment> {
    occurrences
        .iter()
        .map(|occ| match context_vector(store, sentence_of(occ), occ, params) {
            Some(ctx) if !senses.is_empty() => assign_occurrence(store, senses, &ctx, variant),
            _ => Assignment::unassigned(occ, variant),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn token(lemma: &str) -> Token {
        Token {
            orth: lemma.to_owned(),
            lemma: lemma.to_owned(),
            pos: Pos::Other,
        }
    }

    fn sentence(lemmas: &[&str]) -> Sentence {
        Sentence {
            doc_id: "d".into(),
            sent_index: 0,
            tokens: lemmas.iter().map(|l| token(l)).collect(),
        }
    }

    fn occ_at(i: usize, lemma: &str) -> Occurrence {
        Occurrence {
            id: format!("d:0:{i}"),
            lemma: lemma.into(),
            pos: Pos::Noun,
            sentence: 0,
            token_index: i,
            gold_sense: None,
        }
    }

    /// Query `q` at (1,0); words w0..w{n-1} spread over angles so that a known
    /// number of them clear the 0.4 floor.
    fn fan_store(total: usize, above: usize) -> EmbeddingStore {
        let mut rows = vec![("q".to_string(), vec![1.0, 0.0])];
        for i in 0..total {
            // cos = 0.9 for the first `above`, 0.1 for the rest
            let c: f64 = if i < above { 0.9 } else { 0.1 };
            let s = (1.0 - c * c).sqrt();
            rows.push((format!("w{i:03}"), vec![c, s]));
        }
        EmbeddingStore::from_rows(2, rows).unwrap()
    }

    #[test]
    fn primary_rule_takes_everything_above_floor() {
        let store = fan_store(200, 150);
        let set = collect_neighbor_set(&store, "q", &MethodOneParams::default()).unwrap();
        assert_eq!(set.rule, NeighborRule::Primary);
        assert_eq!(set.neighbors.len(), 150);
        assert!(set.neighbors.iter().all(|n| n.similarity >= 0.4));
        assert!(!set.shortfall);
    }

    #[test]
    fn fallback_takes_top_hundred() {
        let store = fan_store(200, 10);
        let set = collect_neighbor_set(&store, "q", &MethodOneParams::default()).unwrap();
        assert_eq!(set.rule, NeighborRule::Fallback);
        assert_eq!(set.neighbors.len(), 100);
        assert_eq!(set.neighbors.iter().filter(|n| n.similarity >= 0.4).count(), 10);
    }

    #[test]
    fn tiny_vocabulary_flags_shortfall() {
        let store = fan_store(4, 4);
        let set = collect_neighbor_set(&store, "q", &MethodOneParams::default()).unwrap();
        assert_eq!(set.rule, NeighborRule::Fallback);
        assert_eq!(set.neighbors.len(), 4);
        assert!(set.shortfall);
        assert!(set.neighbors.iter().all(|n| n.word != "q"));
    }

    #[test]
    fn oov_lemma_cannot_be_processed() {
        let store = fan_store(4, 4);
        assert!(matches!(
            collect_neighbor_set(&store, "nope", &MethodOneParams::default()),
            Err(Error::UnknownWord(_))
        ));
    }

    #[test]
    fn no_linked_pairs_gives_singletons() {
        // Neighbours on orthogonal axes: every pairwise cosine is 0.
        let mut rows = vec![("q".to_string(), vec![1.0; 4])];
        for i in 0..4 {
            let mut v = vec![0.0; 4];
            v[i] = 1.0;
            rows.push((format!("e{i}"), v));
        }
        let store = EmbeddingStore::from_rows(4, rows).unwrap();
        let senses = induce_senses(&store, "q", Pos::Noun, 1, &MethodOneParams::default()).unwrap();
        assert_eq!(senses.len(), 4);
        assert!(senses.clusters.iter().all(|c| c.len() == 1));
        assert_eq!(senses.source.as_ref().unwrap().edges, 0);
    }

    #[test]
    fn context_mean_over_ten_lemmas() {
        // 5 known lemmas each side of the target, on a 2-D fixture.
        let rows = vec![
            ("x".to_string(), vec![1.0, 0.0]),
            ("y".to_string(), vec![0.0, 1.0]),
            ("t".to_string(), vec![1.0, 1.0]),
        ];
        let store = EmbeddingStore::from_rows(2, rows).unwrap();
        let s = sentence(&["x", "x", "y", "x", "x", "t", "y", "y", "x", "y", "y"]);
        let ctx = context_vector(&store, &s, &occ_at(5, "t"), &MethodOneParams::default()).unwrap();
        assert_eq!(ctx.support, 10);
        // x count 5, y count 5 → (0.5, 0.5)
        assert_eq!(ctx.vector, vec![0.5, 0.5]);
    }

    #[test]
    fn window_limits_and_punctuation_skipped() {
        let s = sentence(&["a", "b", ",", "c", "d", "e", "f", "T", "g", ".", "h"]);
        assert_eq!(context_lemmas(&s, 7, 5), ["b", "c", "d", "e", "f", "g", "h"]);
        assert_eq!(context_lemmas(&s, 7, 1), ["f", "g"]);
        assert_eq!(context_lemmas(&s, 0, 2), ["b", "c"]);
    }

    #[test]
    fn short_context_returns_none() {
        let store = EmbeddingStore::from_rows(2, [("a".to_string(), vec![1.0, 0.0])]).unwrap();
        let params = MethodOneParams::default();
        // 4 tokens: 3 context words
        let s = sentence(&["a", "a", "T", "a"]);
        assert!(context_vector(&store, &s, &occ_at(2, "T"), &params).is_none());
        // 6 context words, 3 OOV
        let s = sentence(&["a", "zz", "a", "T", "yy", "a", "xx"]);
        assert!(context_vector(&store, &s, &occ_at(3, "T"), &params).is_none());
        let s = sentence(&["a", "a", "a", "T", "a", "xx"]);
        assert_eq!(context_vector(&store, &s, &occ_at(3, "T"), &params).unwrap().support, 4);
    }

    #[test]
    fn cancelling_context_returns_none() {
        let rows = vec![("p".to_string(), vec![1.0, 0.0]), ("n".to_string(), vec![-1.0, 0.0])];
        let store = EmbeddingStore::from_rows(2, rows).unwrap();
        let s = sentence(&["p", "n", "T", "p", "n"]);
        assert!(context_vector(&store, &s, &occ_at(2, "T"), &MethodOneParams::default()).is_none());
    }

    fn scoring_fixture() -> (EmbeddingStore, SenseClusters) {
        let rows = vec![
            ("e1".to_string(), vec![1.0, 0.0]),
            ("e2".to_string(), vec![0.0, 1.0]),
            ("d".to_string(), vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2]),
        ];
        let store = EmbeddingStore::from_rows(2, rows).unwrap();
        let senses = SenseClusters::from_words(&store, "t", Pos::Noun, &[vec!["e1"], vec!["e2", "d"]]).unwrap();
        (store, senses)
    }

    fn ctx(v: Vec<f64>) -> ContextVector {
        ContextVector {
            occurrence_id: "o".into(),
            vector: v,
            support: 4,
        }
    }

    #[test]
    fn avg_and_max_scores_hand_computed() {
        let (store, senses) = scoring_fixture();
        let c = ctx(vec![1.0, 0.0]);
        let avg = cluster_scores(&store, &senses, &c, Variant::Avg);
        assert!((avg[0] - 1.0).abs() < 1e-15);
        assert!((avg[1] - FRAC_1_SQRT_2 / 2.0).abs() < 1e-15);
        let max = cluster_scores(&store, &senses, &c, Variant::Max);
        assert!((max[1] - FRAC_1_SQRT_2).abs() < 1e-15);
        for v in [Variant::Avg, Variant::Max] {
            let a = assign_occurrence(&store, &senses, &c, v);
            assert_eq!(a.cluster, Some(0));
            assert!((a.score - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn max_variant_picks_cluster_holding_the_context() {
        let (store, senses) = scoring_fixture();
        let a = assign_occurrence(&store, &senses, &ctx(vec![0.0, 3.0]), Variant::Max);
        assert_eq!(a.cluster, Some(1));
        assert!((a.score - 1.0).abs() < 1e-15);
    }

    #[test]
    fn score_ties_go_to_lower_index() {
        let rows = vec![("u".to_string(), vec![1.0, 1.0]), ("v".to_string(), vec![1.0, -1.0])];
        let store = EmbeddingStore::from_rows(2, rows).unwrap();
        let senses = SenseClusters::from_words(&store, "t", Pos::Noun, &[vec!["v"], vec!["u"]]).unwrap();
        let a = assign_occurrence(&store, &senses, &ctx(vec![1.0, 0.0]), Variant::Avg);
        assert_eq!(a.cluster, Some(0));
    }

    #[test]
    fn assignment_json_shape() {
        let a = Assignment {
            occurrence_id: "d:0:1".into(),
            lemma: "zamek".into(),
            cluster: None,
            score: 0.0,
            variant: Variant::Max,
        };
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            r#"{"occurrence":"d:0:1","lemma":"zamek","cluster":null,"score":0.0,"variant":"max"}"#
        );
    }
}

//! Inputs for the criterion benches, built from the planted-sense generator
//! so every run measures the same data.

use wsi_core::clustering::{build_similarity_graph, EdgeRule, WeightedGraph};
use wsi_core::corpus::Occurrence;
use wsi_core::evaluation::LabeledPartition;
use wsi_core::method_two::{build_lemma_vectors, vector_node_id, MethodTwoParams, RepresentativeVector};
use wsi_core::sparse::SparseVector;
use wsi_core::synthetic::{PlantedData, PlantedSpec};
use wsi_core::{Corpus, EmbeddingStore, Pos};

pub const LEMMA: &str = "zamek";

/// A planted world with `senses` senses and `per_sense` occurrences each.
pub fn world(senses: usize, per_sense: usize) -> PlantedData {
    PlantedSpec {
        senses_per_lemma: senses,
        occurrences_per_sense: per_sense,
        ..PlantedSpec::default()
    }
    .generate()
}

/// The neighbour graph Method I clusters for the planted lemma.
pub fn neighbour_graph(store: &EmbeddingStore) -> WeightedGraph {
    let neighbours = store
        .nearest_neighbors(LEMMA, usize::MAX, Some(0.4))
        .expect("lemma in store");
    let vectors: Vec<(String, Vec<f64>)> = neighbours
        .iter()
        .map(|n| (n.word.clone(), store.vector(&n.word).expect("in store").to_vec()))
        .collect();
    build_similarity_graph(&vectors, EdgeRule::AtLeast(0.4)).expect("valid vectors")
}

pub struct MethodTwoInputs {
    pub corpus: Corpus,
    pub occurrences: Vec<Occurrence>,
    pub data: PlantedData,
}

impl MethodTwoInputs {
    pub fn new(data: PlantedData) -> Self {
        let corpus = data.corpus().expect("generated corpus parses");
        let occurrences = corpus.collect_occurrences(LEMMA, Pos::Noun, 1000).expect("cap > 0");
        MethodTwoInputs {
            corpus,
            occurrences,
            data,
        }
    }

    pub fn vectors(&self, params: &MethodTwoParams) -> Vec<RepresentativeVector> {
        let table = self.data.substitute_table().expect("generated records are valid");
        build_lemma_vectors(&self.corpus, LEMMA, Pos::Noun, &self.occurrences, &table, params, 1)
            .expect("valid params")
            .1
    }
}

/// Weighted vectors keyed by node id, as the sparse graph builder takes them.
pub fn sparse_nodes(vectors: &[RepresentativeVector]) -> Vec<(String, SparseVector)> {
    vectors
        .iter()
        .map(|v| (vector_node_id(v), v.weighted.clone().unwrap_or_default()))
        .collect()
}

/// `n` items over `clusters` predicted clusters and `senses` gold senses,
/// assigned by residues so the overlap is irregular.
pub fn partition(n: usize, clusters: usize, senses: usize) -> LabeledPartition {
    let predicted: Vec<usize> = (0..n).map(|i| (i * 7 + i / 3) % clusters).collect();
    let gold: Vec<String> = (0..n).map(|i| format!("s{}", (i * 5 + i / 2) % senses)).collect();
    LabeledPartition::from_labels(&predicted, &gold)
}

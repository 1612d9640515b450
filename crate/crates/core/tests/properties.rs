use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use wsi_core::clustering::{build_similarity_graph, chinese_whispers, EdgeRule, WeightedGraph};
use wsi_core::corpus::{Corpus, Pos};
use wsi_core::embeddings::{EmbeddingStore, Operand};
use wsi_core::evaluation::{bcubed_scores, LabeledPartition, Weighting};
use wsi_core::method_one::{assign_occurrence, ContextVector, SenseClusters, Variant};

fn vectors(n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        prop::collection::vec(-1.0f64..1.0, dim).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3)),
        2..n,
    )
}

fn store_of(rows: &[Vec<f64>]) -> EmbeddingStore {
    let dim = rows[0].len();
    EmbeddingStore::from_rows(dim, rows.iter().enumerate().map(|(i, v)| (format!("w{i}"), v.clone()))).unwrap()
}

proptest! {
    #[test]
    fn cosine_is_symmetric(rows in vectors(12, 5)) {
        let store = store_of(&rows);
        for a in store.vocab() {
            for b in store.vocab() {
                let ab = store.cosine(Operand::Word(a), Operand::Word(b)).unwrap();
                let ba = store.cosine(Operand::Word(b), Operand::Word(a)).unwrap();
                prop_assert!((ab - ba).abs() <= 1e-12);
                prop_assert!((-1.0..=1.0).contains(&ab));
            }
        }
    }

    #[test]
    fn neighbors_sorted_and_floored(rows in vectors(20, 4), floor in -0.5f64..0.9, limit in 0usize..25) {
        let store = store_of(&rows);
        for q in store.vocab() {
            let n = store.nearest_neighbors(q, limit, Some(floor)).unwrap();
            prop_assert!(n.len() <= limit);
            prop_assert!(n.iter().all(|x| &x.word != q && x.similarity >= floor));
            prop_assert!(n.windows(2).all(|w| w[0].similarity >= w[1].similarity));
        }
    }

    #[test]
    fn scaling_preserves_cosines_and_rankings(rows in vectors(15, 4), scales in prop::collection::vec(0.01f64..100.0, 15)) {
        let store = store_of(&rows);
        let scaled: Vec<Vec<f64>> = rows.iter().zip(&scales).map(|(v, s)| v.iter().map(|x| x * s).collect()).collect();
        let scaled_store = store_of(&scaled);
        for q in store.vocab() {
            let a = store.nearest_neighbors(q, usize::MAX, None).unwrap();
            let b = scaled_store.nearest_neighbors(q, usize::MAX, None).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.similarity - y.similarity).abs() < 1e-12);
            }
            // rankings agree up to near-ties
            for (x, y) in a.iter().zip(&b) {
                if x.word != y.word {
                    prop_assert!((x.similarity - y.similarity).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn occurrence_cap_is_a_prefix(n_sent in 0usize..15, cap in 1usize..30) {
        let lines: Vec<String> = (0..n_sent)
            .map(|i| format!(
                r#"{{"doc_id": "d", "sent_index": {i}, "tokens": [{{"orth": "a", "lemma": "t", "pos": "noun"}}, {{"orth": "b", "lemma": "x", "pos": "verb"}}, {{"orth": "c", "lemma": "t", "pos": "noun"}}]}}"#
            ))
            .collect();
        let corpus = Corpus::from_reader(lines.join("\n").as_bytes()).unwrap();
        let all = corpus.collect_occurrences("t", Pos::Noun, usize::MAX).unwrap();
        let capped = corpus.collect_occurrences("t", Pos::Noun, cap).unwrap();
        prop_assert_eq!(&all[..cap.min(all.len())], &capped[..]);
        let ids: BTreeSet<_> = all.iter().map(|o| o.id.clone()).collect();
        prop_assert_eq!(ids.len(), all.len());
        let again = Corpus::from_reader(lines.join("\n").as_bytes()).unwrap();
        prop_assert_eq!(again.collect_occurrences("t", Pos::Noun, usize::MAX).unwrap(), all);
    }

    #[test]
    fn singleton_clusters_make_variants_agree(rows in vectors(8, 3), ctx in prop::collection::vec(-1.0f64..1.0, 3)) {
        prop_assume!(ctx.iter().any(|x| x.abs() > 1e-3));
        let store = store_of(&rows);
        let singles: Vec<Vec<String>> = store.vocab().iter().map(|w| vec![w.clone()]).collect();
        let senses = SenseClusters::from_words(&store, "t", Pos::Noun, &singles).unwrap();
        let c = ContextVector { occurrence_id: "o".into(), vector: ctx.clone(), support: 4 };
        let avg = assign_occurrence(&store, &senses, &c, Variant::Avg);
        let max = assign_occurrence(&store, &senses, &c, Variant::Max);
        prop_assert_eq!(avg.cluster, max.cluster);
    }

    #[test]
    fn assignment_ignores_context_scale(rows in vectors(10, 3), ctx in prop::collection::vec(-1.0f64..1.0, 3), scale in 0.01f64..100.0) {
        prop_assume!(ctx.iter().any(|x| x.abs() > 1e-3));
        let store = store_of(&rows);
        let words: Vec<String> = store.vocab().to_vec();
        let half = words.len() / 2;
        let senses = SenseClusters::from_words(&store, "t", Pos::Noun, &[words[..half].to_vec(), words[half..].to_vec()]).unwrap();
        let scaled: Vec<f64> = ctx.iter().map(|x| x * scale).collect();
        for v in [Variant::Avg, Variant::Max] {
            let a = assign_occurrence(&store, &senses, &ContextVector { occurrence_id: "o".into(), vector: ctx.clone(), support: 4 }, v);
            let b = assign_occurrence(&store, &senses, &ContextVector { occurrence_id: "o".into(), vector: scaled.clone(), support: 4 }, v);
            if a.cluster != b.cluster {
                // only a numerical near-tie may flip
                prop_assert!((a.score - b.score).abs() < 1e-12);
            }
        }
    }
}

/// Random graph of planted components; weights are dyadic so sums are exact.
type Edges = Vec<(usize, usize, f64)>;

fn random_graph(seed: u64, sizes: &[usize], extra: usize) -> (Vec<String>, Edges, Vec<usize>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut ids = Vec::new();
    let mut component = Vec::new();
    let mut edges = Vec::new();
    let mut start = 0;
    for (c, &size) in sizes.iter().enumerate() {
        for i in 0..size {
            ids.push(format!("n{:03}", start + i));
            component.push(c);
            if i > 0 {
                edges.push((
                    start + rng.random_range(0..i),
                    start + i,
                    rng.random_range(1..=4) as f64 / 4.0,
                ));
            }
        }
        for _ in 0..extra {
            let (a, b) = (start + rng.random_range(0..size), start + rng.random_range(0..size));
            if a != b && !edges.iter().any(|&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a)) {
                edges.push((a, b, rng.random_range(1..=4) as f64 / 4.0));
            }
        }
        start += size;
    }
    (ids, edges, component)
}

fn graph_from(ids: &[String], edges: &[(usize, usize, f64)], perm: &[usize]) -> WeightedGraph {
    // perm[new] = old
    let mut inverse = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inverse[old] = new;
    }
    let mut g = WeightedGraph::with_nodes(perm.iter().map(|&old| ids[old].clone())).unwrap();
    for &(a, b, w) in edges {
        g.add_edge(inverse[a], inverse[b], w).unwrap();
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chinese_whispers_invariants(seed in any::<u64>(), sizes in prop::collection::vec(1usize..12, 1..4), isolated in 0usize..4) {
        let mut sizes = sizes;
        sizes.extend(std::iter::repeat_n(1, isolated));
        let (ids, edges, component) = random_graph(seed, &sizes, 6);
        let identity: Vec<usize> = (0..ids.len()).collect();
        let g = graph_from(&ids, &edges, &identity);
        let c = chinese_whispers(&g, 20, seed);

        // partition with dense ids
        prop_assert_eq!(c.len(), ids.len());
        let used: BTreeSet<usize> = c.labels().iter().copied().collect();
        prop_assert_eq!(used, (0..c.num_clusters()).collect::<BTreeSet<_>>());
        // no cross-component sharing; isolated nodes alone
        for i in 0..ids.len() {
            for j in 0..ids.len() {
                if component[i] != component[j] {
                    prop_assert_ne!(c.label(i), c.label(j));
                }
            }
            if g.neighbors(i).is_empty() {
                prop_assert_eq!(c.labels().iter().filter(|&&l| l == c.label(i)).count(), 1);
            }
        }
        // determinism
        prop_assert_eq!(&chinese_whispers(&g, 20, seed), &c);

        // insertion order does not matter
        let mut perm = identity.clone();
        perm.reverse();
        perm.rotate_left(ids.len() / 3);
        let gp = graph_from(&ids, &edges, &perm);
        let cp = chinese_whispers(&gp, 20, seed);
        let members = |graph: &WeightedGraph, cl: &wsi_core::Clustering| -> BTreeSet<BTreeSet<String>> {
            cl.clusters().into_iter().map(|m| m.into_iter().map(|n| graph.id(n).to_owned()).collect()).collect()
        };
        prop_assert_eq!(members(&g, &c), members(&gp, &cp));
    }

    #[test]
    fn dense_graph_rule_matches_cosines(rows in vectors(10, 3), t in 0.05f64..0.95) {
        let items: Vec<(String, Vec<f64>)> = rows.iter().enumerate().map(|(i, v)| (format!("v{i}"), v.clone())).collect();
        let g = build_similarity_graph(&items, EdgeRule::AtLeast(t)).unwrap();
        for i in 0..items.len() {
            for j in i + 1..items.len() {
                let c = wsi_core::embeddings::cosine_raw(&items[i].1, &items[j].1).unwrap();
                prop_assert_eq!(g.weight(i, j).is_some(), c >= t);
            }
        }
    }

    #[test]
    fn refinement_is_monotone(labels in prop::collection::vec((0usize..4, 0usize..4), 1..40), split_seed in any::<u64>()) {
        let clusters: Vec<usize> = labels.iter().map(|l| l.0).collect();
        let gold: Vec<usize> = labels.iter().map(|l| l.1).collect();
        // split each cluster by a hash of the item index
        let refined: Vec<usize> = clusters.iter().enumerate().map(|(i, &c)| c * 2 + ((split_seed >> (i % 64)) & 1) as usize).collect();
        let a = bcubed_scores(&LabeledPartition::from_labels(&clusters, &gold), Weighting::N).unwrap();
        let b = bcubed_scores(&LabeledPartition::from_labels(&refined, &gold), Weighting::N).unwrap();
        prop_assert!(b.precision >= a.precision - 1e-12);
        prop_assert!(b.recall <= a.recall + 1e-12);
        for s in [a, b] {
            prop_assert!((0.0..=1.0).contains(&s.precision) && (0.0..=1.0).contains(&s.recall));
            let h = if s.precision + s.recall == 0.0 { 0.0 } else { 2.0 * s.precision * s.recall / (s.precision + s.recall) };
            prop_assert!((s.f1 - h).abs() <= 1e-12);
        }
    }
}

#[test]
fn nc_weighting_reduces_to_n_for_singleton_classes() {
    let p = LabeledPartition::from_labels(&[0, 0, 1, 2, 2], &["a", "b", "c", "d", "e"]);
    let n = bcubed_scores(&p, Weighting::N).unwrap();
    let nc = bcubed_scores(&p, Weighting::Nc).unwrap();
    assert!((n.recall - nc.recall).abs() < 1e-12);
    let counts: HashMap<usize, usize> = p.items().iter().fold(HashMap::new(), |mut m, i| {
        *m.entry(i.cluster.unwrap()).or_default() += 1;
        m
    });
    assert_eq!(counts.len(), 3);
}

//! Planted-sense data generators.
//!
//! Builds a small, fully consistent world (corpus, gold annotations, sense
//! inventory, embeddings and substitute predictions) in which every target
//! lemma has known senses. Each sense owns one embedding axis: its neighbour
//! words form a tight blob around that axis and its substitute vocabulary is
//! disjoint from every other sense's, so a correct pipeline recovers the
//! planted partition exactly.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use crate::corpus::{occurrence_id, Corpus, Pos, SenseInventory};
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::method_two::{ContextMode, Pattern, Prediction, SubstituteRecord, SubstituteTable};
use crate::seed;

#[derive(Debug, Clone)]
pub struct PlantedSpec {
    pub lemmas: Vec<(String, Pos)>,
    pub senses_per_lemma: usize,
    pub occurrences_per_sense: usize,
    /// Extra occurrences per lemma whose context has too few known words.
    pub violators_per_lemma: usize,
    /// Neighbour words per sense.
    pub blob_size: usize,
    /// Unrelated words on their own axes.
    pub background_words: usize,
    pub background_axes: usize,
    /// Per-coordinate Gaussian noise on every generated vector.
    pub noise: f64,
    /// Distinct substitutes per sense; every prediction list draws from these.
    pub substitute_vocab: usize,
    /// Predictions per list.
    pub k: usize,
    /// Every n-th occurrence is placed at the start of its sentence.
    pub sentence_initial_every: usize,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            lemmas: vec![("zamek".into(), Pos::Noun)],
            senses_per_lemma: 2,
            occurrences_per_sense: 20,
            violators_per_lemma: 4,
            blob_size: 60,
            background_words: 40,
            background_axes: 4,
            noise: 0.04,
            substitute_vocab: 20,
            k: 20,
            sentence_initial_every: 7,
            seed: 2021,
        }
    }
}

/// Everything a run needs, in memory; [`PlantedData::write_to`] puts it on
/// disk in the standard file formats.
#[derive(Debug, Clone, Default)]
pub struct PlantedData {
    pub dim: usize,
    pub embeddings: Vec<(String, Vec<f64>)>,
    pub corpus_lines: Vec<String>,
    pub annotation_lines: Vec<String>,
    pub inventory_lines: Vec<String>,
    pub substitutes: Vec<SubstituteRecord>,
    /// Occurrence id → planted sense, for every generated occurrence.
    pub gold: BTreeMap<String, String>,
    /// Occurrences built with fewer than four known context words.
    pub violators: Vec<String>,
}

pub fn sense_id(lemma: &str, sense: usize) -> String {
    format!("{lemma}-{}", sense + 1)
}

fn neighbor_word(lemma: &str, sense: usize, i: usize) -> String {
    format!("{lemma}_s{}_w{i:03}", sense + 1)
}

fn substitute_word(lemma: &str, sense: usize, j: usize) -> String {
    format!("{lemma}_s{}_sub{j:02}", sense + 1)
}

const FILLERS: [&str; 6] = ["się", "oraz", "który", "także", "jednak", "bardzo"];

impl PlantedSpec {
    pub fn generate(&self) -> PlantedData {
        let sense_axes = self.lemmas.len() * self.senses_per_lemma;
        let dim = sense_axes + self.background_axes.max(1);
        let mut rng = seed::rng(self.seed);
        let gauss = Normal::new(0.0, self.noise.max(0.0)).expect("finite noise");
        let noisy = |rng: &mut seed::Rng, base: Vec<f64>| -> Vec<f64> {
            base.into_iter().map(|x| x + gauss.sample(rng)).collect()
        };
        let axis = |a: usize| -> Vec<f64> {
            let mut v = vec![0.0; dim];
            v[a] = 1.0;
            v
        };

        let mut data = PlantedData {
            dim,
            ..Default::default()
        };

        for b in 0..self.background_words {
            let a = sense_axes + b % self.background_axes.max(1);
            let v = noisy(&mut rng, axis(a));
            data.embeddings.push((format!("tło{b:03}"), v));
        }

        for (li, (lemma, pos)) in self.lemmas.iter().enumerate() {
            let axes: Vec<usize> = (0..self.senses_per_lemma)
                .map(|s| li * self.senses_per_lemma + s)
                .collect();
            let mut target = vec![0.0; dim];
            for &a in &axes {
                target[a] = 1.0 / (axes.len() as f64).sqrt();
            }
            data.embeddings.push((lemma.clone(), target));
            for (s, &a) in axes.iter().enumerate() {
                for i in 0..self.blob_size {
                    let v = noisy(&mut rng, axis(a));
                    data.embeddings.push((neighbor_word(lemma, s, i), v));
                }
            }

            let senses: Vec<String> = (0..=self.senses_per_lemma).map(|s| sense_id(lemma, s)).collect();
            data.inventory_lines
                .push(json!({"lemma": lemma, "pos": pos.as_str(), "senses": senses}).to_string());

            let doc_id = format!("doc{li:02}");
            let mut sent_index = 0;
            let total = self.senses_per_lemma * self.occurrences_per_sense;
            for n in 0..total + self.violators_per_lemma {
                let violator = n >= total;
                let sense = n % self.senses_per_lemma;
                let initial = !violator
                    && self.sentence_initial_every > 0
                    && n % self.sentence_initial_every == self.sentence_initial_every - 1;
                let blob = |rng: &mut seed::Rng| neighbor_word(lemma, sense, rng.random_range(0..self.blob_size));
                let filler = |rng: &mut seed::Rng| FILLERS[rng.random_range(0..FILLERS.len())].to_owned();

                let (left, right): (Vec<String>, Vec<String>) = if violator {
                    (
                        vec![blob(&mut rng), filler(&mut rng), filler(&mut rng)],
                        vec![filler(&mut rng), blob(&mut rng)],
                    )
                } else {
                    let side = |len: usize, rng: &mut seed::Rng| -> Vec<String> {
                        (0..len).map(|i| if i == 2 { filler(rng) } else { blob(rng) }).collect()
                    };
                    let left = if initial {
                        Vec::new()
                    } else {
                        side(rng.random_range(3..=6), &mut rng)
                    };
                    // sentence-initial targets still need four known words on the right
                    let right_len = if initial { 6 } else { rng.random_range(4..=6) };
                    let right = side(right_len, &mut rng);
                    (left, right)
                };

                let mut tokens: Vec<serde_json::Value> = Vec::new();
                let word = |w: &str| {
                    let pos = if FILLERS.contains(&w) { "other" } else { "noun" };
                    json!({"orth": w, "lemma": w, "pos": pos})
                };
                tokens.extend(left.iter().map(|w| word(w)));
                let target_index = tokens.len();
                tokens.push(json!({"orth": lemma, "lemma": lemma, "pos": pos.as_str()}));
                tokens.extend(right.iter().map(|w| word(w)));
                tokens.push(json!({"orth": ".", "lemma": ".", "pos": "interp"}));
                data.corpus_lines
                    .push(json!({"doc_id": doc_id, "sent_index": sent_index, "tokens": tokens}).to_string());

                let occ = occurrence_id(&doc_id, sent_index, target_index);
                let gold = sense_id(lemma, sense);
                data.annotation_lines.push(
                    json!({"doc_id": doc_id, "sent_index": sent_index, "token_index": target_index, "sense": gold})
                        .to_string(),
                );
                data.gold.insert(occ.clone(), gold);
                if violator {
                    data.violators.push(occ.clone());
                }

                let predictions = |rng: &mut seed::Rng| -> Vec<Prediction> {
                    let mut vocab: Vec<usize> = (0..self.substitute_vocab).collect();
                    vocab.shuffle(rng);
                    vocab
                        .into_iter()
                        .take(self.k)
                        .enumerate()
                        .map(|(rank, j)| Prediction {
                            token: substitute_word(lemma, sense, j),
                            score: 1.0 / (rank as f64 + 2.0),
                        })
                        .collect()
                };
                let mut sides = vec![ContextMode::Right, ContextMode::Both];
                if !left.is_empty() {
                    sides.insert(0, ContextMode::Left);
                }
                for pattern in [Pattern::And, Pattern::Substitution] {
                    for &mode in &sides {
                        if mode == ContextMode::Both && pattern == Pattern::And {
                            continue;
                        }
                        data.substitutes.push(SubstituteRecord {
                            occurrence: occ.clone(),
                            lemma: lemma.clone(),
                            pos: pos.as_str().to_owned(),
                            mode,
                            pattern,
                            predictions: predictions(&mut rng),
                        });
                    }
                }
                sent_index += 1;
            }
        }
        data
    }
}

impl PlantedData {
    pub fn corpus(&self) -> Result<Corpus> {
        let mut corpus = Corpus::from_reader(self.corpus_lines.join("\n").as_bytes())?;
        corpus.annotations_from_reader(self.annotation_lines.join("\n").as_bytes())?;
        Ok(corpus)
    }

    pub fn store(&self) -> Result<EmbeddingStore> {
        EmbeddingStore::from_rows(self.dim, self.embeddings.iter().cloned())
    }

    pub fn inventory(&self) -> Result<SenseInventory> {
        SenseInventory::from_reader(self.inventory_lines.join("\n").as_bytes())
    }

    pub fn substitute_table(&self) -> Result<SubstituteTable> {
        SubstituteTable::from_records(self.substitutes.iter().cloned())
    }

    /// Writes `corpus.jsonl`, `annotations.jsonl`, `inventory.jsonl`,
    /// `embeddings.txt` and `substitutes.jsonl` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write_lines = |name: &str, lines: &mut dyn Iterator<Item = String>| -> Result<()> {
            let path = dir.join(name);
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut out = BufWriter::new(file);
            for line in lines {
                writeln!(out, "{line}").map_err(|e| Error::io(&path, e))?;
            }
            out.flush().map_err(|e| Error::io(&path, e))
        };
        write_lines("corpus.jsonl", &mut self.corpus_lines.iter().cloned())?;
        write_lines("annotations.jsonl", &mut self.annotation_lines.iter().cloned())?;
        write_lines("inventory.jsonl", &mut self.inventory_lines.iter().cloned())?;
        let header = format!("{} {}", self.embeddings.len(), self.dim);
        write_lines(
            "embeddings.txt",
            &mut std::iter::once(header).chain(self.embeddings.iter().map(|(w, v)| {
                let values: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                format!("{w} {}", values.join(" "))
            })),
        )?;
        write_lines(
            "substitutes.jsonl",
            &mut self
                .substitutes
                .iter()
                .map(|r| serde_json::to_string(r).expect("records serialize")),
        )?;
        Ok(())
    }
}

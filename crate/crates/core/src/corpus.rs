//! Tagged corpus ingestion: sentences, gold sense annotations and the sense
//! inventory, all stored as line-delimited JSON.
//!
//! A corpus line holds one sentence:
//! `{"doc_id": "d1", "sent_index": 0, "tokens": [{"orth": "Zamki", "lemma": "zamek", "pos": "noun"}]}`.
//! Annotation lines point at a single token:
//! `{"doc_id": "d1", "sent_index": 0, "token_index": 0, "sense": "zamek-1"}`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Occurrence cap applied per lemma unless configured otherwise.
pub const DEFAULT_OCCURRENCE_CAP: usize = 1000;

/// Coarse part-of-speech tag. Anything a tagger emits outside the three open
/// classes is folded into `Other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pos {
    Noun,
    Adj,
    Verb,
    Other,
}

impl Pos {
    pub const ALL: [Pos; 4] = [Pos::Noun, Pos::Adj, Pos::Verb, Pos::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Noun => "noun",
            Pos::Verb => "verb",
            Pos::Adj => "adj",
            Pos::Other => "other",
        }
    }

    /// Lenient mapping used by the loaders: unknown tags become `Other`.
    /// Returns the tag and whether it was recognised.
    pub fn from_tag(tag: &str) -> (Pos, bool) {
        match tag.parse() {
            Ok(pos) => (pos, true),
            Err(_) => (Pos::Other, false),
        }
    }
}

impl FromStr for Pos {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noun" => Ok(Pos::Noun),
            "verb" => Ok(Pos::Verb),
            "adj" => Ok(Pos::Adj),
            "other" => Ok(Pos::Other),
            _ => Err(Error::Config(format!("unknown POS tag `{s}`"))),
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub orth: String,
    pub lemma: String,
    pub pos: Pos,
}

impl Token {
    /// True when the surface form consists only of punctuation characters.
    pub fn is_punctuation(&self) -> bool {
        self.orth
            .chars()
            .all(|c| c.is_ascii_punctuation() || is_unicode_punctuation(c))
    }
}

fn is_unicode_punctuation(c: char) -> bool {
    matches!(
        c,
        '„' | '”' | '“' | '‘' | '’' | '«' | '»' | '–' | '—' | '…' | '¿' | '¡' | '‚'
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub doc_id: String,
    pub sent_index: usize,
    pub tokens: Vec<Token>,
}

/// One occurrence of a target lemma.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occurrence {
    /// `doc_id:sent_index:token_index`
    pub id: String,
    pub lemma: String,
    pub pos: Pos,
    /// Index of the owning sentence within the corpus.
    pub sentence: usize,
    pub token_index: usize,
    pub gold_sense: Option<String>,
}

pub fn occurrence_id(doc_id: &str, sent_index: usize, token_index: usize) -> String {
    format!("{doc_id}:{sent_index}:{token_index}")
}

/// Supported on-disk corpus formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    #[default]
    Jsonl,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            _ => Err(Error::Config(format!("unknown corpus format `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LoadStats {
    pub sentences: usize,
    pub tokens: usize,
    pub unknown_pos: usize,
}

#[derive(Deserialize)]
struct SentenceRecord {
    doc_id: String,
    sent_index: usize,
    tokens: Vec<TokenRecord>,
}

#[derive(Deserialize)]
struct TokenRecord {
    orth: String,
    lemma: String,
    pos: String,
}

#[derive(Deserialize, Serialize)]
struct AnnotationRecord {
    doc_id: String,
    sent_index: usize,
    token_index: usize,
    sense: String,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    sentences: Vec<Sentence>,
    by_key: HashMap<(String, usize), usize>,
    gold: HashMap<(usize, usize), String>,
    stats: LoadStats,
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Iterates non-blank lines with 1-based line numbers.
pub(crate) fn jsonl_lines<'a, R: BufRead + 'a>(
    reader: R,
    what: &'a str,
) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    reader.lines().enumerate().filter_map(move |(i, line)| match line {
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(Ok((i + 1, l))),
        Err(e) => Some(Err(Error::parse(what, i + 1, e))),
    })
}

/// Loads a corpus file in the given format.
pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus> {
    let path = path.as_ref();
    match format {
        CorpusFormat::Jsonl => Corpus::from_reader(open(path)?),
    }
}

impl Corpus {
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut corpus = Corpus::default();
        for line in jsonl_lines(reader, "corpus") {
            let (line_no, text) = line?;
            let record: SentenceRecord = serde_json::from_str(&text).map_err(|e| Error::parse("corpus", line_no, e))?;
            corpus.push_record(record, line_no)?;
        }
        Ok(corpus)
    }

    fn push_record(&mut self, record: SentenceRecord, line_no: usize) -> Result<()> {
        if record.tokens.is_empty() {
            return Err(Error::parse("corpus", line_no, "sentence has no tokens"));
        }
        let key = (record.doc_id.clone(), record.sent_index);
        if self.by_key.contains_key(&key) {
            return Err(Error::parse(
                "corpus",
                line_no,
                format!("duplicate sentence {}:{}", key.0, key.1),
            ));
        }
        let mut tokens = Vec::with_capacity(record.tokens.len());
        for (i, t) in record.tokens.into_iter().enumerate() {
            if t.orth.is_empty() || t.lemma.is_empty() {
                return Err(Error::parse(
                    "corpus",
                    line_no,
                    format!("token {i} has an empty orth or lemma"),
                ));
            }
            let (pos, known) = Pos::from_tag(&t.pos);
            if !known {
                self.stats.unknown_pos += 1;
            }
            tokens.push(Token {
                orth: t.orth,
                lemma: t.lemma,
                pos,
            });
        }
        self.stats.sentences += 1;
        self.stats.tokens += tokens.len();
        self.by_key.insert(key, self.sentences.len());
        self.sentences.push(Sentence {
            doc_id: record.doc_id,
            sent_index: record.sent_index,
            tokens,
        });
        Ok(())
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn sentence(&self, index: usize) -> &Sentence {
        &self.sentences[index]
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn stats(&self) -> LoadStats {
        self.stats
    }

    pub fn annotation_count(&self) -> usize {
        self.gold.len()
    }

    /// Loads gold senses from an annotation file and returns the number of
    /// distinct tokens it annotates. Repeating a record is a no-op; giving the
    /// same token two different senses is an error.
    pub fn load_annotations(&mut self, path: impl AsRef<Path>) -> Result<usize> {
        self.annotations_from_reader(open(path.as_ref())?)
    }

    pub fn annotations_from_reader<R: BufRead>(&mut self, reader: R) -> Result<usize> {
        let mut staged: HashMap<(usize, usize), String> = HashMap::new();
        for line in jsonl_lines(reader, "annotations") {
            let (line_no, text) = line?;
            let record: AnnotationRecord =
                serde_json::from_str(&text).map_err(|e| Error::parse("annotations", line_no, e))?;
            let slot = self
                .by_key
                .get(&(record.doc_id.clone(), record.sent_index))
                .copied()
                .filter(|&s| record.token_index < self.sentences[s].tokens.len());
            let Some(sentence) = slot else {
                return Err(Error::DanglingAnnotation {
                    line: line_no,
                    record: text,
                });
            };
            let key = (sentence, record.token_index);
            let previous = staged.get(&key).or_else(|| self.gold.get(&key));
            if previous.is_some_and(|s| *s != record.sense) {
                return Err(Error::ConflictingAnnotation {
                    line: line_no,
                    record: text,
                });
            }
            staged.insert(key, record.sense);
        }
        let count = staged.len();
        self.gold.extend(staged);
        Ok(count)
    }

    pub fn gold_sense(&self, sentence: usize, token_index: usize) -> Option<&str> {
        self.gold.get(&(sentence, token_index)).map(String::as_str)
    }

    /// Occurrences of `(lemma, pos)` in corpus order, at most `cap` of them.
    pub fn collect_occurrences(&self, lemma: &str, pos: Pos, cap: usize) -> Result<Vec<Occurrence>> {
        if cap == 0 {
            return Err(Error::Config("occurrence cap must be at least 1".into()));
        }
        let mut out = Vec::new();
        'outer: for (s, sentence) in self.sentences.iter().enumerate() {
            for (t, token) in sentence.tokens.iter().enumerate() {
                if token.lemma != lemma || token.pos != pos {
                    continue;
                }
                if out.len() == cap {
                    break 'outer;
                }
                out.push(Occurrence {
                    id: occurrence_id(&sentence.doc_id, sentence.sent_index, t),
                    lemma: token.lemma.clone(),
                    pos,
                    sentence: s,
                    token_index: t,
                    gold_sense: self.gold_sense(s, t).map(str::to_owned),
                });
            }
        }
        Ok(out)
    }

    /// Distinct `(lemma, pos)` pairs carrying at least one gold annotation,
    /// sorted.
    pub fn annotated_targets(&self) -> Vec<(String, Pos)> {
        let set: BTreeSet<(String, Pos)> = self
            .gold
            .keys()
            .map(|&(s, t)| {
                let tok = &self.sentences[s].tokens[t];
                (tok.lemma.clone(), tok.pos)
            })
            .collect();
        set.into_iter().collect()
    }
}

#[derive(Deserialize)]
struct InventoryRecord {
    lemma: String,
    pos: String,
    senses: Vec<String>,
}

/// Sense lists per `(lemma, pos)`; list order is inventory order, so the first
/// entry is the first sense.
#[derive(Debug, Clone, Default)]
pub struct SenseInventory {
    entries: HashMap<(String, Pos), Vec<String>>,
}

impl SenseInventory {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(open(path.as_ref())?)
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut entries = HashMap::new();
        for line in jsonl_lines(reader, "inventory") {
            let (line_no, text) = line?;
            let record: InventoryRecord =
                serde_json::from_str(&text).map_err(|e| Error::parse("inventory", line_no, e))?;
            if record.senses.is_empty() {
                return Err(Error::parse("inventory", line_no, "empty sense list"));
            }
            let (pos, _) = Pos::from_tag(&record.pos);
            if entries.insert((record.lemma, pos), record.senses).is_some() {
                return Err(Error::parse("inventory", line_no, "duplicate entry"));
            }
        }
        Ok(SenseInventory { entries })
    }

    pub fn insert(&mut self, lemma: impl Into<String>, pos: Pos, senses: Vec<String>) {
        self.entries.insert((lemma.into(), pos), senses);
    }

    pub fn senses(&self, lemma: &str, pos: Pos) -> Option<&[String]> {
        self.entries.get(&(lemma.to_owned(), pos)).map(Vec::as_slice)
    }

    pub fn first_sense(&self, lemma: &str, pos: Pos) -> Option<&str> {
        self.senses(lemma, pos).and_then(|s| s.first()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Gold senses in `corpus` that the inventory does not list, as
    /// human-readable messages.
    pub fn validate(&self, corpus: &Corpus) -> Vec<String> {
        let mut problems: Vec<String> = corpus
            .gold
            .iter()
            .filter_map(|(&(s, t), sense)| {
                let sentence = &corpus.sentences[s];
                let tok = &sentence.tokens[t];
                match self.senses(&tok.lemma, tok.pos) {
                    Some(list) if list.contains(sense) => None,
                    Some(_) => Some(format!(
                        "{}: sense `{sense}` not listed for {}/{}",
                        occurrence_id(&sentence.doc_id, sentence.sent_index, t),
                        tok.lemma,
                        tok.pos
                    )),
                    None => Some(format!(
                        "{}: no inventory entry for {}/{}",
                        occurrence_id(&sentence.doc_id, sentence.sent_index, t),
                        tok.lemma,
                        tok.pos
                    )),
                }
            })
            .collect();
        problems.sort();
        problems
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // 8 + 6 tokens; "zamek" appears twice as a noun.
    const TWO_SENTENCES: &str = r#"{"doc_id": "d1", "sent_index": 0, "tokens": [{"orth": "Zamki", "lemma": "zamek", "pos": "noun"}, {"orth": "i", "lemma": "i", "pos": "conj"}, {"orth": "wsie", "lemma": "wieś", "pos": "noun"}, {"orth": "we", "lemma": "w", "pos": "prep"}, {"orth": "Francji", "lemma": "Francja", "pos": "noun"}, {"orth": "były", "lemma": "być", "pos": "verb"}, {"orth": "piękne", "lemma": "piękny", "pos": "adj"}, {"orth": ".", "lemma": ".", "pos": "interp"}]}
{"doc_id": "d1", "sent_index": 1, "tokens": [{"orth": "Ulepszone", "lemma": "ulepszony", "pos": "adj"}, {"orth": "zamki", "lemma": "zamek", "pos": "noun"}, {"orth": "niewiele", "lemma": "niewiele", "pos": "other"}, {"orth": "tu", "lemma": "tu", "pos": "other"}, {"orth": "pomagają", "lemma": "pomagać", "pos": "verb"}, {"orth": ".", "lemma": ".", "pos": "other"}]}
"#;

    fn fixture() -> Corpus {
        Corpus::from_reader(TWO_SENTENCES.as_bytes()).unwrap()
    }

    #[test]
    fn two_sentence_fixture_counts() {
        let c = fixture();
        assert_eq!(c.len(), 2);
        assert_eq!(c.stats().tokens, 14);
        // conj, prep, interp
        assert_eq!(c.stats().unknown_pos, 3);
        assert_eq!(c.sentence(0).tokens[1].pos, Pos::Other);
    }

    #[test]
    fn empty_file_is_an_empty_corpus() {
        let c = Corpus::from_reader("".as_bytes()).unwrap();
        assert!(c.is_empty());
        assert_eq!(c.stats().tokens, 0);
    }

    #[test]
    fn bad_line_reports_its_number() {
        let text = format!("{}\n{{\"doc_id\": 3\n", TWO_SENTENCES.lines().next().unwrap());
        match Corpus::from_reader(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_sentence_rejected() {
        let text = r#"{"doc_id": "x", "sent_index": 0, "tokens": []}"#;
        assert!(matches!(
            Corpus::from_reader(text.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_sentence_key_rejected() {
        let line = TWO_SENTENCES.lines().next().unwrap();
        let text = format!("{line}\n{line}\n");
        assert!(matches!(
            Corpus::from_reader(text.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn collect_respects_cap_and_order() {
        let c = fixture();
        let all = c.collect_occurrences("zamek", Pos::Noun, 1000).unwrap();
        assert_eq!(
            all.iter().map(|o| o.id.as_str()).collect::<Vec<_>>(),
            ["d1:0:0", "d1:1:1"]
        );
        let one = c.collect_occurrences("zamek", Pos::Noun, 1).unwrap();
        assert_eq!(one, all[..1]);
        assert!(c.collect_occurrences("qqq", Pos::Noun, 10).unwrap().is_empty());
        assert!(c.collect_occurrences("zamek", Pos::Verb, 10).unwrap().is_empty());
        assert!(c.collect_occurrences("zamek", Pos::Noun, 0).is_err());
    }

    #[test]
    fn annotations_attach_and_are_idempotent() {
        let mut c = fixture();
        let ann = r#"{"doc_id": "d1", "sent_index": 0, "token_index": 0, "sense": "castle"}
{"doc_id": "d1", "sent_index": 1, "token_index": 1, "sense": "lock"}
{"doc_id": "d1", "sent_index": 1, "token_index": 1, "sense": "lock"}
"#;
        assert_eq!(c.annotations_from_reader(ann.as_bytes()).unwrap(), 2);
        assert_eq!(c.annotations_from_reader(ann.as_bytes()).unwrap(), 2);
        assert_eq!(c.annotation_count(), 2);
        let occ = c.collect_occurrences("zamek", Pos::Noun, 10).unwrap();
        assert_eq!(occ[0].gold_sense.as_deref(), Some("castle"));
        assert_eq!(occ[1].gold_sense.as_deref(), Some("lock"));
        assert_eq!(c.annotated_targets(), vec![("zamek".to_string(), Pos::Noun)]);
    }

    #[test]
    fn dangling_annotation_is_an_error() {
        let mut c = fixture();
        let past_end = r#"{"doc_id": "d1", "sent_index": 1, "token_index": 6, "sense": "x"}"#;
        assert!(matches!(
            c.annotations_from_reader(past_end.as_bytes()),
            Err(Error::DanglingAnnotation { line: 1, .. })
        ));
        let no_doc = r#"{"doc_id": "zz", "sent_index": 0, "token_index": 0, "sense": "x"}"#;
        assert!(c.annotations_from_reader(no_doc.as_bytes()).is_err());
        assert_eq!(c.annotation_count(), 0);
    }

    #[test]
    fn conflicting_annotation_is_an_error() {
        let mut c = fixture();
        let ann = r#"{"doc_id": "d1", "sent_index": 0, "token_index": 0, "sense": "castle"}
{"doc_id": "d1", "sent_index": 0, "token_index": 0, "sense": "lock"}"#;
        assert!(matches!(
            c.annotations_from_reader(ann.as_bytes()),
            Err(Error::ConflictingAnnotation { line: 2, .. })
        ));
    }

    #[test]
    fn inventory_order_defines_first_sense() {
        let inv = SenseInventory::from_reader(
            r#"{"lemma": "zamek", "pos": "noun", "senses": ["castle", "lock", "zipper"]}"#.as_bytes(),
        )
        .unwrap();
        assert_eq!(inv.first_sense("zamek", Pos::Noun), Some("castle"));
        assert_eq!(inv.senses("zamek", Pos::Verb), None);

        let mut c = fixture();
        c.annotations_from_reader(r#"{"doc_id": "d1", "sent_index": 0, "token_index": 0, "sense": "gate"}"#.as_bytes())
            .unwrap();
        assert_eq!(inv.validate(&c).len(), 1);
    }

    #[test]
    fn empty_inventory_sense_list_rejected() {
        let r = SenseInventory::from_reader(r#"{"lemma": "a", "pos": "noun", "senses": []}"#.as_bytes());
        assert!(r.is_err());
    }

    #[test]
    fn punctuation_detection() {
        let c = fixture();
        assert!(c.sentence(0).tokens[7].is_punctuation());
        assert!(!c.sentence(0).tokens[0].is_punctuation());
    }
}

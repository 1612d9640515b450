//! Run configuration: a TOML file plus command-line overrides, one flag per
//! key.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Serialize};
use wsi_core::corpus::{Pos, DEFAULT_OCCURRENCE_CAP};
use wsi_core::evaluation::ReportMode;
use wsi_core::method_one::{MethodOneParams, Variant};
use wsi_core::method_two::{DrawMode, MethodTwoParams, Pattern};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    One,
    Two,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "one" => Ok(Method::One),
            "two" => Ok(Method::Two),
            _ => Err(format!("unknown method `{s}` (expected one|two)")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::One => "one",
            Method::Two => "two",
        })
    }
}

/// Every key optional: the shape shared by config files and flags.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    /// Corpus JSONL.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Gold annotation JSONL.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Sense inventory JSONL.
    #[arg(long)]
    pub inventory: Option<PathBuf>,
    /// word2vec text embeddings.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Substitutes JSONL.
    #[arg(long)]
    pub substitutes: Option<PathBuf>,
    /// Targets as lemma/pos; "all-annotated" (the default) takes every annotated lemma.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many")]
    pub targets: Option<Vec<String>>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub mode: Option<DrawMode>,
    #[arg(long)]
    pub pattern: Option<Pattern>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub min_support: Option<usize>,
    #[arg(long)]
    pub similarity_floor: Option<f64>,
    #[arg(long)]
    pub neighbor_minimum: Option<usize>,
    #[arg(long)]
    pub edge_threshold: Option<f64>,
    #[arg(long)]
    pub occurrence_cap: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub report_mode: Option<ReportMode>,
    #[arg(long)]
    pub normalize_case: Option<bool>,
    /// Worker threads; defaults to the number of available cores.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn one_or_many<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Vec<String>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }
    Ok(Option::<OneOrMany>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    }))
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),+) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )+
    };
}

impl ConfigOverrides {
    /// Reads a TOML config. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn from_file(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
        let mut parsed: ConfigOverrides =
            toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut parsed.corpus,
            &mut parsed.annotations,
            &mut parsed.inventory,
            &mut parsed.embeddings,
            &mut parsed.substitutes,
            &mut parsed.output,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(parsed)
    }

    /// `self` with every key set in `top` replaced.
    pub fn overlay(mut self, top: &ConfigOverrides) -> Self {
        overlay!(
            self,
            top,
            corpus,
            annotations,
            inventory,
            embeddings,
            substitutes,
            targets,
            method,
            variant,
            mode,
            pattern,
            l,
            r,
            k,
            window,
            min_support,
            similarity_floor,
            neighbor_minimum,
            edge_threshold,
            occurrence_cap,
            max_iterations,
            seed,
            report_mode,
            normalize_case,
            workers,
            output
        );
        self
    }

    pub fn load(config: Option<&Path>, flags: &ConfigOverrides) -> Result<Self, Failure> {
        let base = match config {
            Some(p) => ConfigOverrides::from_file(p)?,
            None => ConfigOverrides::default(),
        };
        Ok(base.overlay(flags))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Targets {
    AllAnnotated,
    List(Vec<(String, Pos)>),
}

impl Serialize for Targets {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Targets::AllAnnotated => s.serialize_str("all-annotated"),
            Targets::List(list) => s.collect_seq(list.iter().map(|(l, p)| format!("{l}/{p}"))),
        }
    }
}

/// A fully resolved configuration: defaults filled in, constraints checked.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub inventory: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub substitutes: Option<PathBuf>,
    pub targets: Targets,
    pub method: Method,
    pub variant: Variant,
    pub mode: DrawMode,
    pub pattern: Pattern,
    pub l: usize,
    pub r: usize,
    pub k: usize,
    pub window: usize,
    pub min_support: usize,
    pub similarity_floor: f64,
    pub neighbor_minimum: usize,
    pub edge_threshold: f64,
    pub occurrence_cap: usize,
    pub max_iterations: usize,
    pub seed: u64,
    pub report_mode: ReportMode,
    pub normalize_case: bool,
    pub workers: usize,
    pub output: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 1;

pub fn parse_target(s: &str) -> Result<(String, Pos), String> {
    let (lemma, pos) = s
        .rsplit_once('/')
        .ok_or_else(|| format!("target `{s}` must look like lemma/pos"))?;
    let pos = pos.parse::<Pos>().map_err(|e| format!("target `{s}`: {e}"))?;
    if lemma.is_empty() {
        return Err(format!("target `{s}` has an empty lemma"));
    }
    Ok((lemma.to_owned(), pos))
}

impl RunConfig {
    /// Resolves defaults and collects every violated constraint.
    pub fn resolve(o: &ConfigOverrides) -> Result<Self, Failure> {
        let m1 = MethodOneParams::default();
        let m2 = MethodTwoParams::default();
        let mut problems = Vec::new();
        let mode = o.mode.unwrap_or(m2.mode);
        let targets = match o.targets.as_deref() {
            None => Targets::AllAnnotated,
            Some([only]) if only == "all-annotated" => Targets::AllAnnotated,
            Some(list) => Targets::List(
                list.iter()
                    .filter_map(|t| parse_target(t).map_err(|e| problems.push(e)).ok())
                    .collect(),
            ),
        };
        let cfg = RunConfig {
            corpus: o.corpus.clone(),
            annotations: o.annotations.clone(),
            inventory: o.inventory.clone(),
            embeddings: o.embeddings.clone(),
            substitutes: o.substitutes.clone(),
            targets,
            method: o.method.unwrap_or(Method::One),
            variant: o.variant.unwrap_or(Variant::Avg),
            mode,
            pattern: o.pattern.unwrap_or(m2.pattern),
            l: o.l.unwrap_or_else(|| mode.default_l()),
            r: o.r.unwrap_or(m2.r),
            k: o.k.unwrap_or(m2.k),
            window: o.window.unwrap_or(m1.window),
            min_support: o.min_support.unwrap_or(m1.min_support),
            similarity_floor: o.similarity_floor.unwrap_or(m1.similarity_floor),
            neighbor_minimum: o.neighbor_minimum.unwrap_or(m1.neighbor_minimum),
            edge_threshold: o.edge_threshold.unwrap_or(m1.edge_threshold),
            occurrence_cap: o.occurrence_cap.unwrap_or(DEFAULT_OCCURRENCE_CAP),
            max_iterations: o.max_iterations.unwrap_or(m1.max_iterations),
            seed: o.seed.unwrap_or(DEFAULT_SEED),
            report_mode: o.report_mode.unwrap_or_default(),
            normalize_case: o.normalize_case.unwrap_or(false),
            workers: o
                .workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
            output: o.output.clone(),
        };
        problems.extend(cfg.method_two().violations());
        for (name, v) in [
            ("window", cfg.window),
            ("min_support", cfg.min_support),
            ("neighbor_minimum", cfg.neighbor_minimum),
            ("occurrence_cap", cfg.occurrence_cap),
            ("workers", cfg.workers),
        ] {
            if v == 0 {
                problems.push(format!("{name} must be at least 1"));
            }
        }
        if !(cfg.edge_threshold > 0.0 && cfg.edge_threshold <= 1.0) {
            problems.push(format!("edge_threshold must be in (0, 1], got {}", cfg.edge_threshold));
        }
        if !(-1.0..=1.0).contains(&cfg.similarity_floor) {
            problems.push(format!(
                "similarity_floor must be in [-1, 1], got {}",
                cfg.similarity_floor
            ));
        }
        if matches!(&cfg.targets, Targets::List(l) if l.is_empty()) && problems.is_empty() {
            problems.push("targets list is empty".to_owned());
        }
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Failure::Config(problems))
        }
    }

    pub fn method_one(&self) -> MethodOneParams {
        MethodOneParams {
            similarity_floor: self.similarity_floor,
            neighbor_minimum: self.neighbor_minimum,
            edge_threshold: self.edge_threshold,
            window: self.window,
            min_support: self.min_support,
            max_iterations: self.max_iterations,
        }
    }

    pub fn method_two(&self) -> MethodTwoParams {
        MethodTwoParams {
            mode: self.mode,
            pattern: self.pattern,
            k: self.k,
            r: self.r,
            l: Some(self.l),
            max_iterations: self.max_iterations,
            normalize_case: self.normalize_case,
        }
    }

    /// Checks that the inputs a command needs are configured.
    pub fn require(&self, keys: &[&str]) -> Result<(), Failure> {
        let missing: Vec<String> = keys
            .iter()
            .filter(|&&k| match k {
                "corpus" => self.corpus.is_none(),
                "annotations" => self.annotations.is_none(),
                "inventory" => self.inventory.is_none(),
                "embeddings" => self.embeddings.is_none(),
                "substitutes" => self.substitutes.is_none(),
                "output" => self.output.is_none(),
                _ => false,
            })
            .map(|k| format!("`{k}` is required for this command"))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Failure::Config(missing))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_parameters() {
        let cfg = RunConfig::resolve(&ConfigOverrides::default()).unwrap();
        assert_eq!(cfg.similarity_floor, 0.4);
        assert_eq!(cfg.neighbor_minimum, 100);
        assert_eq!(cfg.edge_threshold, 0.4);
        assert_eq!((cfg.window, cfg.min_support), (5, 4));
        assert_eq!((cfg.k, cfg.r, cfg.l), (20, 20, 4));
        assert_eq!(cfg.occurrence_cap, 1000);
        assert_eq!(cfg.targets, Targets::AllAnnotated);

        let both = ConfigOverrides {
            mode: Some(DrawMode::BothSides),
            ..Default::default()
        };
        assert_eq!(RunConfig::resolve(&both).unwrap().l, 6);
    }

    #[test]
    fn all_violations_reported() {
        let bad = ConfigOverrides {
            mode: Some(DrawMode::BothSides),
            pattern: Some(Pattern::And),
            r: Some(0),
            window: Some(0),
            targets: Some(vec!["zamek".into()]),
            ..Default::default()
        };
        match RunConfig::resolve(&bad) {
            Err(Failure::Config(p)) => {
                assert_eq!(p.len(), 4, "{p:?}");
                assert!(p.iter().any(|m| m.contains("substitution")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigOverrides {
            seed: Some(5),
            k: Some(10),
            ..Default::default()
        };
        let flags = ConfigOverrides {
            seed: Some(9),
            ..Default::default()
        };
        let merged = file.overlay(&flags);
        assert_eq!((merged.seed, merged.k), (Some(9), Some(10)));
    }

    #[test]
    fn toml_round_trip_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "corpus = \"corpus.jsonl\"\nmethod = \"two\"\nmode = \"both-sides\"\ntargets = [\"zamek/noun\"]\nseed = 3\n",
        )
        .unwrap();
        let o = ConfigOverrides::from_file(&path).unwrap();
        assert_eq!(o.corpus.unwrap(), dir.path().join("corpus.jsonl"));
        assert_eq!(o.method, Some(Method::Two));
        std::fs::write(&path, "bogus_key = 1\n").unwrap();
        assert!(ConfigOverrides::from_file(&path).is_err());
    }

    #[test]
    fn resolved_config_reloads_from_its_echo() {
        let o = ConfigOverrides {
            targets: Some(vec!["zamek/noun".into(), "szybki/adj".into()]),
            method: Some(Method::Two),
            workers: Some(3),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&o).unwrap();
        let echo = serde_json::to_string(&cfg).unwrap();
        let back: ConfigOverrides = serde_json::from_str(&echo).unwrap();
        assert_eq!(RunConfig::resolve(&back).unwrap(), cfg);

        let all = RunConfig::resolve(&ConfigOverrides::default()).unwrap();
        let back: ConfigOverrides = serde_json::from_str(&serde_json::to_string(&all).unwrap()).unwrap();
        assert_eq!(RunConfig::resolve(&back).unwrap().targets, Targets::AllAnnotated);
    }

    #[test]
    fn target_parsing() {
        assert_eq!(parse_target("zamek/noun").unwrap(), ("zamek".into(), Pos::Noun));
        assert!(parse_target("zamek").is_err());
        assert!(parse_target("zamek/xx").is_err());
    }
}

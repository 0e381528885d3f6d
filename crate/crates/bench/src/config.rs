//! Run configuration: a JSON file with command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use triage_core::learn::TrainingConfig;
use triage_core::pipeline::{DEFAULT_SEED, DEFAULT_THRESHOLD};
use triage_core::SplitProtocol;

use crate::backend::BackendConfig;
use crate::error::{BenchError, Result};
use crate::ingest::InputFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignerKind {
    /// Content-blind ranking by training assignment counts.
    Frequency,
    /// Softmax regression trained on the supervised pairs.
    Sft,
    /// One-vs-rest logistic classifier over bag-of-words.
    Cbr,
    /// Remote completion backend.
    Llm,
}

impl AssignerKind {
    pub const ALL: [AssignerKind; 4] = [Self::Frequency, Self::Sft, Self::Cbr, Self::Llm];

    pub fn name(self) -> &'static str {
        match self {
            Self::Frequency => "frequency",
            Self::Sft => "sft",
            Self::Cbr => "cbr",
            Self::Llm => "llm",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(name.trim()))
    }

    pub fn is_trainable(self) -> bool {
        matches!(self, Self::Sft | Self::Cbr)
    }
}

fn desk_training() -> TrainingConfig {
    TrainingConfig {
        learning_rate: 0.05,
        ..TrainingConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub project: String,
    pub corpus: Option<PathBuf>,
    /// Inferred from the corpus extension when absent.
    pub format: Option<InputFormat>,
    pub max_malformed: Option<usize>,
    pub out_dir: PathBuf,
    pub protocol: SplitProtocol,
    pub runs: usize,
    pub seed: u64,
    pub threshold: usize,
    pub k_max: usize,
    /// Candidates from the training split only instead of the whole
    /// filtered corpus.
    pub candidates_from_train: bool,
    pub prompt_budget_tokens: usize,
    pub assigners: Vec<AssignerKind>,
    pub sft: TrainingConfig,
    pub cbr: TrainingConfig,
    pub backend: BackendConfig,
    /// Column sources for `compare`: an assigner name, a report file, or a
    /// published key such as `eclipsejdt/ncgbt`.
    pub subject: Option<String>,
    pub reference: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            project: "project".into(),
            corpus: None,
            format: None,
            max_malformed: None,
            out_dir: PathBuf::from("out"),
            protocol: SplitProtocol::RotatedFold,
            runs: 3,
            seed: DEFAULT_SEED,
            threshold: DEFAULT_THRESHOLD,
            k_max: triage_core::eval::DEFAULT_K_MAX,
            candidates_from_train: false,
            prompt_budget_tokens: triage_core::promptgen::DEFAULT_BUDGET_TOKENS,
            assigners: vec![AssignerKind::Frequency],
            sft: desk_training(),
            cbr: desk_training(),
            backend: BackendConfig::default(),
            subject: None,
            reference: None,
        }
    }
}

/// Values given on the command line; each one replaces the file value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub corpus: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub threshold: Option<usize>,
    pub assigner: Option<String>,
    pub reference: Option<String>,
}

impl RunConfig {
    /// Reads `path` (or starts from defaults), applies `overrides` and the
    /// backend URL environment override, then validates. Relative corpus
    /// and output paths in a file are taken relative to the file.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| BenchError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                let mut c: RunConfig = serde_json::from_str(&text)
                    .map_err(|e| BenchError::Usage(format!("invalid config {}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new(""));
                c.corpus = c.corpus.map(|c| base.join(c));
                c.out_dir = base.join(&c.out_dir);
                c
            }
            None => RunConfig::default(),
        };
        config.apply(overrides)?;
        config.backend = config.backend.with_env_override();
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(v) = &o.corpus {
            self.corpus = Some(v.clone());
        }
        if let Some(v) = &o.out_dir {
            self.out_dir = v.clone();
        }
        if let Some(v) = o.runs {
            self.runs = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.threshold {
            self.threshold = v;
        }
        if let Some(name) = &o.assigner {
            let kind = AssignerKind::parse(name)
                .ok_or_else(|| BenchError::Usage(format!("unknown assigner `{name}`")))?;
            self.assigners = vec![kind];
            self.subject = Some(kind.name().into());
        }
        if let Some(v) = &o.reference {
            self.reference = Some(v.clone());
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BenchError::Usage(m.into()));
        if self.runs == 0 {
            return bad("runs must be at least 1");
        }
        if self.threshold == 0 {
            return bad("threshold must be at least 1");
        }
        if self.k_max == 0 || self.k_max > triage_core::ranker::MAX_RANKING {
            return bad("k_max must lie in 1..=10");
        }
        if self.assigners.is_empty() {
            return bad("no assigner selected");
        }
        if self.project.trim().is_empty() {
            return bad("project name is empty");
        }
        self.sft.validate()?;
        self.cbr.validate()?;
        self.backend.validate()
    }

    /// The corpus path, which must name an existing file.
    pub fn corpus_path(&self) -> Result<&Path> {
        let path = self
            .corpus
            .as_deref()
            .ok_or_else(|| BenchError::Usage("no corpus path given (--corpus or config `corpus`)".into()))?;
        if !path.is_file() {
            return Err(BenchError::Usage(format!("corpus {} does not exist", path.display())));
        }
        Ok(path)
    }

    pub fn input_format(&self) -> Result<InputFormat> {
        Ok(self.format.unwrap_or_else(|| InputFormat::from_path(self.corpus.as_deref().unwrap_or(Path::new("")))))
    }

    pub fn training(&self, kind: AssignerKind) -> &TrainingConfig {
        match kind {
            AssignerKind::Cbr => &self.cbr,
            _ => &self.sft,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!((c.runs, c.seed, c.threshold), (3, 3407, 10));
        assert_eq!(c.backend.max_new_tokens, 256);
        c.validate().unwrap();
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"project":"p","runs":5,"seed":1,"corpus":"c.jsonl"}"#).unwrap();
        let c = RunConfig::load(Some(&path), &Overrides::default()).unwrap();
        assert_eq!((c.runs, c.seed), (5, 1));
        assert_eq!(c.corpus.as_deref(), Some(dir.path().join("c.jsonl").as_path()));
        let o = Overrides {
            runs: Some(2),
            assigner: Some("SFT".into()),
            ..Overrides::default()
        };
        let c = RunConfig::load(Some(&path), &o).unwrap();
        assert_eq!(c.runs, 2);
        assert_eq!(c.assigners, vec![AssignerKind::Sft]);
        let o = Overrides {
            assigner: Some("svm".into()),
            ..Overrides::default()
        };
        assert!(matches!(RunConfig::load(Some(&path), &o), Err(BenchError::Usage(_))));
    }

    #[test]
    fn unknown_keys_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"rnus":5}"#).unwrap();
        assert!(RunConfig::load(Some(&path), &Overrides::default()).is_err());
        std::fs::write(&path, r#"{"runs":0}"#).unwrap();
        assert!(RunConfig::load(Some(&path), &Overrides::default()).is_err());
        assert!(RunConfig::load(Some(Path::new("/nope/run.json")), &Overrides::default()).is_err());
    }

    #[test]
    fn missing_corpus_is_usage() {
        let c = RunConfig::default();
        assert!(matches!(c.corpus_path(), Err(BenchError::Usage(_))));
    }
}

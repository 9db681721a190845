//! Pipeline configuration: a TOML file plus `section.key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analyze::PhraseParams;
use crate::error::{self, Error, Result};
use crate::regress::{self, Learner};
use crate::retrieve::{Bm25Params, KlParams};
use crate::syngen::GenParams;
use crate::workingset::WorkingSetParams;

/// Input files; unset paths default to the workspace's `input/` directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub corpus: Option<PathBuf>,
    pub termdb: Option<PathBuf>,
    pub domains: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub topics: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub phrase_min_count: u32,
    pub dice_threshold: f64,
    pub phrase_max_len: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let p = PhraseParams::default();
        AnalysisConfig {
            phrase_min_count: p.min_count,
            dice_threshold: p.dice_threshold,
            phrase_max_len: p.max_len,
        }
    }
}

impl AnalysisConfig {
    pub fn phrase_params(&self) -> PhraseParams {
        PhraseParams {
            min_count: self.phrase_min_count,
            dice_threshold: self.dice_threshold,
            max_len: self.phrase_max_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub lambda: f64,
    pub k1: f64,
    pub b: f64,
    pub k3: f64,
    pub cutoff: usize,
    /// Restrict retrieval to active working sets.
    pub use_working_sets: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        let kl = KlParams::default();
        let bm = Bm25Params::default();
        RetrievalConfig {
            lambda: kl.lambda,
            k1: bm.k1,
            b: bm.b,
            k3: bm.k3,
            cutoff: 1000,
            use_working_sets: true,
        }
    }
}

impl RetrievalConfig {
    pub fn kl(&self) -> KlParams {
        KlParams { lambda: self.lambda }
    }

    pub fn bm25(&self) -> Bm25Params {
        Bm25Params {
            k1: self.k1,
            b: self.b,
            k3: self.k3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkingSetConfig {
    pub lower: usize,
    pub upper: usize,
    pub cooccur_k: usize,
}

impl Default for WorkingSetConfig {
    fn default() -> Self {
        let p = WorkingSetParams::default();
        WorkingSetConfig {
            lower: p.lower,
            upper: p.upper,
            cooccur_k: p.cooccur_k,
        }
    }
}

impl WorkingSetConfig {
    pub fn params(&self, temporal_filter: bool) -> WorkingSetParams {
        WorkingSetParams {
            lower: self.lower,
            upper: self.upper,
            cooccur_k: self.cooccur_k,
            temporal_filter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Rbf,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub gammas: Vec<f64>,
    pub regs: Vec<f64>,
    pub ridges: Vec<f64>,
    pub folds: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            kind: LearnerKind::Rbf,
            gammas: regress::DEFAULT_GAMMAS.to_vec(),
            regs: regress::DEFAULT_REGS.to_vec(),
            ridges: vec![0.0, 1e-3, 1e-2, 1e-1, 1.0],
            folds: 5,
        }
    }
}

impl LearnerConfig {
    pub fn grid(&self) -> Vec<Learner> {
        match self.kind {
            LearnerKind::Rbf => regress::rbf_grid(&self.gammas, &self.regs),
            LearnerKind::Linear => self.ridges.iter().map(|&ridge| Learner::Linear { ridge }).collect(),
        }
    }

    fn validate(&self, section: &str) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!("{section}.folds must be at least 2")));
        }
        let ok = match self.kind {
            LearnerKind::Rbf => {
                !self.gammas.is_empty()
                    && !self.regs.is_empty()
                    && self.gammas.iter().all(|g| g.is_finite() && *g > 0.0)
                    && self.regs.iter().all(|r| r.is_finite() && *r >= 0.0)
            }
            LearnerKind::Linear => !self.ridges.is_empty() && self.ridges.iter().all(|r| r.is_finite() && *r >= 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{section}: hyperparameter grid must be non-empty with valid values"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub learner: LearnerConfig,
    /// Supplementary training topics drawn from the collection.
    pub validation_size: usize,
    pub min_citations: usize,
    /// Keep only the topic language's lists and concept text.
    pub monolingual: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            learner: LearnerConfig::default(),
            validation_size: 200,
            min_citations: 4,
            monolingual: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RerankConfig {
    pub learner: LearnerConfig,
    pub negatives: usize,
    pub max_rows: usize,
}

impl Default for RerankConfig {
    fn default() -> Self {
        RerankConfig {
            learner: LearnerConfig::default(),
            negatives: 20,
            max_rows: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Worker threads; 0 lets the runtime choose.
    pub threads: usize,
    pub input: InputConfig,
    pub gen: GenParams,
    pub analysis: AnalysisConfig,
    pub retrieval: RetrievalConfig,
    pub workingset: WorkingSetConfig,
    pub fusion: FusionConfig,
    pub rerank: RerankConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 7,
            threads: 0,
            input: InputConfig::default(),
            gen: GenParams::default(),
            analysis: AnalysisConfig::default(),
            retrieval: RetrievalConfig::default(),
            workingset: WorkingSetConfig::default(),
            fusion: FusionConfig::default(),
            rerank: RerankConfig::default(),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// Sets `dotted.key = value` in a TOML table. The value is read as a TOML
/// literal when it parses as one, otherwise as a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key {key:?}")));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {part} is not a section")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl Config {
    /// Parses TOML text, applies overrides in order, then validates.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(config_err)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: Config = table.try_into().map_err(config_err)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => error::read_to_string(p)?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML rendering, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.retrieval.kl().validate()?;
        self.retrieval.bm25().validate()?;
        if self.retrieval.cutoff == 0 {
            return Err(Error::Config("retrieval.cutoff must be at least 1".into()));
        }
        self.workingset.params(false).validate()?;
        let a = &self.analysis;
        if a.phrase_min_count == 0 || !(0.0..=1.0).contains(&a.dice_threshold) || !(2..=3).contains(&a.phrase_max_len) {
            return Err(Error::Config(
                "analysis: phrase_min_count ≥ 1, dice_threshold in [0,1], phrase_max_len 2 or 3".into(),
            ));
        }
        self.fusion.learner.validate("fusion.learner")?;
        self.rerank.learner.validate("rerank.learner")?;
        self.gen.validate()?;
        Ok(())
    }
}

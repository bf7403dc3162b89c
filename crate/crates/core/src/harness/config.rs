use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{CsvFormat, PeriodSplit, SyntheticParams, DEFAULT_LAG_WINDOW};
use crate::ensemble::DEFAULT_FOLDS;
use crate::error::{Error, Result};
use crate::learners::LearnerConfig;
use crate::select::{VimConfig, DEFAULT_PER_TYPE};

/// How the rows of the training period are assigned to folds. The shuffle
/// seed is derived per basin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldSchemeKind {
    #[default]
    Contiguous,
    Shuffled,
}

impl std::str::FromStr for FoldSchemeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contiguous" => Ok(Self::Contiguous),
            "shuffled" => Ok(Self::Shuffled),
            _ => Err(Error::Config(format!("unknown fold scheme `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Manifest {
    /// Basin CSV files; the basin id is the file stem.
    Files {
        paths: Vec<PathBuf>,
        #[serde(default)]
        format: CsvFormat,
    },
    /// Generated basins with seeds `first_seed, first_seed + 1, ...`.
    Synthetic {
        n_basins: usize,
        n_days: usize,
        #[serde(default)]
        first_seed: u64,
        #[serde(default)]
        params: SyntheticParams,
    },
}

impl Manifest {
    pub fn len(&self) -> usize {
        match self {
            Manifest::Files { paths, .. } => paths.len(),
            Manifest::Synthetic { n_basins, .. } => *n_basins,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub split: PeriodSplit,
    pub lag_window: usize,
    pub per_type: usize,
    pub folds: usize,
    pub fold_scheme: FoldSchemeKind,
    pub master_seed: u64,
    pub clip_negative: bool,
    pub store_forecasts: bool,
    pub importance: VimConfig,
    /// The seed inside is replaced by each basin's derived seed.
    pub learners: LearnerConfig,
    pub manifest: Manifest,
    /// Excluded from serialized output so exports do not depend on where
    /// they were written.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; execution detail, never serialized.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            split: PeriodSplit::camels_default(),
            lag_window: DEFAULT_LAG_WINDOW,
            per_type: DEFAULT_PER_TYPE,
            folds: DEFAULT_FOLDS,
            fold_scheme: FoldSchemeKind::Contiguous,
            master_seed: 0,
            clip_negative: false,
            store_forecasts: false,
            importance: VimConfig::default(),
            learners: LearnerConfig::default(),
            manifest: Manifest::Files {
                paths: Vec::new(),
                format: CsvFormat::default(),
            },
            output_dir: None,
            workers: 1,
        }
    }
}

impl ExperimentConfig {
    /// Reads a JSON or TOML document, chosen by file extension.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text),
            _ => Self::from_json(&text),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON config: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid TOML config: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        if self.lag_window == 0 {
            return Err(Error::Config("lag_window must be positive".into()));
        }
        if self.per_type == 0 {
            return Err(Error::Config("per_type must be positive".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        if self.folds > self.split.train.len_days() {
            return Err(Error::Config(format!(
                "{} folds exceed the {} training days",
                self.folds,
                self.split.train.len_days()
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        self.importance.validate()?;
        self.learners.validate()?;
        match &self.manifest {
            Manifest::Files { paths, .. } => {
                if paths.is_empty() {
                    return Err(Error::Config("manifest lists no basin files".into()));
                }
                let mut seen = BTreeSet::new();
                for p in paths {
                    let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                    if id.is_empty() || !seen.insert(id.to_string()) {
                        return Err(Error::Config(format!(
                            "missing or duplicate basin id for {}",
                            p.display()
                        )));
                    }
                }
            }
            Manifest::Synthetic {
                n_basins,
                n_days,
                params,
                ..
            } => {
                if *n_basins == 0 || *n_days == 0 {
                    return Err(Error::Config("synthetic manifest needs basins and days".into()));
                }
                params.validate()?;
            }
        }
        Ok(())
    }
}

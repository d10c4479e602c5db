use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::TreeSpec;

pub const DEFAULT_K: usize = 8;

/// How a fresh [`RecycleMatrix`](crate::matrix::RecycleMatrix) is filled.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitStrategy {
    Zero,
    Random { seed: u64 },
    Hot { path: PathBuf },
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitStrategy::Zero => f.write_str("zero"),
            InitStrategy::Random { seed } => write!(f, "random:{seed}"),
            InitStrategy::Hot { path } => write!(f, "hot:{}", path.display()),
        }
    }
}

impl FromStr for InitStrategy {
    type Err = Error;

    /// Accepts `zero`, `random`, `random:SEED` and `hot:PATH`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(InitStrategy::Zero),
            "random" => Ok(InitStrategy::Random { seed: 0 }),
            _ => {
                if let Some(seed) = s.strip_prefix("random:") {
                    let seed = seed
                        .parse()
                        .map_err(|_| Error::Config(format!("bad random seed in {s:?}")))?;
                    Ok(InitStrategy::Random { seed })
                } else if let Some(path) = s.strip_prefix("hot:") {
                    if path.is_empty() {
                        return Err(Error::Config("hot init needs a path: hot:PATH".into()));
                    }
                    Ok(InitStrategy::Hot { path: path.into() })
                } else {
                    Err(Error::Config(format!(
                        "unknown init strategy {s:?} (expected zero, random[:SEED] or hot:PATH)"
                    )))
                }
            }
        }
    }
}

/// Which occurrence wins when a token appears several times in one merged
/// sequence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateStrategy {
    /// Write every (token, candidates) pair in sequence order.
    #[default]
    Sequential,
    First,
    Last,
}

impl fmt::Display for UpdateStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateStrategy::Sequential => "sequential",
            UpdateStrategy::First => "first",
            UpdateStrategy::Last => "last",
        })
    }
}

impl FromStr for UpdateStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(UpdateStrategy::Sequential),
            "first" => Ok(UpdateStrategy::First),
            "last" => Ok(UpdateStrategy::Last),
            _ => Err(Error::Config(format!(
                "unknown update strategy {s:?} (expected sequential, first or last)"
            ))),
        }
    }
}

/// Which rows are refreshed after each verification.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateScope {
    AcceptedOnly,
    #[default]
    AllDraft,
}

impl fmt::Display for UpdateScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateScope::AcceptedOnly => "accepted",
            UpdateScope::AllDraft => "all",
        })
    }
}

impl FromStr for UpdateScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accepted" | "accepted_only" => Ok(UpdateScope::AcceptedOnly),
            "all" | "all_draft" => Ok(UpdateScope::AllDraft),
            _ => Err(Error::Config(format!(
                "unknown update scope {s:?} (expected accepted or all)"
            ))),
        }
    }
}

/// Prompt-lookup baseline settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PldConfig {
    /// Longest suffix tried when searching for an earlier occurrence.
    pub max_ngram: usize,
    /// Shortest suffix tried before giving up.
    pub min_ngram: usize,
    /// Number of tokens copied after the match.
    pub draft_len: usize,
}

impl Default for PldConfig {
    fn default() -> Self {
        Self {
            max_ngram: 3,
            min_ngram: 1,
            draft_len: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeConfig {
    pub k: usize,
    pub tree: TreeSpec,
    /// Zero means greedy decoding.
    pub temperature: f64,
    pub rng_seed: u64,
    pub init: InitStrategy,
    pub update_strategy: UpdateStrategy,
    pub update_scope: UpdateScope,
    pub max_new_tokens: usize,
    pub pld: PldConfig,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            tree: TreeSpec::default_tree(),
            temperature: 0.0,
            rng_seed: 0,
            init: InitStrategy::Zero,
            update_strategy: UpdateStrategy::Sequential,
            update_scope: UpdateScope::AllDraft,
            max_new_tokens: 128,
            pld: PldConfig::default(),
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "temperature must be finite and >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_new_tokens == 0 {
            return Err(Error::Config("max_new_tokens must be >= 1".into()));
        }
        if self.pld.min_ngram == 0 || self.pld.min_ngram > self.pld.max_ngram {
            return Err(Error::Config(format!(
                "prompt lookup ngram range {}..={} is empty",
                self.pld.min_ngram, self.pld.max_ngram
            )));
        }
        self.tree.check_ranks(self.k)
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, DEFAULT_SEED};

/// How two cardinalities (or their surrogates) are compared inside the regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    /// `a - b`
    Difference,
    /// `(a - b) / max(a, b)`, bounded in `[-1, 1]`
    Jaccard,
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::Difference => "difference",
            DistanceKind::Jaccard => "jaccard",
        })
    }
}

impl FromStr for DistanceKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "difference" => Ok(DistanceKind::Difference),
            "jaccard" => Ok(DistanceKind::Jaccard),
            other => Err(format!("unknown distance `{other}` (expected difference or jaccard)")),
        }
    }
}

/// Space in which the estimator's outputs enter the regularizer's distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegSpace {
    RawCardinality,
    NormalizedLog,
}

impl fmt::Display for RegSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegSpace::RawCardinality => "raw-cardinality",
            RegSpace::NormalizedLog => "normalized-log",
        })
    }
}

impl FromStr for RegSpace {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "raw-cardinality" | "raw" => Ok(RegSpace::RawCardinality),
            "normalized-log" | "log" => Ok(RegSpace::NormalizedLog),
            other => Err(format!(
                "unknown regularization space `{other}` (expected raw-cardinality or normalized-log)"
            )),
        }
    }
}

/// Number of light-workload pairs the regularizer sees per training batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegPairs {
    All,
    Sample(usize),
}

impl fmt::Display for RegPairs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegPairs::All => f.write_str("all"),
            RegPairs::Sample(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for RegPairs {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "all" {
            return Ok(RegPairs::All);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(RegPairs::Sample(n)),
            _ => Err(format!("expected `all` or a positive integer, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lambda: f64,
    pub distance: DistanceKind,
    /// Sharpness of the softened sign.
    pub c: f64,
    pub reg_space: RegSpace,
    pub hidden_units: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub reg_pairs_per_batch: RegPairs,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lambda: 0.1,
            distance: DistanceKind::Jaccard,
            c: 1e4,
            reg_space: RegSpace::NormalizedLog,
            hidden_units: 256,
            epochs: 50,
            batch_size: 1024,
            learning_rate: 1e-3,
            seed: DEFAULT_SEED,
            reg_pairs_per_batch: RegPairs::All,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Argument(m));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be a finite value >= 0, got {}", self.lambda));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return fail(format!("c must be positive, got {}", self.c));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.hidden_units == 0 || self.epochs == 0 || self.batch_size == 0 {
            return fail("hidden units, epochs and batch size must be positive".into());
        }
        if self.reg_pairs_per_batch == RegPairs::Sample(0) {
            return fail("reg_pairs_per_batch must be positive".into());
        }
        Ok(())
    }
}

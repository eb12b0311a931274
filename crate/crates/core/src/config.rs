//! Run configuration. A TOML file may carry any field; command-line flags
//! override it.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backtranslate::{BtPolicy, DEFAULT_PIVOT};
use crate::banc::DEFAULT_SEPARATOR;
use crate::dataset::{Augmentations, Task, FRACTION_GRID};
use crate::error::{Error, Result};
use crate::export::ExportFormat;
use crate::split::SplitRatios;

/// Where backtranslations come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSpec {
    Identity,
    /// JSON endpoint configured through environment variables.
    Http,
    /// Replay log file or directory.
    Recorded(PathBuf),
}

impl FromStr for ProviderSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "identity" => Ok(ProviderSpec::Identity),
            "http" => Ok(ProviderSpec::Http),
            _ => match s.strip_prefix("recorded:") {
                Some(path) if !path.is_empty() => Ok(ProviderSpec::Recorded(PathBuf::from(path))),
                _ => Err(format!(
                    "unknown provider `{s}` (expected identity, http or recorded:<path>)"
                )),
            },
        }
    }
}

impl fmt::Display for ProviderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderSpec::Identity => f.write_str("identity"),
            ProviderSpec::Http => f.write_str("http"),
            ProviderSpec::Recorded(p) => write!(f, "recorded:{}", p.display()),
        }
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(
                &self,
                s: S,
            ) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(
                d: D,
            ) -> std::result::Result<Self, D::Error> {
                String::deserialize(d)?
                    .parse()
                    .map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(ProviderSpec);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub alias_map: Option<PathBuf>,
    pub task: Task,
    #[serde(with = "aug_string")]
    pub aug: Augmentations,
    pub fraction: u32,
    pub bt_policy: Option<BtPolicy>,
    pub bt_provider: ProviderSpec,
    pub pivot: String,
    pub bt_cache_dir: Option<PathBuf>,
    pub bt_fail_threshold: f64,
    pub bt_max_in_flight: usize,
    pub k: usize,
    pub ratios: SplitRatios,
    pub seed: u64,
    /// Build only this fold; all folds when unset.
    pub fold: Option<usize>,
    pub out: PathBuf,
    /// Restrict target-aware contexts to these targets.
    pub targets: Option<Vec<String>>,
    pub balance_targets: Option<Vec<String>>,
    pub balance_tolerance: f64,
    pub dedup: bool,
    pub separator: String,
    pub format: ExportFormat,
    pub threads: Option<usize>,
}

mod aug_string {
    use super::Augmentations;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(a: &Augmentations, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(a)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Augmentations, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: PathBuf::from("corpus"),
            alias_map: None,
            task: Task::InfOth,
            aug: Augmentations::NONE,
            fraction: 0,
            bt_policy: None,
            bt_provider: ProviderSpec::Http,
            pivot: DEFAULT_PIVOT.to_owned(),
            bt_cache_dir: None,
            bt_fail_threshold: 0.0,
            bt_max_in_flight: 4,
            k: 10,
            ratios: SplitRatios::default(),
            seed: 0,
            fold: None,
            out: PathBuf::from("out"),
            targets: None,
            balance_targets: None,
            balance_tolerance: 0.1,
            dedup: false,
            separator: DEFAULT_SEPARATOR.to_owned(),
            format: ExportFormat::Lines,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if !FRACTION_GRID.contains(&self.fraction) {
            return Err(Error::InvalidFraction(self.fraction));
        }
        if self.k < 2 {
            return Err(Error::Config(format!(
                "k must be at least 2, got {}",
                self.k
            )));
        }
        SplitRatios::new(self.ratios.train, self.ratios.val, self.ratios.test)?;
        if let Some(fold) = self.fold {
            if fold >= self.k {
                return Err(Error::FoldOutOfRange { fold, k: self.k });
            }
        }
        for (name, v) in [
            ("bt_fail_threshold", self.bt_fail_threshold),
            ("balance_tolerance", self.balance_tolerance),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!(
                    "{name} must be within [0, 1], got {v}"
                )));
            }
        }
        if self.bt_max_in_flight == 0 || self.threads == Some(0) {
            return Err(Error::Config(
                "thread and in-flight counts must be positive".into(),
            ));
        }
        if self.pivot.trim().is_empty() || self.pivot.eq_ignore_ascii_case("en") {
            return Err(Error::Config(format!(
                "invalid pivot language `{}`",
                self.pivot
            )));
        }
        if matches!(&self.balance_targets, Some(t) if t.is_empty()) {
            return Err(Error::Config("balance target list is empty".into()));
        }
        Ok(())
    }

    /// The configuration as recorded in manifests: everything that shapes
    /// the output, without output location, cache location or thread count.
    pub fn manifest_flags(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            for key in ["out", "threads", "bt_cache_dir", "bt_max_in_flight"] {
                map.remove(key);
            }
        }
        v
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::check::CheckConfig;
use crate::error::{Error, Result};
use crate::manifest::Strategy;
use crate::occluder::BankKind;
use crate::overlay::StrategyConfig;

/// One directory of candidate clips. Clips from a `driving` source draw
/// occluders from the driving bank; everything else uses the generic bank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub path: PathBuf,
    #[serde(default = "generic")]
    pub domain: BankKind,
}

fn generic() -> BankKind {
    BankKind::Generic
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankDirs {
    pub generic: Option<PathBuf>,
    pub driving: Option<PathBuf>,
}

impl BankDirs {
    pub fn get(&self, kind: BankKind) -> Option<&Path> {
        match kind {
            BankKind::Generic => self.generic.as_deref(),
            BankKind::Driving => self.driving.as_deref(),
        }
    }
}

/// Optional overrides on top of the strategy's defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlayOverrides {
    pub rate_range: Option<(f64, f64)>,
    pub feather_radius: Option<u32>,
    pub placement_budget: Option<u32>,
    pub scale_range: Option<(f64, f64)>,
}

/// Batch pipeline settings, normally read from TOML:
///
/// ```toml
/// root_seed = 7
/// strategy = "hard"
/// output_dir = "out"
/// shard_size = 256
/// worker_count = 8
///
/// [[sources]]
/// path = "clips/objects"
///
/// [[sources]]
/// path = "clips/streets"
/// domain = "driving"
///
/// [banks]
/// generic = "occluders/generic"
/// driving = "occluders/driving"
///
/// [check]
/// boundary_margin = 2
///
/// [overlay]
/// feather_radius = 3
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub root_seed: u64,
    pub strategy: Strategy,
    #[serde(default)]
    pub sources: Vec<SourceConfig>,
    #[serde(default)]
    pub banks: BankDirs,
    #[serde(default)]
    pub check: CheckConfig,
    #[serde(default)]
    pub overlay: OverlayOverrides,
    #[serde(default = "default_shard_size")]
    pub shard_size: usize,
    /// 0 means one worker per available core.
    #[serde(default)]
    pub worker_count: usize,
    pub output_dir: PathBuf,
}

fn default_shard_size() -> usize {
    256
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| e.at(path))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for s in &mut self.sources {
            fix(&mut s.path);
        }
        if let Some(p) = &mut self.banks.generic {
            fix(p);
        }
        if let Some(p) = &mut self.banks.driving {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    pub fn strategy_config(&self) -> StrategyConfig {
        let mut s = StrategyConfig::for_strategy(self.strategy);
        let o = &self.overlay;
        if let Some(v) = o.rate_range {
            s.rate_range = v;
        }
        if let Some(v) = o.feather_radius {
            s.feather_radius = v;
        }
        if let Some(v) = o.placement_budget {
            s.placement_budget = v;
        }
        if let Some(v) = o.scale_range {
            s.scale_range = v;
        }
        s
    }

    /// Checks parameters and that every referenced directory exists.
    pub fn validate(&self) -> Result<()> {
        if self.shard_size == 0 {
            return Err(Error::Config("shard_size must be >= 1".into()));
        }
        self.check.validate()?;
        self.strategy_config()
            .validate()
            .map_err(|e| Error::Config(format!("overlay: {e}")))?;
        for s in &self.sources {
            if !s.path.is_dir() {
                return Err(Error::Config(format!("source {} is not a directory", s.path.display())));
            }
            match self.banks.get(s.domain) {
                Some(dir) if dir.is_dir() => {}
                Some(dir) => {
                    return Err(Error::Config(format!(
                        "{} bank {} is not a directory",
                        s.domain.as_str(),
                        dir.display()
                    )))
                }
                None => {
                    return Err(Error::Config(format!(
                        "source {} needs a {} occluder bank",
                        s.path.display(),
                        s.domain.as_str()
                    )))
                }
            }
        }
        Ok(())
    }

    /// Everything that influences outputs. Worker count and output location
    /// are left out so manifests do not depend on them.
    pub fn embedded(&self) -> serde_json::Value {
        serde_json::json!({
            "root_seed": self.root_seed,
            "strategy": self.strategy,
            "sources": self.sources,
            "banks": self.banks,
            "check": self.check,
            "overlay": self.strategy_config(),
            "shard_size": self.shard_size,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_applies_overrides() {
        let cfg = PipelineConfig::from_toml(
            r#"
root_seed = 9
strategy = "hard"
output_dir = "out"
[[sources]]
path = "a"
[[sources]]
path = "b"
domain = "driving"
[check]
boundary_margin = 4
[overlay]
feather_radius = 5
"#,
        )
        .unwrap();
        assert_eq!(cfg.sources[0].domain, BankKind::Generic);
        assert_eq!(cfg.sources[1].domain, BankKind::Driving);
        assert_eq!(cfg.check.boundary_margin, 4);
        assert_eq!(cfg.check.max_hole_count, 3);
        let s = cfg.strategy_config();
        assert_eq!(s.feather_radius, 5);
        assert_eq!(s.rate_range, (0.4, 0.8));
        assert_eq!(cfg.shard_size, 256);
    }

    #[test]
    fn bad_configs_are_config_errors() {
        assert!(PipelineConfig::from_toml("root_seed = 1").unwrap_err().is_config());
        assert!(PipelineConfig::from_toml("root_seed = 1\nstrategy = \"medium\"\noutput_dir = \"o\"")
            .unwrap_err()
            .is_config());
        let mut cfg = PipelineConfig::from_toml("root_seed = 1\nstrategy = \"easy\"\noutput_dir = \"o\"").unwrap();
        cfg.shard_size = 0;
        assert!(cfg.validate().unwrap_err().is_config());
        cfg.shard_size = 1;
        cfg.sources.push(SourceConfig {
            path: "/definitely/not/here".into(),
            domain: BankKind::Generic,
        });
        assert!(cfg.validate().unwrap_err().is_config());
    }

    #[test]
    fn embedded_config_ignores_workers_and_output() {
        let mut a = PipelineConfig::from_toml("root_seed = 1\nstrategy = \"easy\"\noutput_dir = \"o\"").unwrap();
        let e1 = a.embedded();
        a.worker_count = 8;
        a.output_dir = "elsewhere".into();
        assert_eq!(a.embedded(), e1);
    }
}

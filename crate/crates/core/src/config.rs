//! Pipeline configuration read from TOML.
//!
//! ```toml
//! method = "watershed"
//! thresholds = "optimize"        # or "0.5,0.4,0.3"
//! budget = 250
//! seed = 7
//! window = 256
//! stride = 64
//! buffer_px = 1
//! min_field_size = 0
//! extent_strategy = "auto"       # "auto", "joint", "mcc" or a number
//!
//! [paths]
//! masks = "masks.bin"
//! reference = "reference.bin"
//! output = "out"
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::extract::{Method, ThresholdSet};
use crate::fusion::{DEFAULT_STRIDE, DEFAULT_WINDOW};
use crate::raster::Connectivity;
use crate::threshold::{ExtentStrategy, DEFAULT_RANDOM_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ThresholdChoice {
    #[default]
    Optimize,
    Fixed(ThresholdSet),
}

impl FromStr for ThresholdChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "optimize" {
            Ok(ThresholdChoice::Optimize)
        } else {
            Ok(ThresholdChoice::Fixed(s.parse()?))
        }
    }
}

impl Serialize for ThresholdChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ThresholdChoice::Optimize => s.serialize_str("optimize"),
            ThresholdChoice::Fixed(t) => {
                s.serialize_str(&format!("{},{},{}", t.t_extent, t.t_boundary, t.t_distance))
            }
        }
    }
}

impl<'de> Deserialize<'de> for ThresholdChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Extent handling during the search, as written in config files; `None`
/// ("auto") picks the method's default.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExtentSetting(pub Option<ExtentStrategy>);

impl ExtentSetting {
    pub fn resolve(self, method: Method) -> ExtentStrategy {
        self.0.unwrap_or(ExtentStrategy::default_for(method))
    }
}

impl FromStr for ExtentSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Self(None)),
            "joint" => Ok(Self(Some(ExtentStrategy::Joint))),
            "mcc" => Ok(Self(Some(ExtentStrategy::Mcc))),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|t| (0.0..=1.0).contains(t))
                .map(|t| Self(Some(ExtentStrategy::Fixed(t))))
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "extent strategy must be auto, joint, mcc or a number in [0, 1], got {other:?}"
                    ))
                }),
        }
    }
}

impl Serialize for ExtentSetting {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            None => s.serialize_str("auto"),
            Some(ExtentStrategy::Joint) => s.serialize_str("joint"),
            Some(ExtentStrategy::Mcc) => s.serialize_str("mcc"),
            Some(ExtentStrategy::Fixed(t)) => s.serialize_f64(t),
        }
    }
}

impl<'de> Deserialize<'de> for ExtentSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(t) => t.to_string().parse(),
            Raw::Str(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub masks: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub image: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub method: Method,
    pub thresholds: ThresholdChoice,
    pub budget: usize,
    pub seed: u64,
    pub window: usize,
    pub stride: usize,
    pub buffer_px: usize,
    pub min_field_size: usize,
    pub connectivity: Connectivity,
    pub extent_strategy: ExtentSetting,
    pub paths: Paths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            method: Method::default(),
            thresholds: ThresholdChoice::default(),
            budget: DEFAULT_RANDOM_BUDGET,
            seed: 0,
            window: DEFAULT_WINDOW,
            stride: DEFAULT_STRIDE,
            buffer_px: 1,
            min_field_size: 0,
            connectivity: Connectivity::default(),
            extent_strategy: ExtentSetting::default(),
            paths: Paths::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|msg| Error::format(path, msg))
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidArgument("budget must be >= 1".into()));
        }
        if self.window == 0 || self.stride == 0 || self.stride > self.window {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= stride <= window, got stride {} window {}",
                self.stride, self.window
            )));
        }
        if self.buffer_px == 0 {
            return Err(Error::InvalidArgument("buffer_px must be >= 1".into()));
        }
        Ok(())
    }
}

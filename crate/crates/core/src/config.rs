//! Pipeline configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::compose::{ComposeTolerance, CompositionTemplate, TemplateRegistry};
use crate::encoding::{build_anchors, default_levels, AnchorGrid, AnchorLevel, DecodeConfig, EncodeConfig, LossConfig};
use crate::error::{Error, Result};
use crate::eval::MatchConfig;
use crate::geometry::{OrientationBins, DEFAULT_BINS};
use crate::refdetect::DetectParams;
use crate::scenegen::SceneConfig;

pub const CONFIG_VERSION: u32 = 1;

fn default_bins() -> usize {
    DEFAULT_BINS
}

/// Every tunable of the pipeline. Only `version` is required; relative
/// paths are resolved against the directory of the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    /// Catalog JSON; the built-in catalog when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    /// Template files registered after the built-in ones.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub templates: Vec<PathBuf>,
    #[serde(default = "default_levels")]
    pub anchor_levels: Vec<AnchorLevel>,
    #[serde(default = "default_bins")]
    pub orientation_bins: usize,
    #[serde(default)]
    pub encode: EncodeConfig,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub decode: DecodeConfig,
    #[serde(default)]
    pub detect: DetectParams,
    #[serde(default, rename = "match")]
    pub matching: MatchConfig,
    #[serde(default)]
    pub compose: ComposeTolerance,
    /// Also fixes the image size used for anchors and benchmarks.
    #[serde(default)]
    pub scene: SceneConfig,
    #[serde(default)]
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            version: CONFIG_VERSION,
            catalog: None,
            templates: Vec::new(),
            anchor_levels: default_levels(),
            orientation_bins: DEFAULT_BINS,
            encode: EncodeConfig::default(),
            loss: LossConfig::default(),
            decode: DecodeConfig::default(),
            detect: DetectParams::default(),
            matching: MatchConfig::default(),
            compose: ComposeTolerance::default(),
            scene: SceneConfig::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Parses and validates; the catalog named by the file is loaded to
    /// check the parameters that depend on it.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(c) = &mut cfg.catalog {
            if c.is_relative() {
                *c = base.join(&*c);
            }
        }
        for t in &mut cfg.templates {
            if t.is_relative() {
                *t = base.join(&*t);
            }
        }
        let catalog = cfg.load_catalog()?;
        cfg.validate(&catalog)?;
        Ok(cfg)
    }

    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::invalid(
                "version",
                format!("unsupported config version {}, expected {CONFIG_VERSION}", self.version),
            ));
        }
        OrientationBins::new(self.orientation_bins)?;
        self.anchor_grid()?;
        self.encode.validate()?;
        self.loss.validate()?;
        self.decode.validate()?;
        self.detect.validate(catalog)?;
        self.matching.validate()?;
        self.compose.validate()?;
        self.scene.validate()
    }

    pub fn load_catalog(&self) -> Result<Catalog> {
        match &self.catalog {
            Some(p) => Catalog::load(p),
            None => Ok(Catalog::default()),
        }
    }

    pub fn load_registry(&self, catalog: &Catalog) -> Result<TemplateRegistry> {
        let mut reg = TemplateRegistry::builtin(catalog)?;
        for p in &self.templates {
            reg.register(CompositionTemplate::load(p)?, catalog)?;
        }
        Ok(reg)
    }

    pub fn image_size(&self) -> [u32; 2] {
        self.scene.image_size
    }

    pub fn bins(&self) -> Result<OrientationBins> {
        OrientationBins::new(self.orientation_bins)
    }

    pub fn anchor_grid(&self) -> Result<AnchorGrid> {
        build_anchors(self.image_size(), &self.anchor_levels)
    }
}

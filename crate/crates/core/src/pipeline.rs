//! Color and texture branches and their intersection.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{cluster_segment, ClusterSpec};
use crate::colorcls::{classify_image_color, ColorModel};
use crate::imaging::{mask_and, BinaryMask, ImageRgb};
use crate::superpixel::SlicParams;
use crate::texture::{classify_image_texture, TextureModel};
use crate::{Error, Result};

/// Complete trained detector state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowfireModel {
    pub slic: SlicParams,
    pub color: ColorModel,
    pub texture: TextureModel,
}

impl BowfireModel {
    pub fn validate(&self) -> Result<()> {
        self.slic.validate()?;
        self.color.validate()?;
        self.texture.validate()
    }

    pub fn with_ksp(&self, k_sp: usize) -> Self {
        Self {
            slic: self.slic.with_ksp(k_sp),
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectionMode {
    ColorOnly,
    TextureOnly,
    Fused,
}

impl DetectionMode {
    pub const ALL: [DetectionMode; 3] = [Self::ColorOnly, Self::TextureOnly, Self::Fused];
}

/// Runs the branch(es) selected by `mode`.
pub fn detect(model: &BowfireModel, img: &ImageRgb, mode: DetectionMode) -> Result<BinaryMask> {
    match mode {
        DetectionMode::ColorOnly => Ok(classify_image_color(&model.color, img)),
        DetectionMode::TextureOnly => classify_image_texture(&model.texture, img, &model.slic),
        DetectionMode::Fused => {
            let (color, texture) = rayon::join(
                || classify_image_color(&model.color, img),
                || classify_image_texture(&model.texture, img, &model.slic),
            );
            mask_and(&color, &texture?)
        }
    }
}

/// Every method the evaluation harness can score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Bowfire(DetectionMode),
    RossiCluster,
    RudzCluster,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Bowfire(DetectionMode::Fused),
        Method::Bowfire(DetectionMode::ColorOnly),
        Method::Bowfire(DetectionMode::TextureOnly),
        Method::RossiCluster,
        Method::RudzCluster,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bowfire(DetectionMode::Fused) => "fused",
            Method::Bowfire(DetectionMode::ColorOnly) => "color-only",
            Method::Bowfire(DetectionMode::TextureOnly) => "texture-only",
            Method::RossiCluster => "rossi-cluster",
            Method::RudzCluster => "rudz-cluster",
        }
    }

    /// Human-readable label for reports.
    pub fn description(self) -> &'static str {
        match self {
            Method::Bowfire(DetectionMode::Fused) => "color AND texture",
            Method::Bowfire(DetectionMode::ColorOnly) => "color classification",
            Method::Bowfire(DetectionMode::TextureOnly) => "texture classification",
            Method::RossiCluster => "Rossi V-channel clustering (clustering step only)",
            Method::RudzCluster => "Rudz Cb-channel clustering (clustering step only)",
        }
    }

    /// Baselines report no fire on images with too few distinct channel
    /// values to cluster.
    pub fn run(self, model: &BowfireModel, img: &ImageRgb) -> Result<BinaryMask> {
        let spec = match self {
            Method::Bowfire(mode) => return detect(model, img, mode),
            Method::RossiCluster => ClusterSpec::rossi(),
            Method::RudzCluster => ClusterSpec::rudz(),
        };
        match cluster_segment(img, &spec) {
            Err(Error::DegenerateInput(msg)) => {
                log::warn!("{}: {msg}; no fire reported", self.name());
                Ok(BinaryMask::filled(img.width(), img.height(), false))
            }
            other => other,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidParameter(format!(
                    "unknown method {s:?}, expected one of {}",
                    names.join("|")
                ))
            })
    }
}

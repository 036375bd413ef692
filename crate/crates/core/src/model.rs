//! Training from labeled patches and the JSON model file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::colorcls::{train_color, LabeledPixelSet};
use crate::config::Config;
use crate::imaging::ImageRgb;
use crate::pipeline::BowfireModel;
use crate::superpixel::SlicParams;
use crate::texture::{LbpHistogram, TextureModel};
use crate::{Class, Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Trains both branches. Every patch pixel is a color sample carrying the
/// patch label; every patch contributes one texture vector. Fire patches
/// come first in the texture training order.
pub fn train(fire: &[ImageRgb], not_fire: &[ImageRgb], config: &Config) -> Result<BowfireModel> {
    config.validate()?;
    if fire.is_empty() || not_fire.is_empty() {
        return Err(Error::Training(format!(
            "need patches of both classes, got {} fire and {} not-fire",
            fire.len(),
            not_fire.len()
        )));
    }
    let labeled = || {
        fire.iter()
            .map(|p| (p, Class::Fire))
            .chain(not_fire.iter().map(|p| (p, Class::NotFire)))
    };

    let mut pixels = LabeledPixelSet::new();
    for (patch, class) in labeled() {
        pixels.push_image(patch, class);
    }
    let color = train_color(&pixels, config.bins)?;

    let vectors = labeled()
        .map(|(patch, class)| (LbpHistogram::of_image(patch), class))
        .collect();
    let texture = TextureModel::new(vectors, config.k)?;

    Ok(BowfireModel {
        slic: config.slic(),
        color,
        texture,
    })
}

/// On-disk model: a versioned JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub slic: SlicParams,
    pub color: crate::colorcls::ColorModel,
    pub texture: TextureModel,
}

impl From<BowfireModel> for ModelFile {
    fn from(m: BowfireModel) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            slic: m.slic,
            color: m.color,
            texture: m.texture,
        }
    }
}

impl ModelFile {
    pub fn into_model(self) -> BowfireModel {
        BowfireModel {
            slic: self.slic,
            color: self.color,
            texture: self.texture,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format_version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported format_version {} (this build reads {FORMAT_VERSION})",
                header.format_version
            )));
        }
        let file: ModelFile = serde_json::from_str(text)?;
        file.slic.validate()?;
        file.color.validate()?;
        file.texture.validate()?;
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

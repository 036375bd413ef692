//! On-disk corpora: evaluation datasets (images + optional masks) and
//! training patch directories.
//!
//! Masks pair with images by filename stem, ignoring the extension.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::eval::{DatasetTag, Sample};
use crate::imaging::{BinaryMask, ImageRgb};
use crate::{Error, Result};

const IMAGE_EXTENSIONS: [&str; 6] = ["png", "ppm", "pnm", "pgm", "jpg", "jpeg"];

/// Patch side length of the training corpus.
pub const PATCH_SIZE: usize = 50;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Image files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let supported = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if supported && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[derive(Clone, Debug)]
pub struct DatasetLayout {
    pub images_dir: PathBuf,
    pub masks_dir: Option<PathBuf>,
    pub tag: DatasetTag,
}

/// An image file with its ground-truth mask file, if any.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileSample {
    pub image: PathBuf,
    pub mask: Option<PathBuf>,
}

impl Sample for FileSample {
    fn name(&self) -> String {
        self.image.display().to_string()
    }

    /// Without a mask file the truth is all-negative.
    fn load(&self) -> Result<(ImageRgb, BinaryMask)> {
        let img = ImageRgb::open(&self.image)?;
        let truth = match &self.mask {
            Some(m) => {
                let truth = BinaryMask::open(m)?;
                if truth.dims() != img.dims() {
                    return Err(Error::Dataset {
                        path: m.clone(),
                        message: format!(
                            "mask is {}x{} but {} is {}x{}",
                            truth.width(),
                            truth.height(),
                            self.image.display(),
                            img.width(),
                            img.height()
                        ),
                    });
                }
                truth
            }
            None => BinaryMask::filled(img.width(), img.height(), false),
        };
        Ok((img, truth))
    }
}

impl DatasetLayout {
    /// Pairs images with masks. Fire-tagged datasets require a mask for
    /// every image.
    pub fn samples(&self) -> Result<Vec<FileSample>> {
        let images = list_images(&self.images_dir)?;
        let masks: HashMap<String, PathBuf> = match &self.masks_dir {
            Some(dir) => list_images(dir)?
                .into_iter()
                .map(|p| (stem(&p), p))
                .collect(),
            None => HashMap::new(),
        };
        images
            .into_iter()
            .map(|image| {
                let mask = masks.get(&stem(&image)).cloned();
                if mask.is_none() && self.tag == DatasetTag::Fire {
                    return Err(Error::Dataset {
                        path: image,
                        message: "fire image has no ground-truth mask".into(),
                    });
                }
                Ok(FileSample { image, mask })
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct TrainingLayout {
    pub fire_dir: PathBuf,
    pub not_fire_dir: PathBuf,
    /// Required (width, height) of every patch; `None` accepts any size.
    pub patch_size: Option<(usize, usize)>,
}

impl TrainingLayout {
    pub fn new(fire_dir: impl Into<PathBuf>, not_fire_dir: impl Into<PathBuf>) -> Self {
        Self {
            fire_dir: fire_dir.into(),
            not_fire_dir: not_fire_dir.into(),
            patch_size: Some((PATCH_SIZE, PATCH_SIZE)),
        }
    }

    fn load_dir(&self, dir: &Path) -> Result<Vec<ImageRgb>> {
        let files = list_images(dir)?;
        if files.is_empty() {
            return Err(Error::Dataset {
                path: dir.to_path_buf(),
                message: "no training patches found".into(),
            });
        }
        files
            .iter()
            .map(|f| {
                let img = ImageRgb::open(f)?;
                match self.patch_size {
                    Some(size) if img.dims() != size => Err(Error::Dataset {
                        path: f.clone(),
                        message: format!(
                            "patch is {}x{}, expected {}x{}",
                            img.width(),
                            img.height(),
                            size.0,
                            size.1
                        ),
                    }),
                    _ => Ok(img),
                }
            })
            .collect()
    }

    /// `(fire, not_fire)` patches in file-name order.
    pub fn load(&self) -> Result<(Vec<ImageRgb>, Vec<ImageRgb>)> {
        Ok((
            self.load_dir(&self.fire_dir)?,
            self.load_dir(&self.not_fire_dir)?,
        ))
    }
}

//! Pixel-color classification: Naive-Bayes over equal-width YCbCr histograms.

use serde::{Deserialize, Serialize};

use crate::imaging::{rgb_to_ycbcr, BinaryMask, ImageRgb, PixelYCbCr};
use crate::{Class, Error, Result};

pub const DEFAULT_BINS: usize = 32;
pub const MAX_BINS: usize = 256;
const CHANNELS: usize = 3;

/// Training pixels with their labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledPixelSet {
    pub entries: Vec<(PixelYCbCr, Class)>,
}

impl LabeledPixelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, p: PixelYCbCr, class: Class) {
        self.entries.push((p, class));
    }

    /// Labels every pixel of `img` with `class`.
    pub fn push_image(&mut self, img: &ImageRgb, class: Class) {
        self.entries
            .extend(img.pixels().iter().map(|&p| (rgb_to_ycbcr(p), class)));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, class: Class) -> usize {
        self.entries.iter().filter(|(_, c)| *c == class).count()
    }
}

/// Trained color statistics. Tables are indexed `[class][channel][bin]`
/// with classes ordered (not_fire, fire) and channels (Y, Cb, Cr).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorModel {
    bins_per_channel: usize,
    bin_edges: Vec<Vec<f64>>,
    log_prior: Vec<f64>,
    log_likelihood: Vec<Vec<Vec<f64>>>,
}

fn equal_width_edges(bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| 255.0 * i as f64 / bins as f64).collect()
}

/// Fits the model with add-one smoothing per bin; priors are class frequencies.
pub fn train_color(data: &LabeledPixelSet, bins: usize) -> Result<ColorModel> {
    if !(1..=MAX_BINS).contains(&bins) {
        return Err(Error::InvalidParameter(format!(
            "bins must lie in [1, {MAX_BINS}], got {bins}"
        )));
    }
    let edges = equal_width_edges(bins);
    let mut counts = vec![vec![vec![0u64; bins]; CHANNELS]; 2];
    let mut class_counts = [0u64; 2];
    for &(p, class) in &data.entries {
        let c = class.index();
        class_counts[c] += 1;
        for (ch, v) in p.channels().into_iter().enumerate() {
            counts[c][ch][bin_of(&edges, v)] += 1;
        }
    }
    for class in Class::ALL {
        if class_counts[class.index()] == 0 {
            return Err(Error::Training(format!(
                "no training pixels labeled {class:?}"
            )));
        }
    }
    let total = (class_counts[0] + class_counts[1]) as f64;
    let log_prior = class_counts
        .iter()
        .map(|&n| (n as f64 / total).ln())
        .collect();
    let log_likelihood = counts
        .iter()
        .zip(class_counts)
        .map(|(per_channel, n)| {
            let denom = (n + bins as u64) as f64;
            per_channel
                .iter()
                .map(|hist| {
                    hist.iter()
                        .map(|&k| ((k + 1) as f64 / denom).ln())
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(ColorModel {
        bins_per_channel: bins,
        bin_edges: vec![edges; CHANNELS],
        log_prior,
        log_likelihood,
    })
}

#[inline]
fn bin_of(edges: &[f64], v: u8) -> usize {
    let bins = edges.len() - 1;
    let v = f64::from(v);
    edges[1..bins].partition_point(|&e| e <= v)
}

impl ColorModel {
    pub fn bins(&self) -> usize {
        self.bins_per_channel
    }

    pub fn log_prior(&self, class: Class) -> f64 {
        self.log_prior[class.index()]
    }

    pub fn log_likelihood(&self, class: Class, channel: usize, bin: usize) -> f64 {
        self.log_likelihood[class.index()][channel][bin]
    }

    /// Bin index of each channel of `p`.
    pub fn bins_of(&self, p: PixelYCbCr) -> [usize; 3] {
        let ch = p.channels();
        [0, 1, 2].map(|i| bin_of(&self.bin_edges[i], ch[i]))
    }

    /// Unnormalized log posterior of each class, ordered (not_fire, fire).
    pub fn scores(&self, p: PixelYCbCr) -> [f64; 2] {
        let bins = self.bins_of(p);
        Class::ALL.map(|class| {
            let c = class.index();
            self.log_prior[c]
                + (0..CHANNELS)
                    .map(|ch| self.log_likelihood[c][ch][bins[ch]])
                    .sum::<f64>()
        })
    }

    /// Normalized posterior, ordered (not_fire, fire).
    pub fn posterior(&self, p: PixelYCbCr) -> [f64; 2] {
        let s = self.scores(p);
        let m = s[0].max(s[1]);
        let e = s.map(|v| (v - m).exp());
        let z = e[0] + e[1];
        e.map(|v| v / z)
    }

    /// Fire only when its score is strictly larger; ties go to not_fire.
    pub fn classify_pixel(&self, p: PixelYCbCr) -> Class {
        let [not_fire, fire] = self.scores(p);
        if fire > not_fire {
            Class::Fire
        } else {
            Class::NotFire
        }
    }

    /// Checks the structural invariants of a deserialized model.
    pub fn validate(&self) -> Result<()> {
        let bins = self.bins_per_channel;
        let bad = |msg: &str| Err(Error::Model(format!("color model: {msg}")));
        if !(1..=MAX_BINS).contains(&bins) {
            return bad("bins out of range");
        }
        if self.bin_edges.len() != CHANNELS
            || self.bin_edges.iter().any(|e| {
                e.len() != bins + 1
                    || e.windows(2)
                        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
            })
        {
            return bad("malformed bin edges");
        }
        if self.log_prior.len() != 2 || self.log_likelihood.len() != 2 {
            return bad("expected two classes");
        }
        for table in &self.log_likelihood {
            if table.len() != CHANNELS || table.iter().any(|h| h.len() != bins) {
                return bad("likelihood table shape");
            }
        }
        let finite = self.log_prior.iter().all(|v| v.is_finite())
            && self
                .log_likelihood
                .iter()
                .flatten()
                .flatten()
                .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite log probability");
        }
        Ok(())
    }
}

/// Per-pixel color decision over the whole image.
pub fn classify_image_color(model: &ColorModel, img: &ImageRgb) -> BinaryMask {
    let bits = img
        .pixels()
        .iter()
        .map(|&p| model.classify_pixel(rgb_to_ycbcr(p)).is_fire())
        .collect();
    BinaryMask::new(img.width(), img.height(), bits).expect("one bit per pixel")
}

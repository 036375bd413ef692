//! Superpixel texture classification with uniform LBP histograms and KNN.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::imaging::{BinaryMask, ImageRgb};
use crate::superpixel::{slic_segment, SlicParams, SuperpixelPartition};
use crate::{Class, Error, Result};

/// 58 uniform patterns plus one shared bin for the rest.
pub const HISTOGRAM_BINS: usize = 59;
pub const NON_UNIFORM_BIN: usize = HISTOGRAM_BINS - 1;
pub const DEFAULT_K: usize = 11;

/// Tag of the neighbor traversal used by [`lbp_code`]; stored in model files.
pub const NEIGHBOR_ORDER: &str = "clockwise-top-left";

/// Offsets (dx, dy) of the eight neighbors, clockwise from top-left. The
/// first neighbor lands in the most significant bit.
const NEIGHBORS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
];

/// LBP code of a 3x3 luma neighborhood given row-major.
pub fn lbp_code(n: &[u8; 9]) -> u8 {
    let center = n[4];
    // row-major indices of the clockwise ring
    const RING: [usize; 8] = [0, 1, 2, 5, 8, 7, 6, 3];
    RING.iter()
        .fold(0u8, |code, &i| (code << 1) | u8::from(n[i] > center))
}

/// Number of 0/1 transitions in the circular 8-bit string.
#[inline]
pub fn transitions(code: u8) -> u32 {
    (code ^ code.rotate_left(1)).count_ones()
}

#[inline]
pub fn is_uniform(code: u8) -> bool {
    transitions(code) <= 2
}

/// Histogram bin of every code: uniform codes in ascending order, then the
/// shared non-uniform bin.
pub fn uniform_bin_table() -> &'static [u8; 256] {
    static TABLE: OnceLock<[u8; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [NON_UNIFORM_BIN as u8; 256];
        let mut next = 0u8;
        for code in 0..=255u8 {
            if is_uniform(code) {
                table[code as usize] = next;
                next += 1;
            }
        }
        table
    })
}

/// LBP code of every pixel of a luma plane, replicating border pixels.
pub fn lbp_codes(luma: &[u8], width: usize, height: usize) -> Vec<u8> {
    let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
    let mut codes = Vec::with_capacity(luma.len());
    for y in 0..height {
        for x in 0..width {
            let center = luma[y * width + x];
            let mut code = 0u8;
            for (dx, dy) in NEIGHBORS {
                let nx = clamp(x as isize + dx, width);
                let ny = clamp(y as isize + dy, height);
                code = (code << 1) | u8::from(luma[ny * width + nx] > center);
            }
            codes.push(code);
        }
    }
    codes
}

/// L1-normalized uniform-LBP histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LbpHistogram(Vec<f64>);

impl LbpHistogram {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != HISTOGRAM_BINS {
            return Err(Error::InvalidParameter(format!(
                "histogram needs {HISTOGRAM_BINS} bins, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "histogram entries must be finite and non-negative".into(),
            ));
        }
        Ok(Self(values))
    }

    /// Pools the codes at `indices` into a normalized histogram.
    pub fn from_codes(codes: &[u8], indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Internal(
                "empty region has no texture histogram".into(),
            ));
        }
        let table = uniform_bin_table();
        let mut counts = [0u32; HISTOGRAM_BINS];
        for &i in indices {
            counts[table[codes[i] as usize] as usize] += 1;
        }
        let n = indices.len() as f64;
        Ok(Self(counts.iter().map(|&c| f64::from(c) / n).collect()))
    }

    /// Histogram of a whole image treated as one region.
    pub fn of_image(img: &ImageRgb) -> Self {
        let codes = lbp_codes(&img.luma(), img.width(), img.height());
        let all: Vec<usize> = (0..codes.len()).collect();
        Self::from_codes(&codes, &all).expect("images are never empty")
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// One histogram per region of `part`, indexed by region id.
pub fn extract_features(img: &ImageRgb, part: &SuperpixelPartition) -> Result<Vec<LbpHistogram>> {
    if img.dims() != part.dims() {
        return Err(Error::dims(img.dims(), part.dims()));
    }
    let codes = lbp_codes(&img.luma(), img.width(), img.height());
    part.members()
        .iter()
        .map(|m| LbpHistogram::from_codes(&codes, m))
        .collect()
}

/// KNN over labeled histograms with Manhattan distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextureModel {
    k: usize,
    neighbor_order: String,
    training: Vec<(LbpHistogram, Class)>,
}

impl TextureModel {
    pub fn new(training: Vec<(LbpHistogram, Class)>, k: usize) -> Result<Self> {
        let model = Self {
            k,
            neighbor_order: NEIGHBOR_ORDER.to_string(),
            training,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "k must be odd, got {}",
                self.k
            )));
        }
        if self.k > self.training.len() {
            return Err(Error::InvalidParameter(format!(
                "k = {} exceeds the {} training vectors",
                self.k,
                self.training.len()
            )));
        }
        for class in Class::ALL {
            if !self.training.iter().any(|(_, c)| *c == class) {
                return Err(Error::Training(format!(
                    "no texture vectors labeled {class:?}"
                )));
            }
        }
        if self.neighbor_order != NEIGHBOR_ORDER {
            return Err(Error::Model(format!(
                "unsupported neighbor order {:?}",
                self.neighbor_order
            )));
        }
        if self
            .training
            .iter()
            .any(|(h, _)| h.0.len() != HISTOGRAM_BINS)
        {
            return Err(Error::Model("texture vector of wrong length".into()));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn training(&self) -> &[(LbpHistogram, Class)] {
        &self.training
    }

    /// Majority label of the `k` nearest training vectors; equal distances
    /// rank the lower training index first.
    pub fn classify_feature(&self, v: &LbpHistogram) -> Class {
        let mut ranked: Vec<(f64, usize)> = self
            .training
            .iter()
            .enumerate()
            .map(|(i, (h, _))| (h.l1_distance(v), i))
            .collect();
        let key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < ranked.len() {
            ranked.select_nth_unstable_by(self.k - 1, key);
        }
        let fire = ranked[..self.k]
            .iter()
            .filter(|&&(_, i)| self.training[i].1.is_fire())
            .count();
        if 2 * fire > self.k {
            Class::Fire
        } else {
            Class::NotFire
        }
    }
}

/// Texture mask: every pixel of a fire-labeled superpixel is set.
pub fn classify_image_texture(
    model: &TextureModel,
    img: &ImageRgb,
    params: &SlicParams,
) -> Result<BinaryMask> {
    let part = slic_segment(img, params)?;
    classify_partition(model, img, &part)
}

pub fn classify_partition(
    model: &TextureModel,
    img: &ImageRgb,
    part: &SuperpixelPartition,
) -> Result<BinaryMask> {
    let fire: Vec<bool> = extract_features(img, part)?
        .iter()
        .map(|h| model.classify_feature(h).is_fire())
        .collect();
    Ok(part.paint(&fire))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(bin: usize) -> LbpHistogram {
        let mut v = vec![0.0; HISTOGRAM_BINS];
        v[bin] = 1.0;
        LbpHistogram::new(v).unwrap()
    }

    #[test]
    fn lbp_code_examples() {
        assert_eq!(lbp_code(&[7; 9]), 0);
        // clockwise from top-left: TL T TR R BR B BL L = 9 9 9 9 1 1 1 1
        let n = [9, 9, 9, 1, 5, 9, 1, 1, 1];
        assert_eq!(lbp_code(&n), 0b1111_0000);
        assert_eq!(lbp_code(&[1, 1, 1, 1, 0, 1, 1, 1, 1]), 255);
    }

    #[test]
    fn uniformity_examples() {
        assert!(is_uniform(0b0000_0000));
        assert!(is_uniform(0b1111_0000));
        assert!(!is_uniform(0b1010_1010));
        assert_eq!(transitions(0b1010_1010), 8);
    }

    #[test]
    fn exactly_58_uniform_codes() {
        // independent count: walk the circular string bit by bit
        let brute = (0..=255u32)
            .filter(|&c| {
                let t = (0..8)
                    .filter(|&i| ((c >> i) & 1) != ((c >> ((i + 1) % 8)) & 1))
                    .count();
                t <= 2
            })
            .count();
        assert_eq!(brute, 58);
        assert_eq!((0..=255u8).filter(|&c| is_uniform(c)).count(), 58);
        let table = uniform_bin_table();
        let mut bins: Vec<u8> = table
            .iter()
            .copied()
            .filter(|&b| b as usize != NON_UNIFORM_BIN)
            .collect();
        bins.dedup();
        assert_eq!(bins, (0..58).collect::<Vec<u8>>());
        assert_eq!(table[0], 0);
        assert_eq!(table[255] as usize, 57);
    }

    #[test]
    fn codes_match_neighborhood_rule() {
        let luma: Vec<u8> = (0..30).map(|i| ((i * 37) % 11) as u8).collect();
        let (w, h) = (6, 5);
        let codes = lbp_codes(&luma, w, h);
        for y in 0..h {
            for x in 0..w {
                let mut n = [0u8; 9];
                for dy in 0..3 {
                    for dx in 0..3 {
                        let nx = (x + dx).saturating_sub(1).min(w - 1);
                        let ny = (y + dy).saturating_sub(1).min(h - 1);
                        n[dy * 3 + dx] = luma[ny * w + nx];
                    }
                }
                assert_eq!(codes[y * w + x], lbp_code(&n));
            }
        }
    }

    #[test]
    fn constant_image_has_all_mass_in_code_zero() {
        let img = ImageRgb::filled(12, 9, [200, 100, 30]).unwrap();
        let part = slic_segment(&img, &SlicParams::default().with_ksp(6)).unwrap();
        for h in extract_features(&img, &part).unwrap() {
            assert_eq!(h, unit(0));
        }
    }

    #[test]
    fn edge_regions_carry_non_zero_codes() {
        // dark left half, bright right half
        let img = ImageRgb::from_fn(
            8,
            8,
            |x, _| if x < 4 { [10, 10, 10] } else { [240, 240, 240] },
        )
        .unwrap();
        let codes = lbp_codes(&img.luma(), 8, 8);
        // dark pixels on column 3 see bright TR, R, BR -> 0b0011_1000
        assert_eq!(codes[2 * 8 + 3], 0b0011_1000);
        assert_eq!(codes[2 * 8 + 4], 0);
        let part = SuperpixelPartition::from_labels(
            8,
            8,
            &(0..64)
                .map(|i| u32::from(i % 8 >= 2 && i % 8 < 6))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let hists = extract_features(&img, &part).unwrap();
        let straddling = &hists[part.label_at(3, 0) as usize];
        assert!(straddling.values()[0] < 1.0);
        let bin = uniform_bin_table()[0b0011_1000] as usize;
        assert!((straddling.values()[bin] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn knn_examples() {
        let fire = unit(3);
        let other = unit(40);
        let m = TextureModel::new(
            vec![(fire.clone(), Class::Fire), (other.clone(), Class::NotFire)],
            1,
        )
        .unwrap();
        assert_eq!(m.classify_feature(&fire), Class::Fire);
        assert_eq!(m.classify_feature(&other), Class::NotFire);

        let training = vec![
            (fire.clone(), Class::Fire),
            (fire.clone(), Class::Fire),
            (fire.clone(), Class::Fire),
            (other, Class::NotFire),
        ];
        let m = TextureModel::new(training, 3).unwrap();
        let mut near = vec![0.0; HISTOGRAM_BINS];
        near[3] = 0.9;
        near[4] = 0.1;
        assert_eq!(
            m.classify_feature(&LbpHistogram::new(near).unwrap()),
            Class::Fire
        );
    }

    #[test]
    fn knn_distance_ties_prefer_lower_index() {
        // two equidistant vectors; k = 1 must pick index 0
        let a = unit(1);
        let b = unit(2);
        let q = {
            let mut v = vec![0.0; HISTOGRAM_BINS];
            v[1] = 0.5;
            v[2] = 0.5;
            LbpHistogram::new(v).unwrap()
        };
        let m = TextureModel::new(
            vec![(a.clone(), Class::NotFire), (b.clone(), Class::Fire)],
            1,
        )
        .unwrap();
        assert_eq!(m.classify_feature(&q), Class::NotFire);
        let m = TextureModel::new(vec![(b, Class::Fire), (a, Class::NotFire)], 1).unwrap();
        assert_eq!(m.classify_feature(&q), Class::Fire);
    }

    #[test]
    fn model_validation() {
        let f = (unit(0), Class::Fire);
        let n = (unit(1), Class::NotFire);
        assert!(TextureModel::new(vec![f.clone(), n.clone()], 2).is_err());
        assert!(TextureModel::new(vec![f.clone(), n.clone()], 3).is_err());
        assert!(TextureModel::new(vec![f.clone(), f.clone()], 1).is_err());
        assert!(TextureModel::new(vec![f, n], 1).is_ok());
        assert!(LbpHistogram::new(vec![0.0; 58]).is_err());
    }

    #[test]
    fn texture_mask_is_constant_per_region() {
        let img = ImageRgb::from_fn(32, 24, |x, y| {
            let v = ((x * 7 + y * 13) % 5 * 50) as u8;
            [v, v / 2, 200]
        })
        .unwrap();
        let params = SlicParams::default().with_ksp(12);
        let part = slic_segment(&img, &params).unwrap();
        let hists = extract_features(&img, &part).unwrap();
        // train on the partition itself, alternating labels
        let training: Vec<_> = hists
            .iter()
            .enumerate()
            .map(|(i, h)| {
                (
                    h.clone(),
                    if i % 2 == 0 {
                        Class::Fire
                    } else {
                        Class::NotFire
                    },
                )
            })
            .collect();
        let model = TextureModel::new(training, 1).unwrap();
        let mask = classify_image_texture(&model, &img, &params).unwrap();
        let mut expected = 0;
        for (id, members) in part.members().iter().enumerate() {
            let fire = model.classify_feature(&hists[id]).is_fire();
            for &i in members {
                assert_eq!(mask.bits()[i], fire);
            }
            if fire {
                expected += members.len();
            }
        }
        assert_eq!(mask.popcount(), expected);
    }

    #[test]
    fn all_fire_training_gives_full_mask() {
        let img = ImageRgb::from_fn(16, 16, |x, y| [(x * 16) as u8, (y * 16) as u8, 0]).unwrap();
        let training = vec![
            (unit(0), Class::Fire),
            (unit(1), Class::Fire),
            (unit(2), Class::Fire),
            (unit(3), Class::NotFire),
        ];
        let model = TextureModel::new(training, 3).unwrap();
        let mask =
            classify_image_texture(&model, &img, &SlicParams::default().with_ksp(4)).unwrap();
        assert_eq!(mask.popcount(), mask.len());
    }

    fn histogram() -> impl Strategy<Value = LbpHistogram> {
        proptest::collection::vec(0u32..20, HISTOGRAM_BINS).prop_map(|counts| {
            let total: u32 = counts.iter().sum::<u32>().max(1);
            let mut v: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
            if counts.iter().all(|&c| c == 0) {
                v[0] = 1.0;
            }
            LbpHistogram::new(v).unwrap()
        })
    }

    proptest! {
        #[test]
        fn l1_distance_is_bounded(a in histogram(), b in histogram()) {
            let d = a.l1_distance(&b);
            prop_assert!((0.0..=2.0 + 1e-12).contains(&d));
            let s: f64 = a.values().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
    }
}

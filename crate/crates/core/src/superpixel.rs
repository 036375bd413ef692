//! SLIC superpixels computed in YCbCr space.
//!
//! Seeds start on a regular grid, each nudged to the lowest-gradient pixel of
//! its 3x3 neighborhood, and are refined by local k-means with the combined
//! distance `D = sqrt(d_c^2 + (d_s / S)^2 * m^2)`. A final pass makes every
//! region 4-connected.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::imaging::{BinaryMask, ImageRgb};
use crate::{Error, Result};

pub const DEFAULT_KSP: usize = 150;
pub const DEFAULT_COMPACTNESS: f64 = 40.0;
pub const DEFAULT_ITERATIONS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlicParams {
    /// Requested number of superpixels.
    pub k_sp: usize,
    /// Compactness `m`.
    pub m: f64,
    pub iterations: usize,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            k_sp: DEFAULT_KSP,
            m: DEFAULT_COMPACTNESS,
            iterations: DEFAULT_ITERATIONS,
        }
    }
}

impl SlicParams {
    pub fn with_ksp(self, k_sp: usize) -> Self {
        Self { k_sp, ..self }
    }

    /// Checks the parameters independent of any image.
    pub fn validate(&self) -> Result<()> {
        if self.k_sp == 0 {
            return Err(Error::InvalidParameter("k_sp must be at least 1".into()));
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "compactness must be positive, got {}",
                self.m
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter(
                "iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn validate_for(&self, pixel_count: usize) -> Result<()> {
        self.validate()?;
        if self.k_sp > pixel_count {
            return Err(Error::InvalidParameter(format!(
                "k_sp = {} exceeds the {pixel_count} pixels of the image",
                self.k_sp
            )));
        }
        Ok(())
    }

    /// Grid step `S = sqrt(N / k_sp)`.
    pub fn grid_step(&self, pixel_count: usize) -> f64 {
        (pixel_count as f64 / self.k_sp as f64).sqrt()
    }
}

/// Labels every pixel with a region id in `0..region_count`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuperpixelPartition {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    members: Vec<Vec<usize>>,
}

impl SuperpixelPartition {
    /// Builds a partition from raw labels, renumbering ids densely in order
    /// of first appearance.
    pub fn from_labels(width: usize, height: usize, labels: &[u32]) -> Result<Self> {
        if labels.len() != width * height || labels.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "{} labels for a {width}x{height} image",
                labels.len()
            )));
        }
        let mut remap = std::collections::HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut dense = Vec::with_capacity(labels.len());
        for (i, &l) in labels.iter().enumerate() {
            let id = *remap.entry(l).or_insert_with(|| {
                members.push(Vec::new());
                members.len() as u32 - 1
            });
            members[id as usize].push(i);
            dense.push(id);
        }
        Ok(Self {
            width,
            height,
            labels: dense,
            members,
        })
    }

    /// Whole image as a single region.
    pub fn single(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            labels: vec![0; width * height],
            members: vec![(0..width * height).collect()],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn region_count(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[Vec<usize>] {
        &self.members
    }

    #[inline]
    pub fn label_at(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Expands a per-region decision into a pixel mask.
    pub fn paint(&self, region_is_fire: &[bool]) -> BinaryMask {
        let bits = self
            .labels
            .iter()
            .map(|&l| region_is_fire[l as usize])
            .collect();
        BinaryMask::new(self.width, self.height, bits).expect("label per pixel")
    }

    /// Label map as a 16-bit grayscale PNG.
    pub fn save_label_png(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let raw: Vec<u16> = self
            .labels
            .iter()
            .map(|&l| l.min(u16::MAX as u32) as u16)
            .collect();
        let img: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
            image::ImageBuffer::from_raw(self.width as u32, self.height as u32, raw)
                .expect("label per pixel");
        img.save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }

    /// Copy of `img` with region boundaries drawn in `color`.
    pub fn boundary_overlay(&self, img: &ImageRgb, color: [u8; 3]) -> Result<ImageRgb> {
        if img.dims() != self.dims() {
            return Err(Error::dims(img.dims(), self.dims()));
        }
        ImageRgb::from_fn(self.width, self.height, |x, y| {
            let l = self.label_at(x, y);
            let edge = (x + 1 < self.width && self.label_at(x + 1, y) != l)
                || (y + 1 < self.height && self.label_at(x, y + 1) != l);
            if edge {
                color
            } else {
                img.get(x, y)
            }
        })
    }
}

#[derive(Clone, Copy, Debug)]
struct Center {
    color: [f64; 3],
    x: f64,
    y: f64,
}

struct Slic<'a> {
    width: usize,
    height: usize,
    color: &'a [[f64; 3]],
    step: f64,
    /// `(m / S)^2`, the weight of squared spatial distance.
    spatial_weight: f64,
}

impl Slic<'_> {
    #[inline]
    fn distance2(&self, c: &Center, idx: usize, x: usize, y: usize) -> f64 {
        let p = &self.color[idx];
        let dc =
            (p[0] - c.color[0]).powi(2) + (p[1] - c.color[1]).powi(2) + (p[2] - c.color[2]).powi(2);
        let ds = (x as f64 - c.x).powi(2) + (y as f64 - c.y).powi(2);
        dc + ds * self.spatial_weight
    }

    fn luma_gradient(&self, x: usize, y: usize) -> f64 {
        let at = |x: usize, y: usize| self.color[y * self.width + x][0];
        let xl = x.saturating_sub(1);
        let xr = (x + 1).min(self.width - 1);
        let yu = y.saturating_sub(1);
        let yd = (y + 1).min(self.height - 1);
        (at(xr, y) - at(xl, y)).powi(2) + (at(x, yd) - at(x, yu)).powi(2)
    }

    fn grid_shape(&self, k_sp: usize) -> (usize, usize) {
        let cols_f = self.width as f64 / self.step;
        let rows_f = self.height as f64 / self.step;
        let mut cols = (cols_f.round() as usize).clamp(1, self.width);
        let mut rows = (rows_f.round() as usize).clamp(1, self.height);
        while cols * rows > 2 * k_sp {
            if cols >= rows {
                cols -= 1;
            } else {
                rows -= 1;
            }
        }
        (cols, rows)
    }

    fn seeds(&self, k_sp: usize) -> Vec<Center> {
        let (cols, rows) = self.grid_shape(k_sp);
        let mut centers = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            let fy = (r as f64 + 0.5) * self.height as f64 / rows as f64 - 0.5;
            let gy = fy.round() as usize;
            for c in 0..cols {
                let fx = (c as f64 + 0.5) * self.width as f64 / cols as f64 - 0.5;
                let gx = fx.round() as usize;
                let mut best = (self.luma_gradient(gx, gy), gx, gy);
                for ny in gy.saturating_sub(1)..=(gy + 1).min(self.height - 1) {
                    for nx in gx.saturating_sub(1)..=(gx + 1).min(self.width - 1) {
                        let g = self.luma_gradient(nx, ny);
                        if g < best.0 {
                            best = (g, nx, ny);
                        }
                    }
                }
                let (_, bx, by) = best;
                // the cell center stays fractional unless a flatter pixel was found
                let (x, y) = if (bx, by) == (gx, gy) {
                    (fx, fy)
                } else {
                    (bx as f64, by as f64)
                };
                centers.push(Center {
                    color: self.color[by * self.width + bx],
                    x,
                    y,
                });
            }
        }
        centers
    }

    /// One assignment sweep restricted to the 2S x 2S window of each center.
    fn assign_local(&self, centers: &[Center], labels: &mut [i32], best: &mut [f64]) {
        best.fill(f64::INFINITY);
        labels.fill(-1);
        let s = self.step;
        for (id, c) in centers.iter().enumerate() {
            let x0 = (c.x - s).floor().max(0.0) as usize;
            let y0 = (c.y - s).floor().max(0.0) as usize;
            let x1 = ((c.x + s).ceil() as usize).min(self.width - 1);
            let y1 = ((c.y + s).ceil() as usize).min(self.height - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let idx = y * self.width + x;
                    let d = self.distance2(c, idx, x, y);
                    // strict: on equal D the lower id, visited first, keeps the pixel
                    if d < best[idx] {
                        best[idx] = d;
                        labels[idx] = id as i32;
                    }
                }
            }
        }
    }

    fn update_centers(&self, centers: &mut [Center], labels: &[i32]) {
        let mut sums = vec![[0.0f64; 6]; centers.len()];
        for (idx, &l) in labels.iter().enumerate() {
            if l < 0 {
                continue;
            }
            let s = &mut sums[l as usize];
            let p = &self.color[idx];
            s[0] += p[0];
            s[1] += p[1];
            s[2] += p[2];
            s[3] += (idx % self.width) as f64;
            s[4] += (idx / self.width) as f64;
            s[5] += 1.0;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[5] > 0.0 {
                c.color = [s[0] / s[5], s[1] / s[5], s[2] / s[5]];
                c.x = s[3] / s[5];
                c.y = s[4] / s[5];
            }
        }
    }
}

/// Segments `img` into roughly `params.k_sp` compact, 4-connected regions.
pub fn slic_segment(img: &ImageRgb, params: &SlicParams) -> Result<SuperpixelPartition> {
    let n = img.len();
    params.validate_for(n)?;
    let (width, height) = img.dims();
    let color: Vec<[f64; 3]> = img
        .to_ycbcr()
        .into_iter()
        .map(|p| p.channels().map(f64::from))
        .collect();
    let step = params.grid_step(n);
    let slic = Slic {
        width,
        height,
        color: &color,
        step,
        spatial_weight: (params.m / step).powi(2),
    };

    let mut centers = slic.seeds(params.k_sp);
    let mut labels = vec![-1i32; n];
    let mut best = vec![f64::INFINITY; n];
    for _ in 0..params.iterations {
        slic.assign_local(&centers, &mut labels, &mut best);
        slic.update_centers(&mut centers, &labels);
    }
    slic.assign_local(&centers, &mut labels, &mut best);

    // Pixels outside every window fall back to the globally nearest center.
    for (idx, l) in labels.iter_mut().enumerate() {
        if *l < 0 {
            let (x, y) = (idx % width, idx / width);
            let mut bd = f64::INFINITY;
            for (id, c) in centers.iter().enumerate() {
                let d = slic.distance2(c, idx, x, y);
                if d < bd {
                    bd = d;
                    *l = id as i32;
                }
            }
        }
    }

    let min_size = n / (4 * params.k_sp);
    let connected = enforce_connectivity(width, height, &labels, min_size, 2 * params.k_sp);
    SuperpixelPartition::from_labels(width, height, &connected)
}

/// Relabels 4-connected components in scan order. A component smaller than
/// `min_size` joins the region of the pixel left of (else above) its first
/// pixel; so does any component once `max_regions` ids are in use.
fn enforce_connectivity(
    width: usize,
    height: usize,
    labels: &[i32],
    min_size: usize,
    max_regions: usize,
) -> Vec<u32> {
    const UNSET: u32 = u32::MAX;
    let n = width * height;
    let mut out = vec![UNSET; n];
    let mut next = 0u32;
    let mut component = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if out[start] != UNSET {
            continue;
        }
        let (sx, sy) = (start % width, start / width);
        let adjacent = if sx > 0 {
            Some(out[start - 1])
        } else if sy > 0 {
            Some(out[start - width])
        } else {
            None
        };

        let old = labels[start];
        component.clear();
        out[start] = next;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            component.push(idx);
            let (x, y) = (idx % width, idx / width);
            let mut visit = |j: usize| {
                if out[j] == UNSET && labels[j] == old {
                    out[j] = next;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(idx - 1);
            }
            if x + 1 < width {
                visit(idx + 1);
            }
            if y > 0 {
                visit(idx - width);
            }
            if y + 1 < height {
                visit(idx + width);
            }
        }

        match adjacent {
            Some(adj) if component.len() < min_size || next as usize >= max_regions => {
                for &idx in &component {
                    out[idx] = adj;
                }
            }
            _ => next += 1,
        }
    }
    out
}

//! Deterministic synthetic corpus.
//!
//! Fire is a flame-colored blob filled with pixel-level noise. Distractors
//! use the same palette but are smooth: flat discs and linear gradients.
//! Backgrounds are smooth skies or blurred, low-contrast clutter in non-fire
//! colors. Ground truth covers exactly the flame pixels.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::PATCH_SIZE;
use crate::imaging::{BinaryMask, ImageRgb, Rgb};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub fire_images: usize,
    pub non_fire_images: usize,
    pub fire_patches: usize,
    pub not_fire_patches: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 0x0b0f_17e5,
            width: 96,
            height: 96,
            fire_images: 100,
            non_fire_images: 100,
            fire_patches: 80,
            not_fire_patches: 160,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub image: ImageRgb,
    pub truth: BinaryMask,
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub fire_patches: Vec<ImageRgb>,
    pub not_fire_patches: Vec<ImageRgb>,
    pub fire_scenes: Vec<Scene>,
    pub non_fire_scenes: Vec<Scene>,
}

/// Orange-to-yellow ramp, `t` in [0, 1].
fn flame_color(t: f64) -> [f64; 3] {
    let t = t.clamp(0.0, 1.0);
    [225.0 + 30.0 * t, 70.0 + 170.0 * t, 10.0 + 90.0 * t * t]
}

fn to_rgb(c: [f64; 3]) -> Rgb {
    c.map(|v| v.round().clamp(0.0, 255.0) as u8)
}

/// Mutable RGB canvas with float channels.
struct Canvas {
    w: usize,
    h: usize,
    px: Vec<[f64; 3]>,
}

impl Canvas {
    fn into_image(self) -> ImageRgb {
        ImageRgb::new(self.w, self.h, self.px.into_iter().map(to_rgb).collect())
            .expect("canvas is never empty")
    }
}

fn box_blur(values: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for y in 0..h {
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r).min(w - 1));
            let (y0, y1) = (y.saturating_sub(r), (y + r).min(h - 1));
            let mut s = 0.0;
            for yy in y0..=y1 {
                for xx in x0..=x1 {
                    s += values[yy * w + xx];
                }
            }
            out[y * w + x] = s / ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64;
        }
    }
    out
}

fn background(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Canvas {
    const BASES: [[f64; 3]; 5] = [
        [90.0, 140.0, 210.0],  // sky
        [110.0, 110.0, 115.0], // concrete
        [60.0, 110.0, 50.0],   // foliage
        [40.0, 45.0, 70.0],    // dusk
        [150.0, 150.0, 160.0], // haze
    ];
    let base = BASES[rng.gen_range(0..BASES.len())];
    let (gx, gy) = (rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6));
    let mut px: Vec<[f64; 3]> = (0..w * h)
        .map(|i| {
            let shade = gx * (i % w) as f64 + gy * (i / w) as f64;
            base.map(|c| c + shade)
        })
        .collect();
    if rng.gen_bool(0.5) {
        // blurred clutter
        let amp = rng.gen_range(10.0..30.0);
        let noise: Vec<f64> = (0..w * h).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let smooth = box_blur(&noise, w, h, 2);
        for (p, n) in px.iter_mut().zip(smooth) {
            for c in p.iter_mut() {
                *c += amp * n * 2.0;
            }
        }
    }
    Canvas { w, h, px }
}

/// Irregular star-shaped blob around (cx, cy).
fn blob_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, cx: f64, cy: f64, r: f64) -> Vec<bool> {
    let harmonics: Vec<(f64, f64, f64)> = (1..=3)
        .map(|k| {
            (
                k as f64 + 1.0,
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.05..0.2),
            )
        })
        .collect();
    (0..w * h)
        .map(|i| {
            let (dx, dy) = ((i % w) as f64 - cx, (i / w) as f64 - cy);
            let theta = dy.atan2(dx);
            let scale: f64 = 1.0
                + harmonics
                    .iter()
                    .map(|(f, ph, a)| a * (f * theta + ph).sin())
                    .sum::<f64>();
            (dx * dx + dy * dy).sqrt() <= r * scale
        })
        .collect()
}

fn paint_flame(rng: &mut ChaCha8Rng, canvas: &mut Canvas, region: &[bool]) {
    let (w, h) = (canvas.w, canvas.h);
    let low: Vec<f64> = {
        let noise: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.0..1.0)).collect();
        box_blur(&noise, w, h, 3)
    };
    let bias = rng.gen_range(-0.15..0.15);
    for (i, inside) in region.iter().enumerate() {
        if !*inside {
            continue;
        }
        let t = 0.5 + bias + 2.0 * (low[i] - 0.5) + rng.gen_range(-0.3..0.3);
        let c = flame_color(t);
        canvas.px[i] = [0, 1, 2].map(|ch| c[ch] + rng.gen_range(-18.0..18.0));
    }
}

fn paint_distractor(rng: &mut ChaCha8Rng, canvas: &mut Canvas) {
    let (w, h) = (canvas.w as f64, canvas.h as f64);
    let t = rng.gen_range(0.0..1.0);
    if rng.gen_bool(0.5) {
        // flat disc
        let r = rng.gen_range(0.12..0.3) * w.min(h);
        let (cx, cy) = (rng.gen_range(0.0..w), rng.gen_range(0.0..h));
        let c = flame_color(t);
        for (i, p) in canvas.px.iter_mut().enumerate() {
            let (dx, dy) = ((i % canvas.w) as f64 - cx, (i / canvas.w) as f64 - cy);
            if dx * dx + dy * dy <= r * r {
                *p = c;
            }
        }
    } else {
        // gradient band across the frame
        let band = rng.gen_range(0.25..0.5) * h;
        let y0 = rng.gen_range(0.0..h - band);
        let span = rng.gen_range(0.1..0.4);
        for (i, p) in canvas.px.iter_mut().enumerate() {
            let (x, y) = ((i % canvas.w) as f64, (i / canvas.w) as f64);
            if y >= y0 && y < y0 + band {
                *p = flame_color(t + span * (x / w - 0.5));
            }
        }
    }
}

pub fn fire_scene(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Scene {
    let mut canvas = background(rng, w, h);
    if rng.gen_bool(0.5) {
        paint_distractor(rng, &mut canvas);
    }
    let mut truth = vec![false; w * h];
    for _ in 0..rng.gen_range(1..=2) {
        let r = rng.gen_range(0.14..0.26) * w.min(h) as f64;
        let cx = rng.gen_range(r..w as f64 - r);
        let cy = rng.gen_range(r..h as f64 - r);
        let region = blob_mask(rng, w, h, cx, cy, r);
        paint_flame(rng, &mut canvas, &region);
        truth.iter_mut().zip(&region).for_each(|(t, r)| *t |= r);
    }
    Scene {
        image: canvas.into_image(),
        truth: BinaryMask::new(w, h, truth).expect("mask per pixel"),
    }
}

pub fn non_fire_scene(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Scene {
    let mut canvas = background(rng, w, h);
    for _ in 0..rng.gen_range(1..=3) {
        paint_distractor(rng, &mut canvas);
    }
    Scene {
        image: canvas.into_image(),
        truth: BinaryMask::filled(w, h, false),
    }
}

pub fn fire_patch(rng: &mut ChaCha8Rng) -> ImageRgb {
    let mut canvas = background(rng, PATCH_SIZE, PATCH_SIZE);
    paint_flame(rng, &mut canvas, &[true; PATCH_SIZE * PATCH_SIZE]);
    canvas.into_image()
}

/// Alternates distractor patches and plain background patches.
pub fn not_fire_patch(rng: &mut ChaCha8Rng, index: usize) -> ImageRgb {
    let mut canvas = background(rng, PATCH_SIZE, PATCH_SIZE);
    if index.is_multiple_of(2) {
        paint_distractor(rng, &mut canvas);
    }
    canvas.into_image()
}

pub fn generate(params: &SynthParams) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let fire_patches = (0..params.fire_patches)
        .map(|_| fire_patch(&mut rng))
        .collect();
    let not_fire_patches = (0..params.not_fire_patches)
        .map(|i| not_fire_patch(&mut rng, i))
        .collect();
    let fire_scenes = (0..params.fire_images)
        .map(|_| fire_scene(&mut rng, params.width, params.height))
        .collect();
    let non_fire_scenes = (0..params.non_fire_images)
        .map(|_| non_fire_scene(&mut rng, params.width, params.height))
        .collect();
    Corpus {
        fire_patches,
        not_fire_patches,
        fire_scenes,
        non_fire_scenes,
    }
}

impl Corpus {
    /// Writes the corpus as
    /// `train/{fire,not_fire}/`, `fire/{images,masks}/`, `non-fire/images/`.
    pub fn write(&self, root: &Path) -> Result<()> {
        let mkdir = |p: &Path| {
            std::fs::create_dir_all(p).map_err(|source| Error::Io {
                path: p.to_path_buf(),
                source,
            })
        };
        let dirs = [
            root.join("train/fire"),
            root.join("train/not_fire"),
            root.join("fire/images"),
            root.join("fire/masks"),
            root.join("non-fire/images"),
        ];
        for d in &dirs {
            mkdir(d)?;
        }
        for (i, p) in self.fire_patches.iter().enumerate() {
            p.save_png(dirs[0].join(format!("{i:04}.png")))?;
        }
        for (i, p) in self.not_fire_patches.iter().enumerate() {
            p.save_png(dirs[1].join(format!("{i:04}.png")))?;
        }
        for (i, s) in self.fire_scenes.iter().enumerate() {
            s.image.save_png(dirs[2].join(format!("{i:04}.png")))?;
            s.truth.save_png(dirs[3].join(format!("{i:04}.png")))?;
        }
        for (i, s) in self.non_fire_scenes.iter().enumerate() {
            s.image.save_png(dirs[4].join(format!("{i:04}.png")))?;
        }
        Ok(())
    }
}

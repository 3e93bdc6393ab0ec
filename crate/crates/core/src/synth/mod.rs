//! Synthetic digit-string images, dataset persistence and loading.
//!
//! Each sample draws its digits and layout from its own stream
//! `gen.<split>`/index, so datasets are identical for any thread count.

pub mod glyphs;
pub mod manifest;
pub mod pgm;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

pub use glyphs::{GlyphSet, GLYPH_HEIGHT, GLYPH_WIDTH};
pub use manifest::{load_manifest, ManifestRecord, SampleManifest, MANIFEST_FILE};
pub use pgm::GrayImage;

use crate::ctc::{Alphabet, LabelSequence};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

pub const BACKGROUND: u8 = 255;
pub const INK: u8 = 0;
/// Blank columns left of the first glyph and the minimum right of the last.
pub const MARGIN: usize = 2;
pub const IMAGE_DIR: &str = "imgs";

#[derive(Clone, Debug, PartialEq)]
pub struct GenSpec {
    /// String length → number of samples.
    pub lengths: BTreeMap<usize, usize>,
    /// Per-pixel flip probability.
    pub noise: f64,
    /// Maximum vertical offset from the centred position, in pixels.
    pub jitter: usize,
    /// Inclusive range of the gap between neighbouring glyphs.
    pub spacing: (usize, usize),
    /// Inclusive range of the glyph magnification.
    pub scale: (f64, f64),
    pub seed: u64,
    /// Names the random streams, so train and test sets of one seed differ.
    pub split: String,
    pub height: usize,
    pub width: usize,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            lengths: BTreeMap::new(),
            noise: 0.05,
            jitter: 2,
            spacing: (1, 2),
            scale: (1.8, 2.0),
            seed: 0,
            split: "train".into(),
            height: 32,
            width: 64,
        }
    }
}

fn scaled(n: usize, s: f64) -> usize {
    ((n as f64 * s).round() as usize).max(1)
}

impl GenSpec {
    pub fn total(&self) -> usize {
        self.lengths.values().sum()
    }

    /// Widest rendering of a string of `len` digits.
    pub fn max_extent(&self, len: usize) -> usize {
        let gw = scaled(GLYPH_WIDTH, self.scale.1);
        len * gw + len.saturating_sub(1) * self.spacing.1 + 2 * MARGIN
    }

    pub fn validate(&self) -> Result<()> {
        let gen = |m: String| Err(Error::Generation(m));
        if !(0.0..0.5).contains(&self.noise) {
            return gen(format!("noise {} outside [0, 0.5)", self.noise));
        }
        if self.spacing.0 > self.spacing.1 {
            return gen(format!("spacing range {}..{} is empty", self.spacing.0, self.spacing.1));
        }
        if !(self.scale.0 > 0.0 && self.scale.0 <= self.scale.1 && self.scale.1.is_finite()) {
            return gen(format!("bad scale range {}..{}", self.scale.0, self.scale.1));
        }
        if self.height == 0 || self.width == 0 {
            return gen("canvas must be non-empty".into());
        }
        let gh = scaled(GLYPH_HEIGHT, self.scale.1);
        if gh + 2 * self.jitter > self.height {
            return gen(format!(
                "glyphs {gh} px tall with jitter {} do not fit height {}",
                self.jitter, self.height
            ));
        }
        for (&len, &count) in &self.lengths {
            if len == 0 && count > 0 {
                return gen("length 0 strings cannot be rendered".into());
            }
            let need = self.max_extent(len);
            if count > 0 && need > self.width {
                return gen(format!(
                    "strings of length {len} need up to {need} px but the canvas is {} px wide",
                    self.width
                ));
            }
        }
        Ok(())
    }
}

/// Draws a digit string of `len` digits and renders it.
pub fn render_random(spec: &GenSpec, glyphs: &GlyphSet, len: usize, rng: &mut impl Rng) -> (String, GrayImage) {
    let label: String = (0..len)
        .map(|_| char::from(b'0' + rng.random_range(0..10u8)))
        .collect();
    let img = render(spec, glyphs, &label, rng);
    (label, img)
}

/// Places the glyphs of `label` left to right starting at [`MARGIN`], each
/// with its own magnification and vertical jitter, then flips pixels.
pub fn render(spec: &GenSpec, glyphs: &GlyphSet, label: &str, rng: &mut impl Rng) -> GrayImage {
    let mut img = GrayImage::new(spec.width, spec.height, BACKGROUND);
    let mut x0 = MARGIN;
    for (i, ch) in label.bytes().enumerate() {
        let digit = usize::from(ch - b'0');
        let s = if spec.scale.0 < spec.scale.1 {
            rng.random_range(spec.scale.0..=spec.scale.1)
        } else {
            spec.scale.0
        };
        let (gw, gh) = (scaled(GLYPH_WIDTH, s), scaled(GLYPH_HEIGHT, s));
        let dy = if spec.jitter > 0 {
            rng.random_range(0..=2 * spec.jitter) as isize - spec.jitter as isize
        } else {
            0
        };
        let y0 = ((spec.height - gh) / 2) as isize + dy;
        for y in 0..gh {
            for x in 0..gw {
                if glyphs.ink(digit, y * GLYPH_HEIGHT / gh, x * GLYPH_WIDTH / gw) {
                    let (px, py) = (x0 + x, y0 + y as isize);
                    if px < spec.width && py >= 0 && (py as usize) < spec.height {
                        img.set(px, py as usize, INK);
                    }
                }
            }
        }
        x0 += gw;
        if i + 1 < label.len() {
            x0 += rng.random_range(spec.spacing.0..=spec.spacing.1);
        }
    }
    if spec.noise > 0.0 {
        for p in img.pixels.iter_mut() {
            if rng.random::<f64>() < spec.noise {
                *p = if *p == INK { BACKGROUND } else { INK };
            }
        }
    }
    img
}

/// Writes `imgs/NNNNNN.pgm` and `manifest.tsv` under `out_dir`.
pub fn generate(spec: &GenSpec, out_dir: &Path) -> Result<SampleManifest> {
    spec.validate()?;
    let mut lengths: Vec<usize> = spec
        .lengths
        .iter()
        .flat_map(|(&len, &count)| std::iter::repeat_n(len, count))
        .collect();
    lengths.shuffle(&mut rng::stream(spec.seed, &format!("gen.{}.order", spec.split), 0));

    let img_dir = out_dir.join(IMAGE_DIR);
    fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    let glyphs = GlyphSet::default();
    let stream = format!("gen.{}", spec.split);
    let records = lengths
        .par_iter()
        .enumerate()
        .map(|(i, &len)| {
            let mut r = rng::stream(spec.seed, &stream, i as u64);
            let (label, img) = render_random(spec, &glyphs, len, &mut r);
            let rel = format!("{IMAGE_DIR}/{i:06}.pgm");
            img.save(&out_dir.join(&rel))?;
            Ok(ManifestRecord { path: rel, label })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = SampleManifest {
        root: out_dir.to_path_buf(),
        records,
    };
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Length → count histogram of a manifest's labels.
pub fn length_histogram(manifest: &SampleManifest) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for r in &manifest.records {
        *h.entry(r.label.len()).or_insert(0) += 1;
    }
    h
}

fn bilinear(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f64> {
    let coord = |d: usize, dn: usize, sn: usize| -> (usize, usize, f64) {
        let c = ((d as f64 + 0.5) * sn as f64 / dn as f64 - 0.5).clamp(0.0, (sn - 1) as f64);
        let lo = c.floor() as usize;
        let hi = (lo + 1).min(sn - 1);
        (lo, hi, c - lo as f64)
    };
    let mut out = vec![0.0; dw * dh];
    for y in 0..dh {
        let (y0, y1, fy) = coord(y, dh, sh);
        for x in 0..dw {
            let (x0, x1, fx) = coord(x, dw, sw);
            let top = src[y0 * sw + x0] * (1.0 - fx) + src[y0 * sw + x1] * fx;
            let bot = src[y1 * sw + x0] * (1.0 - fx) + src[y1 * sw + x1] * fx;
            out[y * dw + x] = top * (1.0 - fy) + bot * fy;
        }
    }
    out
}

/// Converts to a `1×height×width` tensor with ink 1 and background 0.
///
/// The image is scaled to `height` keeping its aspect ratio and padded on the
/// right with background. If that is wider than `width` it is instead scaled
/// to exactly `width` and centred vertically.
pub fn prepare_image(img: &GrayImage, height: usize, width: usize) -> Result<Tensor> {
    let ink: Vec<f64> = img.pixels.iter().map(|&p| 1.0 - f64::from(p) / 255.0).collect();
    let (rw, rh) = {
        let w = (img.width as f64 * height as f64 / img.height as f64).round().max(1.0) as usize;
        if w <= width {
            (w, height)
        } else {
            let h = (img.height as f64 * width as f64 / img.width as f64).round().max(1.0) as usize;
            (width, h.min(height))
        }
    };
    let resized = if (rw, rh) == (img.width, img.height) {
        ink
    } else {
        bilinear(&ink, img.width, img.height, rw, rh)
    };
    let top = (height - rh) / 2;
    let mut data = vec![0.0; height * width];
    for y in 0..rh {
        data[(top + y) * width..(top + y) * width + rw].copy_from_slice(&resized[y * rw..(y + 1) * rw]);
    }
    Tensor::from_vec(&[1, height, width], data)
}

#[derive(Clone, Debug)]
pub struct Sample {
    /// Manifest path of the image.
    pub id: String,
    pub image: Tensor,
    pub label: LabelSequence,
}

pub fn load_sample(manifest: &SampleManifest, index: usize, height: usize, width: usize) -> Result<Sample> {
    let record = manifest
        .records
        .get(index)
        .ok_or_else(|| Error::Usage(format!("sample index {index} out of range")))?;
    let img = GrayImage::load(&manifest.image_path(index))?;
    let label = Alphabet::digits().parse_label(&record.label)?;
    Ok(Sample {
        id: record.path.clone(),
        image: prepare_image(&img, height, width)?,
        label,
    })
}

pub fn load_dataset(manifest: &SampleManifest, height: usize, width: usize) -> Result<Vec<Sample>> {
    (0..manifest.len())
        .into_par_iter()
        .map(|i| load_sample(manifest, i, height, width))
        .collect()
}

use std::fmt::Write as _;

use crate::ctc::Alphabet;
use crate::error::{Error, Result};
use crate::layers::conv_output_len;

/// What turns the image into a feature map before the recurrent head.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtractorKind {
    /// Convolution stem, max pooling and residual stages.
    Residual,
    /// The raw image columns are the frames. For tests of the recurrent head.
    Identity,
}

impl ExtractorKind {
    pub fn name(self) -> &'static str {
        match self {
            ExtractorKind::Residual => "residual",
            ExtractorKind::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "residual" => Ok(ExtractorKind::Residual),
            "identity" => Ok(ExtractorKind::Identity),
            other => Err(Error::Config(format!("unknown extractor '{other}'"))),
        }
    }
}

/// Declarative description of the network.
///
/// `channels` lists, in order: the 5×5 stem convolution, the two 3×3
/// convolutions of the identity-shortcut stage, then one entry per
/// downsampling residual stage. `scale` multiplies every channel count and
/// the recurrent/projection widths (rounded, at least 1); `output_units` is
/// never scaled.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub input_height: usize,
    pub input_width: usize,
    pub channels: Vec<usize>,
    pub lstm_hidden: usize,
    pub projection_units: usize,
    pub output_units: usize,
    pub scale: f64,
    pub extractor: ExtractorKind,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            input_height: 32,
            input_width: 128,
            channels: vec![64, 64, 64, 128, 256, 512],
            lstm_hidden: 100,
            projection_units: 100,
            output_units: 11,
            scale: 1.0,
            extractor: ExtractorKind::Residual,
        }
    }
}

/// Per-layer geometry derived from a config.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapePlan {
    /// `(channels, height, width)` after the stem convolution.
    pub stem: (usize, usize, usize),
    /// After max pooling.
    pub pooled: (usize, usize, usize),
    /// Output of each residual stage.
    pub stages: Vec<(usize, usize, usize)>,
    /// Feature map handed to the permute layer.
    pub features: (usize, usize, usize),
    /// Sequence length `T`.
    pub steps: usize,
    /// Per-frame feature size `C·H`.
    pub frame_features: usize,
    pub hidden: usize,
    pub projection: usize,
    pub output: usize,
}

pub const STEM_KERNEL: usize = 5;
pub const STEM_PADDING: usize = 1;
pub const POOL_KERNEL: usize = 3;
pub const POOL_STRIDE: usize = 1;

impl NetworkConfig {
    /// The reduced network used for desk-scale runs: one eighth of the
    /// widths on a 32×64 input.
    pub fn tiny() -> Self {
        NetworkConfig {
            input_width: 64,
            scale: 0.125,
            ..Default::default()
        }
    }

    fn scaled(&self, n: usize) -> usize {
        ((n as f64 * self.scale).round() as usize).max(1)
    }

    pub fn scaled_channels(&self) -> Vec<usize> {
        self.channels.iter().map(|&c| self.scaled(c)).collect()
    }

    pub fn hidden_units(&self) -> usize {
        self.scaled(self.lstm_hidden)
    }

    pub fn projection(&self) -> usize {
        self.scaled(self.projection_units)
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet::digits()
    }

    pub fn validate(&self) -> Result<()> {
        self.plan().map(|_| ())
    }

    /// Shape arithmetic for every layer; fails when a size collapses to zero
    /// or the configuration is inconsistent.
    pub fn plan(&self) -> Result<ShapePlan> {
        let alphabet = self.alphabet();
        if self.output_units != alphabet.size() {
            return Err(Error::Config(format!(
                "output_units is {} but the digit alphabet needs {}",
                self.output_units,
                alphabet.size()
            )));
        }
        if self.input_height == 0 || self.input_width == 0 {
            return Err(Error::Config("input size must be positive".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::Config(format!("scale {} must be positive", self.scale)));
        }
        if self.lstm_hidden == 0 || self.projection_units == 0 {
            return Err(Error::Config("hidden and projection sizes must be positive".into()));
        }
        let hidden = self.hidden_units();
        let projection = self.projection();
        let (h, w) = (self.input_height, self.input_width);

        if self.extractor == ExtractorKind::Identity {
            let features = (1, h, w);
            return Ok(ShapePlan {
                stem: features,
                pooled: features,
                stages: Vec::new(),
                features,
                steps: w,
                frame_features: h,
                hidden,
                projection,
                output: self.output_units,
            });
        }

        if self.channels.len() < 3 {
            return Err(Error::Config(format!(
                "channels needs at least 3 entries (stem and the first stage pair), got {}",
                self.channels.len()
            )));
        }
        if self.channels.contains(&0) {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        let ch = self.scaled_channels();
        if ch[2] != ch[0] {
            return Err(Error::Config(format!(
                "the identity-shortcut stage must keep {} channels, got {}",
                ch[0], ch[2]
            )));
        }
        let collapse = |what: &str| {
            Error::Config(format!(
                "{}x{} input collapses to zero size at {what}",
                self.input_height, self.input_width
            ))
        };
        let sh = conv_output_len(h, STEM_KERNEL, 1, STEM_PADDING).ok_or_else(|| collapse("stem"))?;
        let sw = conv_output_len(w, STEM_KERNEL, 1, STEM_PADDING).ok_or_else(|| collapse("stem"))?;
        let stem = (ch[0], sh, sw);
        if sh < POOL_KERNEL || sw < POOL_KERNEL {
            return Err(collapse("max pooling"));
        }
        let pooled = (
            ch[0],
            (sh - POOL_KERNEL) / POOL_STRIDE + 1,
            (sw - POOL_KERNEL) / POOL_STRIDE + 1,
        );
        // identity-shortcut stage keeps the geometry
        let mut stages = vec![pooled];
        let mut cur = pooled;
        for (i, &c) in ch[3..].iter().enumerate() {
            let what = format!("residual stage {}", i + 1);
            let oh = conv_output_len(cur.1, 3, 2, 1).ok_or_else(|| collapse(&what))?;
            let ow = conv_output_len(cur.2, 3, 2, 1).ok_or_else(|| collapse(&what))?;
            let sh = conv_output_len(cur.1, 1, 2, 0).ok_or_else(|| collapse(&what))?;
            let sw = conv_output_len(cur.2, 1, 2, 0).ok_or_else(|| collapse(&what))?;
            if (oh, ow) != (sh, sw) {
                return Err(Error::Config(format!(
                    "{what}: branch {oh}x{ow} and shortcut {sh}x{sw} disagree"
                )));
            }
            cur = (c, oh, ow);
            stages.push(cur);
        }
        Ok(ShapePlan {
            stem,
            pooled,
            stages,
            features: cur,
            steps: cur.2,
            frame_features: cur.0 * cur.1,
            hidden,
            projection,
            output: self.output_units,
        })
    }

    /// `key = value` lines, in the layout of a `[network]` config section.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let channels: Vec<String> = self.channels.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "input_height = {}", self.input_height);
        let _ = writeln!(s, "input_width = {}", self.input_width);
        let _ = writeln!(s, "channels = {}", channels.join(","));
        let _ = writeln!(s, "lstm_hidden = {}", self.lstm_hidden);
        let _ = writeln!(s, "projection_units = {}", self.projection_units);
        let _ = writeln!(s, "output_units = {}", self.output_units);
        let _ = writeln!(s, "scale = {}", self.scale);
        let _ = writeln!(s, "extractor = {}", self.extractor.name());
        s
    }

    /// Applies one `[network]` key; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |e: String| Error::Config(format!("network.{key}: {e}"));
        let int = |v: &str| v.parse::<usize>().map_err(|e| bad(e.to_string()));
        match key {
            "input_height" => self.input_height = int(value)?,
            "input_width" => self.input_width = int(value)?,
            "channels" => {
                self.channels = value
                    .split(',')
                    .map(|c| int(c.trim()))
                    .collect::<Result<Vec<_>>>()?
            }
            "lstm_hidden" => self.lstm_hidden = int(value)?,
            "projection_units" => self.projection_units = int(value)?,
            "output_units" => self.output_units = int(value)?,
            "scale" => {
                self.scale = parse_scale(value).map_err(bad)?;
            }
            "extractor" => self.extractor = ExtractorKind::parse(value)?,
            other => return Err(Error::Config(format!("unknown key network.{other}"))),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = NetworkConfig::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("bad network line '{line}'")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }
}

/// Accepts decimals and simple fractions such as `1/8`.
fn parse_scale(v: &str) -> std::result::Result<f64, String> {
    if let Some((n, d)) = v.split_once('/') {
        let n: f64 = n.trim().parse().map_err(|e| format!("{e}"))?;
        let d: f64 = d.trim().parse().map_err(|e| format!("{e}"))?;
        return Ok(n / d);
    }
    v.parse().map_err(|e| format!("{e}"))
}

//! 8-bit grayscale images in binary PGM (`P5`).
//!
//! Files are written as `P5\n<width> <height>\n255\n` followed by the raw
//! row-major bytes. The reader also accepts comments, arbitrary whitespace,
//! any `maxval` up to 255 and the ASCII `P2` variant.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, fill: u8) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("PGM: {m}"));
        let mut pos = 0;
        let token = |pos: &mut usize| -> Result<String> {
            loop {
                while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                    *pos += 1;
                }
                if *pos < bytes.len() && bytes[*pos] == b'#' {
                    while *pos < bytes.len() && bytes[*pos] != b'\n' {
                        *pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = *pos;
            while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if start == *pos {
                return Err(bad("truncated header"));
            }
            Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
        };
        let magic = token(&mut pos)?;
        if magic != "P5" && magic != "P2" {
            return Err(bad("not a P5 or P2 file"));
        }
        let num = |t: String| t.parse::<usize>().map_err(|_| bad("bad header number"));
        let width = num(token(&mut pos)?)?;
        let height = num(token(&mut pos)?)?;
        let maxval = num(token(&mut pos)?)?;
        if width == 0 || height == 0 {
            return Err(bad("zero-sized image"));
        }
        if maxval == 0 || maxval > 255 {
            return Err(bad("only 8-bit images are supported"));
        }
        let n = width * height;
        let raw: Vec<usize> = if magic == "P5" {
            // exactly one whitespace byte separates header and raster
            pos += 1;
            if bytes.len() < pos + n {
                return Err(bad("truncated raster"));
            }
            bytes[pos..pos + n].iter().map(|&b| b as usize).collect()
        } else {
            (0..n).map(|_| token(&mut pos).and_then(num)).collect::<Result<_>>()?
        };
        if raw.iter().any(|&v| v > maxval) {
            return Err(bad("sample exceeds maxval"));
        }
        let pixels = raw
            .into_iter()
            .map(|v| ((v * 255 + maxval / 2) / maxval) as u8)
            .collect();
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

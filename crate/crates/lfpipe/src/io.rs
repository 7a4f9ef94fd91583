//! PGM/PPM image I/O and JSON sidecar metadata.
//!
//! Binary netpbm (P5 grayscale, P6 color) with maxval 255 is the only
//! interchange format: minimal, bit-exact, and trivially inspectable.
//! Lightfield geometry travels in a JSON sidecar next to the image.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lightfield::{AngularConvention, LightfieldImage};
use crate::refocus::RefocusedImage;

/// Sidecar metadata describing a calibrated lightfield image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LightfieldMeta {
    /// Micro image size M.
    pub m: u32,
    /// Micro lens counts per row and per column.
    pub lens_grid: [usize; 2],
    pub channels: usize,
    #[serde(default = "default_convention")]
    pub convention: AngularConvention,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_note: Option<String>,
}

fn default_convention() -> AngularConvention {
    AngularConvention::Centered
}

/// A decoded PNM frame, planar storage.
#[derive(Debug, Clone)]
pub struct PnmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
}

// ---------------------------------------------------------------------------
// PNM parsing
// ---------------------------------------------------------------------------

struct HeaderScanner<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> HeaderScanner<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    /// Next whitespace-delimited token, skipping `#` comments.
    fn token(&mut self) -> Result<&'a [u8]> {
        loop {
            while self.pos < self.data.len() && self.data[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.data.len() && self.data[self.pos] == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format("unexpected end of header".into()));
        }
        Ok(&self.data[start..self.pos])
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("malformed number in header".into()))
    }
}

/// Decodes a binary P5/P6 buffer into planar samples.
pub fn decode_pnm(data: &[u8]) -> Result<PnmImage> {
    let mut scan = HeaderScanner::new(data);
    let magic = scan.token()?;
    let channels = match magic {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(Error::Format(format!(
                "unsupported magic {:?} (want P5 or P6)",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = scan.number()?;
    let height = scan.number()?;
    let maxval = scan.number()?;
    if maxval != 255 {
        return Err(Error::Format(format!(
            "unsupported sample depth: maxval {maxval}, want 255"
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format("zero-sized image".into()));
    }
    // exactly one whitespace byte separates header and raster
    let raster = scan.pos + 1;
    let need = width * height * channels;
    let body = data
        .get(raster..raster + need)
        .ok_or_else(|| Error::Format("truncated raster data".into()))?;

    // deinterleave into planes
    let mut pixels = vec![0u8; need];
    if channels == 1 {
        pixels.copy_from_slice(body);
    } else {
        let plane = width * height;
        for (i, chunk) in body.chunks_exact(3).enumerate() {
            pixels[i] = chunk[0];
            pixels[plane + i] = chunk[1];
            pixels[2 * plane + i] = chunk[2];
        }
    }
    Ok(PnmImage {
        width,
        height,
        channels,
        pixels,
    })
}

/// Encodes planar samples as binary P5 (1 channel) or P6 (3 channels).
pub fn encode_pnm(width: usize, height: usize, channels: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    if width == 0 || height == 0 {
        return Err(Error::Format("refusing to write zero-sized image".into()));
    }
    if pixels.len() != width * height * channels {
        return Err(Error::Format(format!(
            "plane size mismatch: {} samples for {}x{}x{}",
            pixels.len(),
            width,
            height,
            channels
        )));
    }
    let magic = match channels {
        1 => "P5",
        3 => "P6",
        other => return Err(Error::Format(format!("unsupported channel count {other}"))),
    };
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    if channels == 1 {
        out.extend_from_slice(pixels);
    } else {
        let plane = width * height;
        for i in 0..plane {
            out.push(pixels[i]);
            out.push(pixels[plane + i]);
            out.push(pixels[2 * plane + i]);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// File-level operations
// ---------------------------------------------------------------------------

/// Reads an image and its sidecar, returning a validated lightfield frame.
pub fn read_image(path: &Path, meta_path: &Path) -> Result<LightfieldImage> {
    let data = fs::read(path)?;
    let pnm = decode_pnm(&data)?;
    let meta: LightfieldMeta = serde_json::from_slice(&fs::read(meta_path)?)?;
    if meta.channels != pnm.channels {
        return Err(Error::MetaMismatch(format!(
            "metadata says {} channels, file has {}",
            meta.channels, pnm.channels
        )));
    }
    let expect_w = meta.lens_grid[0] * meta.m as usize;
    let expect_h = meta.lens_grid[1] * meta.m as usize;
    if expect_w != pnm.width || expect_h != pnm.height {
        return Err(Error::MetaMismatch(format!(
            "lens grid {}x{} with M={} implies {}x{}, file is {}x{}",
            meta.lens_grid[0], meta.lens_grid[1], meta.m, expect_w, expect_h, pnm.width, pnm.height
        )));
    }
    LightfieldImage::new(
        pnm.width,
        pnm.height,
        pnm.channels,
        meta.m,
        (meta.lens_grid[0], meta.lens_grid[1]),
        pnm.pixels,
    )
}

/// Writes a lightfield frame as P5/P6.
pub fn write_image(img: &LightfieldImage, path: &Path) -> Result<()> {
    let bytes = encode_pnm(img.width, img.height, img.channels, &img.pixels)?;
    fs::write(path, bytes)?;
    Ok(())
}

/// Writes the sidecar metadata for a frame.
pub fn write_meta(meta: &LightfieldMeta, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(meta)?)?;
    Ok(())
}

/// Writes a refocused result; with `with_mask` a companion `<path>.mask.pgm`
/// records validity (255 valid, 0 invalid). Invalid pixels are zero in the
/// main image already.
pub fn write_refocused(img: &RefocusedImage, path: &Path, with_mask: bool) -> Result<()> {
    let bytes = encode_pnm(img.width, img.height, img.channels, &img.pixels)?;
    fs::write(path, bytes)?;
    if with_mask {
        let mask_pixels: Vec<u8> = img.mask.iter().map(|&b| if b { 255 } else { 0 }).collect();
        let mask_bytes = encode_pnm(img.width, img.height, 1, &mask_pixels)?;
        let mut mask_path = path.as_os_str().to_owned();
        mask_path.push(".mask.pgm");
        fs::write(Path::new(&mask_path), mask_bytes)?;
    }
    Ok(())
}

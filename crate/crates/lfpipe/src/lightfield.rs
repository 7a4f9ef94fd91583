//! Domain types and index algebra for calibrated plenoptic sensor frames.
//!
//! A calibrated frame is a grid of micro images, each `M` pixels wide, where
//! the pixel behind a micro lens at angular offset `i` is an angular sample
//! of the same scene point. Two angular index conventions coexist: a centered
//! one (`i` in `[-c .. c]`, `c = (M-1)/2`) and a zero-based one
//! (`v = c + i` in `[0 .. M-1]`). Both are represented explicitly because the
//! filter machinery runs zero-based while the geometric model is centered.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rational refocus parameter `a = a'/M`.
///
/// The numerator selects the synthetic focal plane, in steps of one micro
/// image sample on the upsampled grid. Negative numerators are unsupported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RefocusShift {
    numerator: u32,
    micro_size: u32,
}

impl RefocusShift {
    /// Builds `a = a'/M`. `M` must be odd and at least 3 so the micro image
    /// center index `c = (M-1)/2` is an integer.
    pub fn new(numerator: u32, micro_size: u32) -> Result<Self> {
        if micro_size < 3 || micro_size.is_multiple_of(2) {
            return Err(Error::InvalidShift(format!(
                "micro image size must be odd and >= 3, got {micro_size}"
            )));
        }
        Ok(Self {
            numerator,
            micro_size,
        })
    }

    pub fn numerator(&self) -> u32 {
        self.numerator
    }

    pub fn micro_size(&self) -> u32 {
        self.micro_size
    }

    /// Center index `c = (M-1)/2`.
    pub fn center(&self) -> u32 {
        (self.micro_size - 1) / 2
    }

    /// The shift as a real number `a'/M`.
    pub fn value(&self) -> f64 {
        f64::from(self.numerator) / f64::from(self.micro_size)
    }

    /// True when the shift is a whole number of micro lenses (`a' % M == 0`).
    pub fn is_integer(&self) -> bool {
        self.numerator.is_multiple_of(self.micro_size)
    }

    /// Parses the `a'/M` notation used on the command line, e.g. `2/3`.
    pub fn parse(text: &str) -> Result<Self> {
        let (num, den) = text
            .split_once('/')
            .ok_or_else(|| Error::InvalidShift(format!("expected a'/M, got {text:?}")))?;
        let numerator: i64 = num
            .trim()
            .parse()
            .map_err(|_| Error::InvalidShift(format!("bad numerator {num:?}")))?;
        let micro: u32 = den
            .trim()
            .parse()
            .map_err(|_| Error::InvalidShift(format!("bad micro size {den:?}")))?;
        if numerator < 0 {
            return Err(Error::InvalidShift(format!(
                "negative numerators are unsupported, got {numerator}"
            )));
        }
        Self::new(numerator as u32, micro)
    }
}

impl std::fmt::Display for RefocusShift {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.numerator, self.micro_size)
    }
}

/// Which angular indexing convention a [`MicroCoord`] is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngularConvention {
    /// `i` in `[-c .. c]`, zero at the micro image center.
    Centered,
    /// `v` in `[0 .. M-1]`, as seen by the filter hardware.
    ZeroBased,
}

/// A (micro lens, angular sample) coordinate pair under an explicit convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MicroCoord {
    pub lens: i64,
    pub offset: i64,
    pub convention: AngularConvention,
}

impl MicroCoord {
    pub fn centered(lens: i64, offset: i64) -> Self {
        Self {
            lens,
            offset,
            convention: AngularConvention::Centered,
        }
    }

    pub fn zero_based(lens: i64, offset: i64) -> Self {
        Self {
            lens,
            offset,
            convention: AngularConvention::ZeroBased,
        }
    }

    /// Converts to the other convention for micro image size `m`.
    pub fn convert(&self, to: AngularConvention, m: u32) -> Result<Self> {
        self.check(m)?;
        let c = i64::from((m - 1) / 2);
        if self.convention == to {
            return Ok(*self);
        }
        let offset = match to {
            AngularConvention::ZeroBased => self.offset + c,
            AngularConvention::Centered => self.offset - c,
        };
        Ok(Self {
            lens: self.lens,
            offset,
            convention: to,
        })
    }

    /// Validates the offset range for micro image size `m`.
    pub fn check(&self, m: u32) -> Result<()> {
        let c = i64::from((m - 1) / 2);
        let ok = match self.convention {
            AngularConvention::Centered => self.offset.abs() <= c,
            AngularConvention::ZeroBased => (0..i64::from(m)).contains(&self.offset),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "angular offset {} out of range for M={m} ({:?})",
                self.offset, self.convention
            )))
        }
    }
}

/// Converts a (lens `j`, centered angular index `i`) pair into the raw sensor
/// column `k = j*M + c + i`.
pub fn translate_index(lens: i64, i_centered: i64, m: u32) -> Result<i64> {
    MicroCoord::centered(lens, i_centered).check(m)?;
    let c = i64::from((m - 1) / 2);
    Ok(lens * i64::from(m) + c + i_centered)
}

/// Inverse of [`translate_index`]: recovers `(j, i)` from a sensor column.
pub fn inverse_translate(k: i64, m: u32) -> (i64, i64) {
    let m = i64::from(m);
    let c = (m - 1) / 2;
    let lens = k.div_euclid(m);
    let i = k.rem_euclid(m) - c;
    (lens, i)
}

/// A calibrated 8-bit lightfield frame with planar channel storage.
///
/// `pixels` holds `channels` planes of `width * height` samples each,
/// row-major within a plane. Micro image cropping and center detection are
/// assumed to have happened upstream; this type only checks consistency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LightfieldImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub bit_depth: u32,
    pub micro_size: u32,
    pub lens_grid: (usize, usize),
    pub pixels: Vec<u8>,
}

impl LightfieldImage {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        micro_size: u32,
        lens_grid: (usize, usize),
        pixels: Vec<u8>,
    ) -> Result<Self> {
        let img = Self {
            width,
            height,
            channels,
            bit_depth: 8,
            micro_size,
            lens_grid,
            pixels,
        };
        let report = validate(&img);
        if report.is_valid() {
            Ok(img)
        } else {
            Err(Error::Geometry(report.to_string()))
        }
    }

    /// One channel plane, row-major.
    pub fn plane(&self, channel: usize) -> &[u8] {
        let n = self.width * self.height;
        &self.pixels[channel * n..(channel + 1) * n]
    }

    /// Row `y` of channel `channel`.
    pub fn row(&self, channel: usize, y: usize) -> &[u8] {
        let start = channel * self.width * self.height + y * self.width;
        &self.pixels[start..start + self.width]
    }

    /// Column `x` of channel `channel`, gathered into a fresh vector.
    pub fn column(&self, channel: usize, x: usize) -> Vec<u8> {
        let plane = self.plane(channel);
        (0..self.height)
            .map(|y| plane[y * self.width + x])
            .collect()
    }
}

/// One violated invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

/// Report listing every invariant violation; empty iff the frame is valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: &'static str, message: String) {
        self.violations.push(Violation { field, message });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_valid() {
            return write!(f, "valid");
        }
        for v in &self.violations {
            writeln!(f, "{}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of a frame and reports all violations.
pub fn validate(img: &LightfieldImage) -> ValidationReport {
    let mut report = ValidationReport::default();
    let m = img.micro_size as usize;

    if img.micro_size < 3 || img.micro_size.is_multiple_of(2) {
        report.push(
            "micro_size",
            format!("must be odd and >= 3, got {}", img.micro_size),
        );
    }
    if img.bit_depth != 8 {
        report.push(
            "bit_depth",
            format!("only 8-bit supported, got {}", img.bit_depth),
        );
    }
    if img.channels != 1 && img.channels != 3 {
        report.push("channels", format!("must be 1 or 3, got {}", img.channels));
    }
    if img.width == 0 || img.height == 0 {
        report.push("dimensions", "zero-sized frame".to_string());
    }
    if m != 0 {
        if !img.width.is_multiple_of(m) {
            report.push(
                "width",
                format!("{} not divisible by micro size {}", img.width, m),
            );
        }
        if !img.height.is_multiple_of(m) {
            report.push(
                "height",
                format!("{} not divisible by micro size {}", img.height, m),
            );
        }
        if img.width.is_multiple_of(m) && img.lens_grid.0 * m != img.width {
            report.push(
                "lens_grid",
                format!(
                    "horizontal lens count {} * M != width {}",
                    img.lens_grid.0, img.width
                ),
            );
        }
        if img.height.is_multiple_of(m) && img.lens_grid.1 * m != img.height {
            report.push(
                "lens_grid",
                format!(
                    "vertical lens count {} * M != height {}",
                    img.lens_grid.1, img.height
                ),
            );
        }
    }
    let expected = img.width * img.height * img.channels;
    if img.pixels.len() != expected {
        report.push(
            "pixels",
            format!("expected {} samples, got {}", expected, img.pixels.len()),
        );
    }
    report
}

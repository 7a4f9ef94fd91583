//! Reference spatial-domain refocusing.
//!
//! This is the golden model the filter pipeline is verified against. It
//! evaluates refocusing directly as a per-view shift-and-integrate on the
//! upsampled micro image grid: view `v` (zero-based) of output sample `k`
//! reads the view signal at position `k - D + a'(2c - v)`, snapped to the
//! micro image grid (nearest-neighbor) or blended between adjacent micro
//! images (linear). `D` is a fixed alignment delay placing the output in
//! phase with the causal filter hardware.
//!
//! Out-of-range taps read as zero and flag the output invalid in the
//! returned mask, mirroring the pipeline's write-enable gating, so both
//! paths stay bit-comparable on the valid region.

use crate::error::{Error, Result};
use crate::lightfield::{LightfieldImage, RefocusShift};

/// Micro image upsampling flavor used during integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpMode {
    /// Repeat whole micro images (sample-and-hold).
    NearestNeighbor,
    /// Blend same-view samples of consecutive micro images, replicating
    /// edge samples at the last micro image.
    Linear,
}

/// Arithmetic model for the integration divider.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecisionMode {
    /// Wide accumulator, one division at the very end, round half up.
    Exact,
    /// 8-bit stored product per tap and 8-bit intermediates between passes,
    /// as the hardware computes it.
    HardwareFaithful,
    /// No division at all; callers must keep inputs small enough that the
    /// plain sum cannot clip.
    SumOnly,
}

impl PrecisionMode {
    /// Largest input sample value that cannot clip an undivided 1-D sum.
    pub fn sum_only_limit(m: u32) -> u32 {
        255 / m
    }
}

// ---------------------------------------------------------------------------
// Tap geometry shared with the switch generator
// ---------------------------------------------------------------------------

/// One view's contribution to an output sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ViewTap {
    /// Zero-based view index `v = c + i`.
    pub view: u32,
    /// Raw sensor index of the snapped sample; may be out of range.
    pub tap: i64,
    /// Sub-lens phase remainder in `[0, M)`; the linear blend weight
    /// numerator toward the next micro image.
    pub lambda: u32,
}

/// Output alignment delay `D` for a shift.
///
/// Pinned so the zero-shift filter emits a micro image integral the moment
/// its last sample arrives, the moving-average shift stays a plain sliding
/// window, and integer shifts keep their integral projections on the
/// `(k+1)*M - 1` phase.
pub(crate) fn alignment_delay(shift: &RefocusShift) -> i64 {
    let m = i64::from(shift.micro_size());
    let ap = i64::from(shift.numerator());
    (m - 1) + ((ap % m) * (m - 1)) / m
}

/// Per-view snapped taps of output sample `k`.
pub(crate) fn view_taps(shift: &RefocusShift, k: i64) -> Vec<ViewTap> {
    let m = i64::from(shift.micro_size());
    let ap = i64::from(shift.numerator());
    let two_c = m - 1;
    let d = alignment_delay(shift);
    (0..m)
        .map(|v| {
            let u = k - d + ap * (two_c - v);
            ViewTap {
                view: v as u32,
                tap: u.div_euclid(m) * m + v,
                lambda: u.rem_euclid(m) as u32,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Stored product table
// ---------------------------------------------------------------------------

/// Precomputed 256-entry quotient table standing in for the divider.
///
/// `HardwareFaithful` (and the unused `Exact` case) quantize `v / M` with
/// round half up; `SumOnly` leaves values untouched since that mode never
/// divides.
pub fn stored_product_lut(m: u32, prec: PrecisionMode) -> [u8; 256] {
    let mut table = [0u8; 256];
    for (v, entry) in table.iter_mut().enumerate() {
        *entry = match prec {
            PrecisionMode::SumOnly => v as u8,
            _ => div_round_half_up(v as u32, m) as u8,
        };
    }
    table
}

/// `round_half_up(x / d)` for positive integers. All divisors in this crate
/// are odd, so exact halves cannot occur and the rounding is unambiguous.
pub(crate) fn div_round_half_up(x: u32, d: u32) -> u32 {
    (x + d / 2) / d
}

// ---------------------------------------------------------------------------
// 1-D passes
// ---------------------------------------------------------------------------

/// Raw (undivided) result of one 1-D refocusing pass.
#[derive(Debug, Clone)]
pub(crate) struct PassOutput {
    /// Per-sample accumulator values before the final division.
    pub raw: Vec<u32>,
    /// True where every contributing tap was in range and valid.
    pub mask: Vec<bool>,
    /// What the raw values must be divided by to obtain sample means.
    pub denom: u32,
}

/// One refocusing pass over a row of (possibly wide) samples.
///
/// `in_mask` carries per-sample validity from a previous pass; `None` means
/// all inputs valid. Output length equals input length.
pub(crate) fn refocus_pass(
    values: &[u32],
    in_mask: Option<&[bool]>,
    shift: &RefocusShift,
    mode: InterpMode,
    prec: PrecisionMode,
) -> Result<PassOutput> {
    let m = shift.micro_size();
    let len = values.len();
    if !len.is_multiple_of(m as usize) {
        return Err(Error::LengthNotDivisible { len, m });
    }
    if prec == PrecisionMode::SumOnly {
        let limit = PrecisionMode::sum_only_limit(m);
        if let Some(&v) = values.iter().find(|&&v| v > limit) {
            return Err(Error::SumOnlyOverflow { limit, found: v });
        }
    }
    let lut = stored_product_lut(m, prec);
    let sample_ok = |t: i64| -> bool {
        t >= 0 && (t as usize) < len && in_mask.is_none_or(|mask| mask[t as usize])
    };
    let get = |t: i64| -> u32 {
        if t >= 0 && (t as usize) < len {
            values[t as usize]
        } else {
            0
        }
    };

    let mut raw = vec![0u32; len];
    let mut mask = vec![false; len];
    for k in 0..len {
        let mut sum = 0u32;
        let mut valid = true;
        for vt in view_taps(shift, k as i64) {
            match mode {
                InterpMode::NearestNeighbor => {
                    valid &= sample_ok(vt.tap);
                    sum += tap_value(get(vt.tap), prec, &lut, m);
                }
                InterpMode::Linear => {
                    // Partner is the same view one micro image ahead,
                    // replicated at the row's last micro image.
                    let partner = if vt.tap + i64::from(m) < len as i64 {
                        vt.tap + i64::from(m)
                    } else {
                        vt.tap
                    };
                    valid &= sample_ok(vt.tap);
                    if vt.lambda > 0 {
                        valid &= sample_ok(partner);
                    }
                    let num = (m - vt.lambda) * get(vt.tap) + vt.lambda * get(partner);
                    sum += match prec {
                        PrecisionMode::Exact => num,
                        PrecisionMode::HardwareFaithful => {
                            u32::from(lut[div_round_half_up(num, m) as usize])
                        }
                        PrecisionMode::SumOnly => div_round_half_up(num, m),
                    };
                }
            }
        }
        if prec == PrecisionMode::HardwareFaithful {
            sum = sum.min(255);
        }
        raw[k] = sum;
        mask[k] = valid;
    }
    let denom = match (prec, mode) {
        (PrecisionMode::Exact, InterpMode::NearestNeighbor) => m,
        (PrecisionMode::Exact, InterpMode::Linear) => m * m,
        _ => 1,
    };
    Ok(PassOutput { raw, mask, denom })
}

fn tap_value(x: u32, prec: PrecisionMode, lut: &[u8; 256], _m: u32) -> u32 {
    match prec {
        PrecisionMode::Exact | PrecisionMode::SumOnly => x,
        PrecisionMode::HardwareFaithful => u32::from(lut[x as usize]),
    }
}

/// Refocuses one row, returning 8-bit samples and a validity mask of the
/// same length. Invalid samples are written as zero.
pub fn refocus_1d(
    row: &[u8],
    shift: &RefocusShift,
    mode: InterpMode,
    prec: PrecisionMode,
) -> Result<(Vec<u8>, Vec<bool>)> {
    let wide: Vec<u32> = row.iter().map(|&v| u32::from(v)).collect();
    let pass = refocus_pass(&wide, None, shift, mode, prec)?;
    Ok(finalize(&pass))
}

pub(crate) fn finalize(pass: &PassOutput) -> (Vec<u8>, Vec<bool>) {
    let out = pass
        .raw
        .iter()
        .zip(&pass.mask)
        .map(|(&raw, &ok)| {
            if ok {
                div_round_half_up(raw, pass.denom) as u8
            } else {
                0
            }
        })
        .collect();
    (out, pass.mask.clone())
}

// ---------------------------------------------------------------------------
// 2-D refocusing
// ---------------------------------------------------------------------------

/// A refocused frame plus its validity mask (one flag per pixel position,
/// shared across channels).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefocusedImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Planar channel storage, invalid pixels written as zero.
    pub pixels: Vec<u8>,
    /// Row-major, true where the output is fully formed.
    pub mask: Vec<bool>,
}

/// Refocuses a frame horizontally then vertically.
///
/// `Exact` carries wide accumulators between the passes and divides once at
/// the end; `HardwareFaithful` quantizes the intermediate rows to 8 bits
/// exactly like the streaming hardware does.
pub fn refocus_2d(
    img: &LightfieldImage,
    shift: &RefocusShift,
    mode: InterpMode,
    prec: PrecisionMode,
) -> Result<RefocusedImage> {
    if shift.micro_size() != img.micro_size {
        return Err(Error::MetaMismatch(format!(
            "shift micro size {} != image micro size {}",
            shift.micro_size(),
            img.micro_size
        )));
    }
    if prec == PrecisionMode::SumOnly {
        let limit = 255 / (img.micro_size * img.micro_size);
        if let Some(&v) = img.pixels.iter().find(|&&v| u32::from(v) > limit) {
            return Err(Error::SumOnlyOverflow {
                limit,
                found: u32::from(v),
            });
        }
    }
    let (w, h) = (img.width, img.height);
    let mut pixels = vec![0u8; w * h * img.channels];
    let mut mask = vec![false; w * h];

    for ch in 0..img.channels {
        // Horizontal pass; keep raw accumulators for the exact path.
        let mut inter = vec![0u32; w * h];
        let mut inter_mask = vec![false; w * h];
        let mut denom_h = 1u32;
        for y in 0..h {
            let row: Vec<u32> = img.row(ch, y).iter().map(|&v| u32::from(v)).collect();
            let pass = refocus_pass(&row, None, shift, mode, prec)?;
            denom_h = pass.denom;
            let quantize = prec == PrecisionMode::HardwareFaithful;
            for x in 0..w {
                inter[y * w + x] = if quantize {
                    pass.raw[x].min(255)
                } else {
                    pass.raw[x]
                };
                inter_mask[y * w + x] = pass.mask[x];
            }
        }

        // Vertical pass over the intermediate columns.
        for x in 0..w {
            let col: Vec<u32> = (0..h).map(|y| inter[y * w + x]).collect();
            let col_mask: Vec<bool> = (0..h).map(|y| inter_mask[y * w + x]).collect();
            let pass = refocus_pass(&col, Some(&col_mask), shift, mode, prec)?;
            let denom = denom_h.saturating_mul(pass.denom);
            for y in 0..h {
                let ok = pass.mask[y];
                let value = if ok {
                    div_round_half_up(pass.raw[y], denom).min(255) as u8
                } else {
                    0
                };
                pixels[ch * w * h + y * w + x] = value;
                if ch == 0 {
                    mask[y * w + x] = ok;
                } else {
                    mask[y * w + x] &= ok;
                }
            }
        }
    }
    Ok(RefocusedImage {
        width: w,
        height: h,
        channels: img.channels,
        pixels,
        mask,
    })
}

// ---------------------------------------------------------------------------
// Integral projection (resolution-reducing form)
// ---------------------------------------------------------------------------

/// Classical integral projection with integer shift `a`, reducing a row of
/// `K` samples to `K / M` output samples.
///
/// `out[k] = (1/M) * sum_i row[k' + i*(a*M - 1)]` with `k' = (k+1)*M - 1`.
/// Outputs whose taps leave the row are flagged invalid.
pub fn integral_projection_1d(row: &[u8], a: u32, m: u32) -> Result<(Vec<u8>, Vec<bool>)> {
    if a < 1 {
        return Err(Error::InvalidArgument(
            "integral projection requires a >= 1".into(),
        ));
    }
    if m < 3 || m.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "micro image size must be odd and >= 3, got {m}"
        )));
    }
    let len = row.len();
    if !len.is_multiple_of(m as usize) {
        return Err(Error::LengthNotDivisible { len, m });
    }
    let out_len = len / m as usize;
    let step = i64::from(a) * i64::from(m) - 1;
    let mut out = vec![0u8; out_len];
    let mut mask = vec![false; out_len];
    for k in 0..out_len {
        let base = (k as i64 + 1) * i64::from(m) - 1;
        let mut sum = 0u32;
        let mut valid = true;
        for i in 0..i64::from(m) {
            let t = base + i * step;
            if t >= 0 && (t as usize) < len {
                sum += u32::from(row[t as usize]);
            } else {
                valid = false;
            }
        }
        mask[k] = valid;
        out[k] = if valid {
            div_round_half_up(sum, m) as u8
        } else {
            0
        };
    }
    Ok((out, mask))
}

// ---------------------------------------------------------------------------
// Micro image upsampling helper
// ---------------------------------------------------------------------------

/// Upsamples a row at micro image granularity, keeping its length.
///
/// Nearest-neighbor holds the most recent completed micro image sample:
/// `out[k] = row[k - (k+1) % M]`. Linear ramps toward the same-view sample
/// of the next micro image instead of holding, replicating edge samples at
/// the row borders.
pub fn upsample_row(row: &[u8], m: u32, mode: InterpMode) -> Result<Vec<u8>> {
    let len = row.len();
    if !len.is_multiple_of(m as usize) {
        return Err(Error::LengthNotDivisible { len, m });
    }
    let mi = i64::from(m);
    let clamp = |t: i64| -> u8 { row[t.clamp(0, len as i64 - 1) as usize] };
    Ok((0..len as i64)
        .map(|k| {
            let phase = (k + 1).rem_euclid(mi) as u32;
            let snap = k - i64::from(phase);
            match mode {
                InterpMode::NearestNeighbor => clamp(snap),
                InterpMode::Linear => {
                    let a = u32::from(clamp(snap));
                    let b = if snap + mi < len as i64 {
                        u32::from(clamp(snap + mi))
                    } else {
                        a
                    };
                    div_round_half_up((m - phase) * a + phase * b, m) as u8
                }
            }
        })
        .collect())
}

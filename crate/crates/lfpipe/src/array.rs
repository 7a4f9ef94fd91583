//! Parallelized 2-D processing array built from 1-D filter modules.
//!
//! Frames flow through horizontal row modules first; their outputs pass
//! skewed registers that stagger parallel rows by one cycle each, so the
//! demultiplexers (driven by a pixel counter) can hand every column a
//! serial sample stream. Identical modules then filter the columns, and an
//! optional trailing skew-register array re-aligns column outputs.
//!
//! Functionally the array is equivalent to running every row and then
//! every column through one module; the parallel degree changes scheduling
//! only. The cycle accounting reproduces the closed-form model in
//! [`crate::timing`] at maximal parallelization.

use crate::error::{Error, Result};
use crate::fir::FirModule;
use crate::lightfield::{validate, LightfieldImage, RefocusShift};
use crate::refocus::{div_round_half_up, InterpMode, PrecisionMode, RefocusedImage};

/// Requested degree of data parallelism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Iota {
    /// One module per row and per column.
    Max,
    Fixed(u64),
}

/// Array configuration for one refocusing run.
#[derive(Debug, Clone, Copy)]
pub struct ArrayConfig {
    pub iota: Iota,
    pub shift: RefocusShift,
    pub prec: PrecisionMode,
    pub interp: InterpMode,
    /// Trailing skew registers behind the column modules; affects only
    /// output alignment cycles.
    pub trailing_skew: bool,
}

impl ArrayConfig {
    pub fn new(shift: RefocusShift) -> Self {
        Self {
            iota: Iota::Max,
            shift,
            prec: PrecisionMode::Exact,
            interp: InterpMode::NearestNeighbor,
            trailing_skew: true,
        }
    }

    fn checked_iota(&self, width: usize, height: usize) -> Result<(u64, u64)> {
        let limit = width.max(height) as u64;
        let iota = match self.iota {
            Iota::Max => limit,
            Iota::Fixed(n) => n,
        };
        if iota < 1 || iota > limit {
            return Err(Error::InvalidArgument(format!(
                "parallel degree {iota} outside 1..={limit}"
            )));
        }
        Ok((iota.min(height as u64), iota.min(width as u64)))
    }
}

/// A processed frame plus the cycle counts of the simulated schedule.
#[derive(Debug, Clone)]
pub struct FrameResult {
    pub image: RefocusedImage,
    /// Steps from the frame's first pixel entering to its last output.
    pub first_frame_cycles: u64,
    /// Steps between consecutive frame completions once the pipeline is hot.
    pub steady_state_cycles: u64,
}

/// Vertical module a column's samples are routed to.
pub fn vertical_module_of(column: usize, iota_cols: u64) -> u64 {
    column as u64 % iota_cols
}

/// Runs one frame through the module array.
pub fn process_frame(img: &LightfieldImage, cfg: &ArrayConfig) -> Result<FrameResult> {
    let report = validate(img);
    if !report.is_valid() {
        return Err(Error::Geometry(report.to_string()));
    }
    if cfg.shift.micro_size() != img.micro_size {
        return Err(Error::MetaMismatch(format!(
            "shift micro size {} != image micro size {}",
            cfg.shift.micro_size(),
            img.micro_size
        )));
    }
    let (iota_rows, iota_cols) = cfg.checked_iota(img.width, img.height)?;
    let image = run_array(img, cfg)?;
    let (first, steady) = schedule_cycles(img.width as u64, img.height as u64, cfg, iota_rows);
    let _ = iota_cols;
    Ok(FrameResult {
        image,
        first_frame_cycles: first,
        steady_state_cycles: steady,
    })
}

/// Runs a pipelined frame sequence; all frames must share one geometry.
pub fn process_sequence(frames: &[LightfieldImage], cfg: &ArrayConfig) -> Result<Vec<FrameResult>> {
    if let Some(first) = frames.first() {
        for f in frames.iter().skip(1) {
            if f.width != first.width
                || f.height != first.height
                || f.channels != first.channels
                || f.micro_size != first.micro_size
            {
                return Err(Error::Geometry(
                    "frame geometry mismatch in sequence".into(),
                ));
            }
        }
    }
    frames.iter().map(|f| process_frame(f, cfg)).collect()
}

// ---------------------------------------------------------------------------
// Functional data path
// ---------------------------------------------------------------------------

fn run_array(img: &LightfieldImage, cfg: &ArrayConfig) -> Result<RefocusedImage> {
    let (w, h) = (img.width, img.height);
    let mut row_module = FirModule::for_shift(&cfg.shift, cfg.prec, cfg.interp);
    let mut col_module = FirModule::for_shift(&cfg.shift, cfg.prec, cfg.interp);

    let mut pixels = vec![0u8; w * h * img.channels];
    let mut mask = vec![false; w * h];
    for ch in 0..img.channels {
        let mut inter = vec![0u32; w * h];
        let mut inter_mask = vec![false; w * h];
        let all_valid = vec![true; w];
        for y in 0..h {
            let row: Vec<u32> = img.row(ch, y).iter().map(|&v| u32::from(v)).collect();
            let res = row_module.run_stream_wide(&row, &all_valid)?;
            for x in 0..w {
                inter[y * w + x] = res.raw[x];
                inter_mask[y * w + x] = res.mask[x];
            }
        }
        let denom_h = row_module.output_denominator();
        for x in 0..w {
            let col: Vec<u32> = (0..h).map(|y| inter[y * w + x]).collect();
            let col_mask: Vec<bool> = (0..h).map(|y| inter_mask[y * w + x]).collect();
            let res = col_module.run_stream_wide(&col, &col_mask)?;
            let denom = denom_h * col_module.output_denominator();
            for y in 0..h {
                let ok = res.mask[y];
                pixels[ch * w * h + y * w + x] = if ok {
                    div_round_half_up(res.raw[y], denom).min(255) as u8
                } else {
                    0
                };
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
// Cycle schedule
// ---------------------------------------------------------------------------

/// Emission step of output pixel `(k, l)` relative to frame admission.
fn emission_step(
    k: u64,
    l: u64,
    width: u64,
    latency: u64,
    iota_rows: u64,
    trailing_skew: bool,
) -> u64 {
    let block = l / iota_rows;
    let skew = l % iota_rows;
    let beta = width + iota_rows - 1;
    let trailing = if trailing_skew { k } else { 0 };
    block * beta + k + latency + skew + latency + trailing
}

fn schedule_cycles(width: u64, height: u64, cfg: &ArrayConfig, iota_rows: u64) -> (u64, u64) {
    let latency = FirModule::for_shift(&cfg.shift, cfg.prec, cfg.interp).pipeline_latency();
    let first = emission_step(
        width - 1,
        height - 1,
        width,
        latency,
        iota_rows,
        cfg.trailing_skew,
    );
    let blocks = height.div_ceil(iota_rows);
    let eta_sub = (width - 1) + (height - 1);
    let steady = if blocks == 1 {
        eta_sub.max(1)
    } else {
        // serialized row blocks keep the input stage busy past eta_sub
        eta_sub.max(blocks * (width + iota_rows - 1))
    };
    (first, steady)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refocus::{refocus_2d, InterpMode, PrecisionMode};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn shift(ap: u32, m: u32) -> RefocusShift {
        RefocusShift::new(ap, m).unwrap()
    }

    fn random_frame(
        rng: &mut StdRng,
        w: usize,
        h: usize,
        m: u32,
        channels: usize,
    ) -> LightfieldImage {
        let pixels: Vec<u8> = (0..w * h * channels).map(|_| rng.gen()).collect();
        LightfieldImage::new(w, h, channels, m, (w / m as usize, h / m as usize), pixels).unwrap()
    }

    fn cfg(ap: u32, m: u32) -> ArrayConfig {
        ArrayConfig::new(shift(ap, m))
    }

    #[test]
    fn parallel_degree_does_not_change_outputs() {
        let mut rng = StdRng::seed_from_u64(31);
        let img = random_frame(&mut rng, 9, 9, 3, 1);
        let mut outputs = Vec::new();
        for iota in [Iota::Fixed(1), Iota::Fixed(3), Iota::Max] {
            let mut c = cfg(1, 3);
            c.iota = iota;
            outputs.push(process_frame(&img, &c).unwrap());
        }
        assert_eq!(outputs[0].image, outputs[1].image);
        assert_eq!(outputs[1].image, outputs[2].image);
        // only cycle counts differ
        assert!(outputs[0].first_frame_cycles > outputs[2].first_frame_cycles);
    }

    #[test]
    fn constant_frame_stays_constant() {
        let img = LightfieldImage::new(9, 9, 1, 3, (3, 3), vec![123; 81]).unwrap();
        let res = process_frame(&img, &cfg(1, 3)).unwrap();
        let mut any = false;
        for (px, ok) in res.image.pixels.iter().zip(&res.image.mask) {
            if *ok {
                assert_eq!(*px, 123);
                any = true;
            }
        }
        assert!(any);
    }

    #[test]
    fn array_matches_reference_2d_path() {
        let mut rng = StdRng::seed_from_u64(32);
        for m in [3u32, 5] {
            for ap in [0, 1, 2, m] {
                let img = random_frame(&mut rng, 6 * m as usize, 6 * m as usize, m, 1);
                for (prec, interp) in [
                    (PrecisionMode::Exact, InterpMode::NearestNeighbor),
                    (PrecisionMode::HardwareFaithful, InterpMode::NearestNeighbor),
                    (PrecisionMode::Exact, InterpMode::Linear),
                    (PrecisionMode::HardwareFaithful, InterpMode::Linear),
                ] {
                    let mut c = cfg(ap, m);
                    c.prec = prec;
                    c.interp = interp;
                    let res = process_frame(&img, &c).unwrap();
                    let expect = refocus_2d(&img, &shift(ap, m), interp, prec).unwrap();
                    assert_eq!(
                        res.image.mask, expect.mask,
                        "m={m} ap={ap} {prec:?} {interp:?}"
                    );
                    assert_eq!(
                        res.image.pixels, expect.pixels,
                        "m={m} ap={ap} {prec:?} {interp:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn three_channel_frames_are_processed_per_plane() {
        let mut rng = StdRng::seed_from_u64(33);
        let img = random_frame(&mut rng, 9, 9, 3, 3);
        let res = process_frame(&img, &cfg(1, 3)).unwrap();
        let expect = refocus_2d(
            &img,
            &shift(1, 3),
            InterpMode::NearestNeighbor,
            PrecisionMode::Exact,
        )
        .unwrap();
        assert_eq!(res.image.pixels, expect.pixels);
    }

    #[test]
    fn max_parallel_first_frame_matches_model() {
        // reference configuration: unit numerator, nearest neighbor
        let img = LightfieldImage::new(9, 9, 1, 3, (3, 3), vec![7; 81]).unwrap();
        let res = process_frame(&img, &cfg(1, 3)).unwrap();
        assert_eq!(res.first_frame_cycles, 32);
        assert_eq!(res.steady_state_cycles, 16);
    }

    #[test]
    fn sequence_reports_pipelined_cycles() {
        let img = LightfieldImage::new(9, 9, 1, 3, (3, 3), vec![50; 81]).unwrap();
        let frames = vec![img.clone(), img];
        let results = process_sequence(&frames, &cfg(1, 3)).unwrap();
        assert_eq!(results[0].image.pixels, results[1].image.pixels);
        assert!(results[1].steady_state_cycles < results[0].first_frame_cycles);
        assert_eq!(results[1].steady_state_cycles, 16);
    }

    #[test]
    fn sequence_outputs_match_reference() {
        let mut rng = StdRng::seed_from_u64(34);
        let frames: Vec<LightfieldImage> =
            (0..3).map(|_| random_frame(&mut rng, 9, 9, 3, 1)).collect();
        let results = process_sequence(&frames, &cfg(2, 3)).unwrap();
        for (frame, res) in frames.iter().zip(&results) {
            let expect = refocus_2d(
                frame,
                &shift(2, 3),
                InterpMode::NearestNeighbor,
                PrecisionMode::Exact,
            )
            .unwrap();
            assert_eq!(res.image.pixels, expect.pixels);
        }
    }

    #[test]
    fn sequence_rejects_geometry_mismatch() {
        let a = LightfieldImage::new(9, 9, 1, 3, (3, 3), vec![0; 81]).unwrap();
        let b = LightfieldImage::new(15, 9, 1, 3, (5, 3), vec![0; 135]).unwrap();
        assert!(process_sequence(&[a, b], &cfg(1, 3)).is_err());
    }

    #[test]
    fn iota_out_of_range_is_rejected() {
        let img = LightfieldImage::new(9, 9, 1, 3, (3, 3), vec![0; 81]).unwrap();
        for bad in [Iota::Fixed(0), Iota::Fixed(10)] {
            let mut c = cfg(1, 3);
            c.iota = bad;
            assert!(process_frame(&img, &c).is_err());
        }
    }

    #[test]
    fn columns_route_to_fixed_vertical_modules_without_conflicts() {
        // the demultiplexer assignment is a pure function of the column,
        // and the skewed schedule never feeds one module twice per cycle
        for (w, h) in [(9u64, 9u64), (15, 9)] {
            for iota in [1u64, 3, 5, 9] {
                if iota > h {
                    continue;
                }
                let beta = w + iota - 1;
                let mut seen = std::collections::HashSet::new();
                for l in 0..h {
                    for k in 0..w {
                        let module = vertical_module_of(k as usize, iota.min(w));
                        let ingest = (l / iota) * beta + k + (l % iota);
                        assert!(
                            seen.insert((module, ingest)),
                            "conflict at module {module} cycle {ingest} (w={w} h={h} iota={iota})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn first_frame_cycles_match_model_exhaustively() {
        // every constructible geometry up to 30 pixels per side, including
        // non-square frames, at the unit-numerator reference configuration
        use crate::timing::{steps_first_frame, steps_subsequent, TimingParams};
        for m in [3u32, 5] {
            let sides: Vec<usize> = (1..=30 / m as usize).map(|j| j * m as usize).collect();
            for &w in &sides {
                for &h in &sides {
                    let img = LightfieldImage::new(
                        w,
                        h,
                        1,
                        m,
                        (w / m as usize, h / m as usize),
                        vec![64; w * h],
                    )
                    .unwrap();
                    let res = process_frame(&img, &cfg(1, m)).unwrap();
                    let params = TimingParams::new(
                        1,
                        u64::from(m),
                        w as u64,
                        h as u64,
                        10e-9,
                        w.max(h) as u64,
                    )
                    .unwrap();
                    assert_eq!(
                        res.first_frame_cycles,
                        steps_first_frame(&params),
                        "w={w} h={h} m={m}"
                    );
                    assert_eq!(
                        res.steady_state_cycles,
                        steps_subsequent(w as u64, h as u64).max(1),
                        "w={w} h={h} m={m}"
                    );
                }
            }
        }
    }

    #[test]
    fn trailing_skew_changes_only_alignment_cycles() {
        let mut rng = StdRng::seed_from_u64(35);
        let img = random_frame(&mut rng, 9, 9, 3, 1);
        let mut with = cfg(1, 3);
        with.trailing_skew = true;
        let mut without = cfg(1, 3);
        without.trailing_skew = false;
        let a = process_frame(&img, &with).unwrap();
        let b = process_frame(&img, &without).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.first_frame_cycles, b.first_frame_cycles + 8);
    }

    #[test]
    fn sum_only_mode_matches_reference() {
        let mut rng = StdRng::seed_from_u64(36);
        let pixels: Vec<u8> = (0..225).map(|_| rng.gen_range(0..=28)).collect();
        let img = LightfieldImage::new(15, 15, 1, 3, (5, 5), pixels).unwrap();
        let mut c = cfg(1, 3);
        c.prec = PrecisionMode::SumOnly;
        let res = process_frame(&img, &c).unwrap();
        let expect = refocus_2d(
            &img,
            &shift(1, 3),
            InterpMode::NearestNeighbor,
            PrecisionMode::SumOnly,
        )
        .unwrap();
        assert_eq!(res.image.pixels, expect.pixels);
        assert_eq!(res.image.mask, expect.mask);
    }

    #[test]
    fn serializing_rows_scales_cycle_count() {
        let img = LightfieldImage::new(30, 30, 1, 3, (10, 10), vec![9; 900]).unwrap();
        let mut c1 = cfg(1, 3);
        c1.iota = Iota::Fixed(1);
        let mut c3 = cfg(1, 3);
        c3.iota = Iota::Fixed(3);
        let r1 = process_frame(&img, &c1).unwrap().first_frame_cycles as f64;
        let r3 = process_frame(&img, &c3).unwrap().first_frame_cycles as f64;
        let ratio = r1 / r3;
        assert!(ratio > 2.0 && ratio < 4.0, "ratio {ratio}");
    }
}

//! Synthetic lightfield generation for verification.
//!
//! A synthetic frame places a known base texture at one or more depth
//! planes: view `v` of each micro image samples the texture shifted by
//! `d * (c - i)` positions on the upsampled grid, where `d` is the plane's
//! disparity. Refocusing such a frame with the matching numerator
//! (`a' = d`, a multiple of `M`) realigns every view and reproduces the
//! texture exactly, which gives the focal-plane tests a closed-form ground
//! truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lightfield::{LightfieldImage, RefocusShift};
use crate::refocus::alignment_delay;

/// Base texture painted onto the focal planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TextureSpec {
    Checkerboard { period: usize },
    Gradient,
    Random { seed: u64 },
}

impl TextureSpec {
    /// Texture value at a (possibly negative) scene coordinate.
    fn sample(&self, x: i64, y: i64) -> u8 {
        match *self {
            TextureSpec::Checkerboard { period } => {
                let p = period.max(1) as i64;
                let cell = x.div_euclid(p) + y.div_euclid(p);
                if cell.rem_euclid(2) == 0 {
                    230
                } else {
                    25
                }
            }
            TextureSpec::Gradient => ((x + 2 * y).rem_euclid(256)) as u8,
            TextureSpec::Random { seed } => {
                // splitmix-style coordinate hash: stable, seedable, cheap
                let mut z = seed
                    .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(x as u64 ^ 0x5bf0_3635))
                    .wrapping_add((y as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9));
                z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
                (z ^ (z >> 31)) as u8
            }
        }
    }
}

/// Recipe for a synthetic lightfield.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub texture: TextureSpec,
    /// One disparity per depth plane, in upsampled-grid units; planes split
    /// the micro lens grid into equal vertical strips, left to right.
    pub disparities: Vec<i64>,
    pub m: u32,
    pub lens_grid: [usize; 2],
}

/// A generated frame together with the recipe that produced it.
#[derive(Debug, Clone)]
pub struct SyntheticLightfield {
    pub spec: SyntheticSpec,
    pub image: LightfieldImage,
}

/// Generates a synthetic lightfield frame.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticLightfield> {
    if spec.disparities.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one depth plane required".into(),
        ));
    }
    let m = i64::from(spec.m);
    let width = spec.lens_grid[0] * spec.m as usize;
    let height = spec.lens_grid[1] * spec.m as usize;
    if width == 0 || height == 0 {
        return Err(Error::Geometry("empty lens grid".into()));
    }
    for &d in &spec.disparities {
        if d.unsigned_abs() as usize * (spec.m as usize - 1) >= width.min(height) {
            return Err(Error::DisparityOutOfRange {
                disparity: d,
                width: width.min(height),
            });
        }
    }

    let two_c = m - 1;
    let mut pixels = vec![0u8; width * height];
    for r in 0..height as i64 {
        let lens_y = r.div_euclid(m);
        let v_y = r.rem_euclid(m);
        for q in 0..width as i64 {
            let lens_x = q.div_euclid(m);
            let v_x = q.rem_euclid(m);
            let d = plane_disparity(spec, lens_x as usize);
            let sx = lens_x * m - d * (two_c - v_x);
            let sy = lens_y * m - d * (two_c - v_y);
            pixels[(r * width as i64 + q) as usize] = spec.texture.sample(sx, sy);
        }
    }
    let image = LightfieldImage::new(
        width,
        height,
        1,
        spec.m,
        (spec.lens_grid[0], spec.lens_grid[1]),
        pixels,
    )?;
    Ok(SyntheticLightfield {
        spec: spec.clone(),
        image,
    })
}

/// Disparity of the plane covering a micro lens column.
pub fn plane_disparity(spec: &SyntheticSpec, lens_x: usize) -> i64 {
    let planes = spec.disparities.len();
    let idx = (lens_x * planes / spec.lens_grid[0]).min(planes - 1);
    spec.disparities[idx]
}

impl SyntheticLightfield {
    /// Expected refocused frame for a single-plane scene whose disparity is
    /// a whole number of micro images (`a' = d`, `d % M == 0`): refocusing
    /// realigns all views onto the same texture sample, held per run.
    pub fn ground_truth(&self, shift: &RefocusShift) -> Option<Vec<u8>> {
        if self.spec.disparities.len() != 1 {
            return None;
        }
        let d_plane = self.spec.disparities[0];
        if i64::from(shift.numerator()) != d_plane
            || d_plane.rem_euclid(i64::from(self.spec.m)) != 0
        {
            return None;
        }
        let (w, h) = (self.image.width as i64, self.image.height as i64);
        let m = i64::from(self.spec.m);
        let delay = alignment_delay(shift);
        let snap = |t: i64| (t - delay).div_euclid(m) * m;
        let mut out = vec![0u8; (w * h) as usize];
        for l in 0..h {
            for k in 0..w {
                out[(l * w + k) as usize] = self.spec.texture.sample(snap(k), snap(l));
            }
        }
        Some(out)
    }
}

/// Region (column range in pixels) covered by one depth plane.
pub fn plane_pixel_range(spec: &SyntheticSpec, plane: usize) -> (usize, usize) {
    let planes = spec.disparities.len();
    let lenses = spec.lens_grid[0];
    let start = plane * lenses / planes;
    let end = (plane + 1) * lenses / planes;
    (start * spec.m as usize, end * spec.m as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::variance_of_laplacian;
    use crate::refocus::{refocus_2d, InterpMode, PrecisionMode};

    fn spec(disparities: Vec<i64>, m: u32, lenses: usize) -> SyntheticSpec {
        SyntheticSpec {
            texture: TextureSpec::Random { seed: 7 },
            disparities,
            m,
            lens_grid: [lenses, lenses],
        }
    }

    #[test]
    fn zero_disparity_makes_all_views_identical() {
        let field = gen_synthetic(&spec(vec![0], 3, 6)).unwrap();
        let img = &field.image;
        for lens_y in 0..6 {
            for lens_x in 0..6 {
                let base = img.plane(0)[(lens_y * 3) * img.width + lens_x * 3];
                for vy in 0..3 {
                    for vx in 0..3 {
                        let px = img.plane(0)[(lens_y * 3 + vy) * img.width + lens_x * 3 + vx];
                        assert_eq!(px, base);
                    }
                }
            }
        }
    }

    #[test]
    fn matched_shift_recovers_texture_exactly() {
        let field = gen_synthetic(&spec(vec![3], 3, 10)).unwrap();
        let shift = RefocusShift::new(3, 3).unwrap();
        let truth = field.ground_truth(&shift).unwrap();
        let out = refocus_2d(
            &field.image,
            &shift,
            InterpMode::NearestNeighbor,
            PrecisionMode::Exact,
        )
        .unwrap();
        let mut checked = 0;
        for (i, &ok) in out.mask.iter().enumerate() {
            if ok {
                assert_eq!(out.pixels[i], truth[i], "pixel {i}");
                checked += 1;
            }
        }
        assert!(
            checked > out.mask.len() / 2,
            "valid region too small: {checked}"
        );
    }

    #[test]
    fn two_plane_scene_peaks_at_its_own_disparity() {
        let spec = spec(vec![3, 6], 3, 16);
        let field = gen_synthetic(&spec).unwrap();
        let sweep: Vec<u32> = vec![3, 6];
        let mut sharpness = vec![vec![0.0f64; 2]; 2];
        for (si, &ap) in sweep.iter().enumerate() {
            let shift = RefocusShift::new(ap, 3).unwrap();
            let out = refocus_2d(
                &field.image,
                &shift,
                InterpMode::NearestNeighbor,
                PrecisionMode::Exact,
            )
            .unwrap();
            #[allow(clippy::needless_range_loop)]
            for plane in 0..2 {
                let (x0, x1) = plane_pixel_range(&spec, plane);
                // stay clear of the plane boundary
                let margin = 9;
                let mut mask = out.mask.clone();
                for (i, ok) in mask.iter_mut().enumerate() {
                    let x = i % out.width;
                    *ok &= x >= x0 + margin && x + margin < x1;
                }
                sharpness[plane][si] = variance_of_laplacian(
                    &out.pixels[..out.width * out.height],
                    &mask,
                    out.width,
                    out.height,
                );
            }
        }
        // each plane is sharpest at its own shift
        assert!(sharpness[0][0] > sharpness[0][1], "{sharpness:?}");
        assert!(sharpness[1][1] > sharpness[1][0], "{sharpness:?}");
    }

    #[test]
    fn oversized_disparity_is_rejected() {
        assert!(gen_synthetic(&spec(vec![40], 3, 6)).is_err());
    }

    #[test]
    fn checkerboard_and_gradient_are_deterministic() {
        for texture in [
            TextureSpec::Checkerboard { period: 4 },
            TextureSpec::Gradient,
        ] {
            let s = SyntheticSpec {
                texture,
                disparities: vec![0],
                m: 3,
                lens_grid: [4, 4],
            };
            let a = gen_synthetic(&s).unwrap();
            let b = gen_synthetic(&s).unwrap();
            assert_eq!(a.image.pixels, b.image.pixels);
        }
    }
}

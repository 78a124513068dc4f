//! Focus and saliency measures on texture layers.
//!
//! The salient feature map multiplies two cues:
//!
//! * a per-axis gradient response `GM = r·d − (2d + 0.01)^p` with
//!   `r = p·e^(p/2 − 1)`, where `d` is the magnitude of the `[-1, 1]` /
//!   `[1, -1]ᵀ` difference (or, with [`GradDiff::Signed`], the signed
//!   difference with the power base floored at [`GRAD_BASE_FLOOR`]);
//! * a significance map that sums `sqrt(SF(G_k) + SF(L_k))` over pyramid
//!   scales `k = N−1..1`, each term brought back to full resolution by
//!   repeated 2× upsampling. `SF` here is a sliding-window spatial frequency.

use crate::error::{Error, Result};
use crate::filter::{convolve2d, filter_1d, upsample2, Kernel};
use crate::image::GrayImage;
use crate::texture::pyramid::{build_pyramid, PyramidStack};

/// Floor applied to the base of the fractional power in the gradient response.
pub const GRAD_BASE_FLOOR: f64 = 1e-6;

/// How the difference enters the gradient response.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GradDiff {
    /// `d = |Δ|`. The response then grows monotonically with edge strength.
    #[default]
    Magnitude,
    /// `d = Δ`, with the power base floored so negative differences stay real.
    Signed,
}

impl std::str::FromStr for GradDiff {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "magnitude" | "abs" => Ok(GradDiff::Magnitude),
            "signed" => Ok(GradDiff::Signed),
            _ => Err(Error::InvalidParameter(format!("unknown gradient difference mode `{s}`"))),
        }
    }
}

/// Intermediate maps of the salient feature operator.
#[derive(Clone, Debug)]
pub struct SaliencyMaps {
    pub gm_x: GrayImage,
    pub gm_y: GrayImage,
    pub sm: GrayImage,
    pub tm: GrayImage,
}

/// Scalar gradient response for one difference value.
#[inline]
pub fn grad_response(d: f64, p: f64) -> f64 {
    let r = p * (p / 2.0 - 1.0).exp();
    r * d - (2.0 * d + 0.01).max(GRAD_BASE_FLOOR).powf(p)
}

/// Gradient-response maps along x and y.
pub fn grad_maps(t: &GrayImage, p: f64, diff: GradDiff) -> Result<(GrayImage, GrayImage)> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!("grad.p must lie in (0, 1], got {p}")));
    }
    let resp = |d: f64| match diff {
        GradDiff::Magnitude => grad_response(d.abs(), p),
        GradDiff::Signed => grad_response(d, p),
    };
    let gx = convolve2d(t, &Kernel::diff_x()).map(resp);
    let gy = convolve2d(t, &Kernel::diff_y()).map(resp);
    Ok((gx, gy))
}

fn check_window(window: usize) -> Result<()> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "spatial-frequency window must be odd and at least 3, got {window}"
        )));
    }
    Ok(())
}

/// Per-pixel spatial frequency over a `window × window` neighbourhood:
/// `sqrt(mean(dx²) + mean(dy²))` of forward differences, mirror-extended.
pub fn local_spatial_frequency(img: &GrayImage, window: usize) -> Result<GrayImage> {
    check_window(window)?;
    let (w, h) = img.dims();
    let mut sq = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let c = img.get_mirrored(x, y);
            let dxv = img.get_mirrored(x + 1, y) - c;
            let dyv = img.get_mirrored(x, y + 1) - c;
            sq[y as usize * w + x as usize] = dxv * dxv + dyv * dyv;
        }
    }
    let taps = vec![1.0 / window as f64; window];
    let sq = GrayImage::from_raw(w, h, sq);
    let mean = filter_1d(&filter_1d(&sq, &taps, true), &taps, false);
    Ok(mean.map(|v| v.max(0.0).sqrt()))
}

/// Multi-scale significance map at the resolution of `pyr.gaussian[0]`.
///
/// With a single level the scale sum is empty; the map is then all ones so
/// the salient feature map reduces to the gradient response alone.
pub fn significance_map(pyr: &PyramidStack, window: usize) -> Result<GrayImage> {
    check_window(window)?;
    let n = pyr.levels();
    let (w, h) = pyr.gaussian[0].dims();
    if n < 2 {
        return GrayImage::filled(w, h, 1.0);
    }
    let mut acc: Option<GrayImage> = None;
    for k in (1..n).rev() {
        let sf_g = local_spatial_frequency(&pyr.gaussian[k], window)?;
        let sf_l = local_spatial_frequency(&pyr.laplacian[k], window)?;
        let term = sf_g.zip_map(&sf_l, |a, b| (a + b).sqrt())?;
        acc = Some(match acc {
            None => term,
            Some(prev) => upsample2(&prev, term.width(), term.height())?.add(&term)?,
        });
    }
    let level1 = acc.expect("n >= 2");
    upsample2(&level1, w, h).map(|m| m.map(|v| v.max(0.0)))
}

/// Salient feature map `TM = SM ⊙ sqrt(GM_x² + GM_y²)` for one texture layer.
pub fn salient_feature_map(
    t: &GrayImage,
    levels: usize,
    window: usize,
    p: f64,
    diff: GradDiff,
) -> Result<SaliencyMaps> {
    let (gm_x, gm_y) = grad_maps(t, p, diff)?;
    let pyr = build_pyramid(t, levels)?;
    let sm = significance_map(&pyr, window)?;
    let norm = gm_x.zip_map(&gm_y, |a, b| a.hypot(b))?;
    let tm = sm.zip_map(&norm, |s, g| s * g)?;
    Ok(SaliencyMaps { gm_x, gm_y, sm, tm })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_response_fixtures() {
        let c = GrayImage::filled(8, 8, 0.3).unwrap();
        let (gx, gy) = grad_maps(&c, 0.8, GradDiff::Signed).unwrap();
        assert_eq!((gx.clone(), gy.clone()), grad_maps(&c, 0.8, GradDiff::Magnitude).unwrap());
        let base = -(0.01f64).powf(0.8);
        assert!((base - (-0.025119)).abs() < 1e-6);
        assert!(gx.data().iter().chain(gy.data()).all(|&v| (v - base).abs() < 1e-15));

        // Unit step along x: d = 1 on the column before the edge.
        let step = GrayImage::from_fn(8, 4, |x, _| if x >= 4 { 1.0 } else { 0.0 }).unwrap();
        let (gx, _) = grad_maps(&step, 0.8, GradDiff::Signed).unwrap();
        let r = 0.8 * (-0.6f64).exp();
        assert!((r - 0.43905).abs() < 1e-5);
        assert!((gx.get(3, 1) - (-1.30901)).abs() < 1e-5, "{}", gx.get(3, 1));
        assert!((gx.get(3, 1) - (r - 2.01f64.powf(0.8))).abs() < 1e-15);

        let clamped = grad_response(-0.005, 0.8);
        assert_eq!(clamped, r * -0.005 - 1e-6f64.powf(0.8));
        assert!(grad_maps(&c, 0.0, GradDiff::Signed).is_err());
        assert!(grad_maps(&c, 1.5, GradDiff::Magnitude).is_err());
    }

    #[test]
    fn magnitude_response_is_even_and_monotone() {
        let down = GrayImage::from_fn(8, 4, |x, _| if x >= 4 { 0.0 } else { 0.6 }).unwrap();
        let up = down.map(|v| 0.6 - v);
        let (gd, _) = grad_maps(&down, 0.8, GradDiff::Magnitude).unwrap();
        let (gu, _) = grad_maps(&up, 0.8, GradDiff::Magnitude).unwrap();
        assert_eq!(gd, gu);
        let mut prev = grad_response(0.0, 0.8).abs();
        for k in 1..200 {
            let cur = grad_response(k as f64 * 0.005, 0.8).abs();
            assert!(cur > prev);
            prev = cur;
        }
        // The signed form is not monotone in |d| just below zero.
        assert!(grad_response(-0.004, 0.8).abs() < grad_response(0.0, 0.8).abs());
    }

    #[test]
    fn local_sf_fixtures() {
        let c = GrayImage::filled(9, 9, 0.5).unwrap();
        assert!(local_spatial_frequency(&c, 7).unwrap().data().iter().all(|&v| v == 0.0));

        let board = GrayImage::from_fn(10, 10, |x, y| ((x + y) % 2) as f64).unwrap();
        let sf = local_spatial_frequency(&board, 3).unwrap();
        // Brute force over the 3x3 window for an interior pixel.
        let (cx, cy) = (4usize, 5usize);
        let (mut rf, mut cf) = (0.0, 0.0);
        for y in cy - 1..=cy + 1 {
            for x in cx - 1..=cx + 1 {
                rf += (board.get(x + 1, y) - board.get(x, y)).powi(2);
                cf += (board.get(x, y + 1) - board.get(x, y)).powi(2);
            }
        }
        let want = (rf / 9.0 + cf / 9.0).sqrt();
        assert!((want - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!((sf.get(cx, cy) - want).abs() < 1e-12);

        let shifted = local_spatial_frequency(&board.offset(0.25), 3).unwrap();
        assert!(shifted.max_abs_diff(&sf).unwrap() < 1e-12);
        assert!(local_spatial_frequency(&board, 4).is_err());
        assert!(local_spatial_frequency(&board, 1).is_err());
    }

    fn left_textured(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            if x < w / 2 {
                0.5 + 0.3 * (((x * 7 + y * 13) % 5) as f64 / 4.0 - 0.5)
            } else {
                0.5
            }
        })
        .unwrap()
    }

    #[test]
    fn significance_map_contract() {
        for levels in [2, 3, 4] {
            let c = GrayImage::filled(67, 70, 0.2).unwrap();
            let pyr = build_pyramid(&c, levels).unwrap();
            let sm = significance_map(&pyr, 7).unwrap();
            assert_eq!(sm.dims(), (67, 70));
            assert!(sm.data().iter().all(|&v| v.abs() < 1e-9));
        }
        let img = left_textured(64, 64);
        let sm = significance_map(&build_pyramid(&img, 3).unwrap(), 7).unwrap();
        let mean = |x0: usize, x1: usize| {
            let mut s = 0.0;
            for y in 0..64 {
                for x in x0..x1 {
                    s += sm.get(x, y);
                }
            }
            s / ((x1 - x0) * 64) as f64
        };
        assert!(mean(0, 32) > mean(32, 64));
        assert!(sm.min() >= 0.0);
    }

    #[test]
    fn single_level_significance_is_neutral() {
        let img = left_textured(32, 32);
        let sm = significance_map(&build_pyramid(&img, 1).unwrap(), 7).unwrap();
        assert!(sm.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn salient_map_is_nonnegative_and_zero_on_flat() {
        let flat = GrayImage::zeros(32, 32).unwrap();
        let maps = salient_feature_map(&flat, 3, 7, 0.8, GradDiff::Magnitude).unwrap();
        assert!(maps.tm.data().iter().all(|&v| v == 0.0));
        let tex = left_textured(32, 32).offset(-0.5);
        let maps = salient_feature_map(&tex, 3, 7, 0.8, GradDiff::Magnitude).unwrap();
        assert!(maps.tm.min() >= 0.0);
        assert!(maps.tm.max() > 0.0);
    }
}

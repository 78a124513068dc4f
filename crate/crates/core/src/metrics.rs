//! Fusion quality metrics.
//!
//! All scores work on the 0–255 intensity scale. Two-source metrics take the
//! fused image first and are symmetric in the sources.
//!
//! | metric | meaning |
//! |---|---|
//! | [`avg_gradient`] | mean local gradient magnitude |
//! | [`spatial_frequency`] | global row and column activity |
//! | [`psnr_fusion`] | mean PSNR against each source, capped at 100 dB |
//! | [`q_g`] | Xydeas–Petrović edge transfer |
//! | [`q_s`] | Piella–Heijmans windowed structural similarity |
//! | [`q_m`] | two-level Haar edge preservation |

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::filter::{convolve2d, Kernel};
use crate::image::{ensure_dims, GrayImage};

/// PSNR reported for an exact match.
pub const PSNR_CAP: f64 = 100.0;
/// Window side for [`q_s`].
pub const QS_WINDOW: usize = 8;

const QG_GAMMA_G: f64 = 0.9994;
const QG_KAPPA_G: f64 = -15.0;
const QG_SIGMA_G: f64 = 0.5;
const QG_GAMMA_A: f64 = 0.9879;
const QG_KAPPA_A: f64 = -22.0;
const QG_SIGMA_A: f64 = 0.8;

fn scaled(img: &GrayImage) -> GrayImage {
    img.scale(255.0)
}

fn check_min(img: &GrayImage, w: usize, h: usize, what: &str) -> Result<()> {
    if img.width() < w || img.height() < h {
        return Err(Error::TooSmall {
            width: img.width(),
            height: img.height(),
            reason: format!("{what} needs at least {w}x{h}"),
        });
    }
    Ok(())
}

fn check_three(f: &GrayImage, a: &GrayImage, b: &GrayImage) -> Result<()> {
    ensure_dims(f.dims(), a.dims())?;
    ensure_dims(f.dims(), b.dims())
}

/// Average gradient over the `(W−1)×(H−1)` grid of forward differences.
pub fn avg_gradient(f: &GrayImage) -> Result<f64> {
    check_min(f, 2, 2, "average gradient")?;
    let g = scaled(f);
    let (w, h) = g.dims();
    let mut sum = 0.0;
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            let c = g.get(x, y);
            let dx = g.get(x + 1, y) - c;
            let dy = g.get(x, y + 1) - c;
            sum += ((dx * dx + dy * dy) / 2.0).sqrt();
        }
    }
    Ok(sum / ((w - 1) * (h - 1)) as f64)
}

/// Global spatial frequency `sqrt(RF² + CF²)`.
pub fn spatial_frequency(f: &GrayImage) -> Result<f64> {
    check_min(f, 2, 2, "spatial frequency")?;
    let g = scaled(f);
    let (w, h) = g.dims();
    let (mut rf, mut cf) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                rf += (g.get(x + 1, y) - g.get(x, y)).powi(2);
            }
            if y + 1 < h {
                cf += (g.get(x, y + 1) - g.get(x, y)).powi(2);
            }
        }
    }
    let rf2 = rf / (h * (w - 1)) as f64;
    let cf2 = cf / ((h - 1) * w) as f64;
    Ok((rf2 + cf2).sqrt())
}

/// PSNR of `fused` against one reference, capped at [`PSNR_CAP`].
pub fn psnr(fused: &GrayImage, reference: &GrayImage) -> Result<f64> {
    fused.ensure_same_dims(reference)?;
    let mse = fused
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| ((a - b) * 255.0).powi(2))
        .sum::<f64>()
        / fused.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP))
}

/// Arithmetic mean of [`psnr`] over the sources.
pub fn psnr_fusion(fused: &GrayImage, sources: &[GrayImage]) -> Result<f64> {
    if sources.is_empty() {
        return Err(Error::Arity { expected: 1, found: 0 });
    }
    let mut total = 0.0;
    for s in sources {
        total += psnr(fused, s)?;
    }
    Ok(total / sources.len() as f64)
}

struct EdgeField {
    strength: Vec<f64>,
    angle: Vec<f64>,
}

fn sobel(img: &GrayImage) -> EdgeField {
    let kx = Kernel::from_rows(&[&[-1.0, 0.0, 1.0], &[-2.0, 0.0, 2.0], &[-1.0, 0.0, 1.0]]).expect("3x3");
    let ky = Kernel::from_rows(&[&[-1.0, -2.0, -1.0], &[0.0, 0.0, 0.0], &[1.0, 2.0, 1.0]]).expect("3x3");
    let gx = convolve2d(img, &kx);
    let gy = convolve2d(img, &ky);
    let strength = gx.data().iter().zip(gy.data()).map(|(x, y)| x.hypot(*y)).collect();
    let angle = gx
        .data()
        .iter()
        .zip(gy.data())
        .map(|(&x, &y)| if x == 0.0 { FRAC_PI_2 } else { (y / x).atan() })
        .collect();
    EdgeField { strength, angle }
}

// Per-pixel edge preservation of `src` in `fused`.
fn edge_preservation(src: &EdgeField, fused: &EdgeField, i: usize) -> f64 {
    let (ga, gf) = (src.strength[i], fused.strength[i]);
    let g = if ga == gf {
        1.0
    } else if ga > gf {
        gf / ga
    } else {
        ga / gf
    };
    let a = 1.0 - (src.angle[i] - fused.angle[i]).abs() / FRAC_PI_2;
    let qg = QG_GAMMA_G / (1.0 + (QG_KAPPA_G * (g - QG_SIGMA_G)).exp());
    let qa = QG_GAMMA_A / (1.0 + (QG_KAPPA_A * (a - QG_SIGMA_A)).exp());
    qg * qa
}

/// Xydeas–Petrović gradient transfer score in `[0, 1]`. Returns `1` when
/// neither source has any edge.
pub fn q_g(fused: &GrayImage, a: &GrayImage, b: &GrayImage) -> Result<f64> {
    check_three(fused, a, b)?;
    let (ea, eb, ef) = (sobel(&scaled(a)), sobel(&scaled(b)), sobel(&scaled(fused)));
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..fused.len() {
        let (wa, wb) = (ea.strength[i], eb.strength[i]);
        num += edge_preservation(&ea, &ef, i) * wa + edge_preservation(&eb, &ef, i) * wb;
        den += wa + wb;
    }
    if den == 0.0 {
        return Ok(1.0);
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// Universal image quality index of two equally sized samples, with the
/// usual conventions for flat windows.
pub fn uiqi(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
        cxy += (a - mx) * (b - my);
    }
    let (vx, vy, cxy) = (vx / n, vy / n, cxy / n);
    let d1 = vx + vy;
    let d2 = mx * mx + my * my;
    if d1 == 0.0 && d2 != 0.0 {
        2.0 * mx * my / d2
    } else if d1 * d2 != 0.0 {
        4.0 * cxy * mx * my / (d1 * d2)
    } else {
        1.0
    }
}

fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
}

fn window(img: &GrayImage, x0: usize, y0: usize, side: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(side * side);
    for y in y0..y0 + side {
        out.extend_from_slice(&img.row(y)[x0..x0 + side]);
    }
    out
}

/// Piella–Heijmans score over all 8×8 windows inside the image, each window
/// weighting the two sources by their local variance. Clamped to `[0, 1]`.
pub fn q_s(fused: &GrayImage, a: &GrayImage, b: &GrayImage) -> Result<f64> {
    check_three(fused, a, b)?;
    check_min(fused, QS_WINDOW, QS_WINDOW, "q_s")?;
    let (f, a, b) = (scaled(fused), scaled(a), scaled(b));
    let (w, h) = f.dims();
    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..=h - QS_WINDOW {
        for x in 0..=w - QS_WINDOW {
            let (wf, wa, wb) = (window(&f, x, y, QS_WINDOW), window(&a, x, y, QS_WINDOW), window(&b, x, y, QS_WINDOW));
            let (sa, sb) = (variance(&wa), variance(&wb));
            let (qa, qb) = (uiqi(&wa, &wf), uiqi(&wb, &wf));
            let s = sa + sb;
            total += if s == 0.0 { 0.5 * qa + 0.5 * qb } else { (sa * qa + sb * qb) / s };
            count += 1;
        }
    }
    Ok((total / count as f64).clamp(0.0, 1.0))
}

struct HaarLevel {
    bands: [GrayImage; 3],
}

// One orthonormal 2-D Haar step on an image with even sides.
fn haar_step(img: &GrayImage) -> (GrayImage, HaarLevel) {
    let (w, h) = (img.width() / 2, img.height() / 2);
    let mut ll = vec![0.0; w * h];
    let mut lh = vec![0.0; w * h];
    let mut hl = vec![0.0; w * h];
    let mut hh = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let p = img.get(2 * x, 2 * y);
            let q = img.get(2 * x + 1, 2 * y);
            let r = img.get(2 * x, 2 * y + 1);
            let s = img.get(2 * x + 1, 2 * y + 1);
            let i = y * w + x;
            ll[i] = (p + q + r + s) / 2.0;
            lh[i] = (p - q + r - s) / 2.0;
            hl[i] = (p + q - r - s) / 2.0;
            hh[i] = (p - q - r + s) / 2.0;
        }
    }
    let mk = |v| GrayImage::from_raw(w, h, v);
    (mk(ll), HaarLevel { bands: [mk(lh), mk(hl), mk(hh)] })
}

fn pad_to_multiple(img: &GrayImage, m: usize) -> GrayImage {
    let (w, h) = img.dims();
    let (pw, ph) = (w.div_ceil(m) * m, h.div_ceil(m) * m);
    if (pw, ph) == (w, h) {
        return img.clone();
    }
    GrayImage::from_fn(pw, ph, |x, y| img.get_mirrored(x as isize, y as isize)).expect("nonempty")
}

fn haar2(img: &GrayImage) -> [HaarLevel; 2] {
    let (ll, l1) = haar_step(&pad_to_multiple(&scaled(img), 4));
    let (_, l2) = haar_step(&ll);
    [l1, l2]
}

fn level_score(fl: &HaarLevel, al: &HaarLevel, bl: &HaarLevel) -> f64 {
    let n = fl.bands[0].len();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        let (mut ep_a, mut ep_b, mut wa, mut wb) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..3 {
            let (cf, ca, cb) = (fl.bands[k].data()[i], al.bands[k].data()[i], bl.bands[k].data()[i]);
            ep_a += (-(ca - cf).abs()).exp();
            ep_b += (-(cb - cf).abs()).exp();
            wa += ca * ca;
            wb += cb * cb;
        }
        num += ep_a / 3.0 * wa + ep_b / 3.0 * wb;
        den += wa + wb;
    }
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}

/// Two-level Haar edge preservation: per level, `exp(−|c_src − c_fused|)`
/// averaged over the three detail bands and weighted by source detail
/// energy; levels combine as `Q1^(2/3)·Q2^(1/3)`. Sides that are not a
/// multiple of 4 are mirror-padded.
pub fn q_m(fused: &GrayImage, a: &GrayImage, b: &GrayImage) -> Result<f64> {
    check_three(fused, a, b)?;
    let (hf, ha, hb) = (haar2(fused), haar2(a), haar2(b));
    let q1 = level_score(&hf[0], &ha[0], &hb[0]);
    let q2 = level_score(&hf[1], &ha[1], &hb[1]);
    Ok(q1.powf(2.0 / 3.0) * q2.powf(1.0 / 3.0))
}

/// All six scores of one fused image against its two sources.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scores {
    pub q_g: f64,
    pub q_m: f64,
    pub q_s: f64,
    pub ag: f64,
    pub sf: f64,
    pub psnr: f64,
}

impl Scores {
    pub fn evaluate(fused: &GrayImage, a: &GrayImage, b: &GrayImage) -> Result<Self> {
        Ok(Self {
            q_g: q_g(fused, a, b)?,
            q_m: q_m(fused, a, b)?,
            q_s: q_s(fused, a, b)?,
            ag: avg_gradient(fused)?,
            sf: spatial_frequency(fused)?,
            psnr: psnr_fusion(fused, &[a.clone(), b.clone()])?,
        })
    }

    /// Component-wise mean; `None` for an empty slice.
    pub fn mean(rows: &[Scores]) -> Option<Scores> {
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        let avg = |f: fn(&Scores) -> f64| rows.iter().map(f).sum::<f64>() / n;
        Some(Scores {
            q_g: avg(|s| s.q_g),
            q_m: avg(|s| s.q_m),
            q_s: avg(|s| s.q_s),
            ag: avg(|s| s.ag),
            sf: avg(|s| s.sf),
            psnr: avg(|s| s.psnr),
        })
    }
}

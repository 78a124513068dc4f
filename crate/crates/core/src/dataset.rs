//! Synthetic multi-focus pairs with ground-truth masks.
//!
//! An all-in-focus image `f_clear` and a complementary mask pair `(M1, M2)`
//! give
//!
//! ```text
//! f1 = f_clear·M1 + f_blur·M2
//! f2 = f_clear·M2 + f_blur·M1
//! ```
//!
//! with `f_blur` a Gaussian blur of `f_clear` (σ = 5 by default).
//!
//! Masks come from a seeded `Xoshiro256++` generator (state expanded from the
//! 64-bit seed with SplitMix64), so a seed reproduces the same mask on every
//! platform.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::filter::gaussian_blur;
use crate::image::{BinaryMask, GrayImage};

/// Default defocus blur.
pub const DEFAULT_SIGMA: f64 = 5.0;
/// Allowed area fraction of `M1`.
pub const AREA_RANGE: (f64, f64) = (0.2, 0.8);

const MAX_ATTEMPTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    HalfPlane,
    Rect,
    Ellipse,
    PolyBlob,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [ShapeKind::HalfPlane, ShapeKind::Rect, ShapeKind::Ellipse, ShapeKind::PolyBlob];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::HalfPlane => "half_plane",
            ShapeKind::Rect => "rect",
            ShapeKind::Ellipse => "ellipse",
            ShapeKind::PolyBlob => "poly_blob",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown mask shape `{s}`")))
    }
}

/// Seed and optional pinned shape family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaskSpec {
    pub seed: u64,
    pub shape_kind: Option<ShapeKind>,
}

impl MaskSpec {
    pub fn new(seed: u64) -> Self {
        Self { seed, shape_kind: None }
    }

    pub fn with_shape(seed: u64, kind: ShapeKind) -> Self {
        Self {
            seed,
            shape_kind: Some(kind),
        }
    }
}

/// Complementary masks plus the family that produced them.
#[derive(Clone, Debug)]
pub struct MaskPair {
    pub m1: BinaryMask,
    pub m2: BinaryMask,
    pub shape: ShapeKind,
}

impl MaskPair {
    pub fn area_fraction(&self) -> f64 {
        self.m1.area_fraction()
    }
}

fn in_range(area: f64) -> bool {
    (AREA_RANGE.0..=AREA_RANGE.1).contains(&area)
}

// Splits the image by a line at a random angle so that exactly a target
// fraction of pixels falls on the M1 side.
fn half_plane(w: usize, h: usize, rng: &mut Xoshiro256PlusPlus) -> BinaryMask {
    let theta = rng.gen_range(0.0..2.0 * PI);
    let target = rng.gen_range(AREA_RANGE.0..=AREA_RANGE.1);
    let (c, s) = (theta.cos(), theta.sin());
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let proj: Vec<f64> = (0..w * h)
        .map(|i| ((i % w) as f64 + 0.5 - cx) * c + ((i / w) as f64 + 0.5 - cy) * s)
        .collect();
    let mut order: Vec<usize> = (0..w * h).collect();
    order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));
    let count = ((target * (w * h) as f64).round() as usize).clamp(1, w * h - 1);
    let mut data = vec![false; w * h];
    for &i in &order[..count] {
        data[i] = true;
    }
    BinaryMask::from_vec(w, h, data).expect("dims")
}

fn rect(w: usize, h: usize, rng: &mut Xoshiro256PlusPlus) -> BinaryMask {
    let (fw, fh) = (w as f64, h as f64);
    let rw = rng.gen_range(0.35..0.95) * fw;
    let rh = rng.gen_range(0.35..0.95) * fh;
    let x0 = rng.gen_range(-0.1 * fw..(fw - 0.5 * rw).max(-0.1 * fw + 1.0));
    let y0 = rng.gen_range(-0.1 * fh..(fh - 0.5 * rh).max(-0.1 * fh + 1.0));
    BinaryMask::from_fn(w, h, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        px >= x0 && px < x0 + rw && py >= y0 && py < y0 + rh
    })
    .expect("dims")
}

fn ellipse(w: usize, h: usize, rng: &mut Xoshiro256PlusPlus) -> BinaryMask {
    let (fw, fh) = (w as f64, h as f64);
    let cx = rng.gen_range(0.25..0.75) * fw;
    let cy = rng.gen_range(0.25..0.75) * fh;
    let a = rng.gen_range(0.25..0.65) * fw;
    let b = rng.gen_range(0.25..0.65) * fh;
    let rot = rng.gen_range(0.0..PI);
    let (c, s) = (rot.cos(), rot.sin());
    BinaryMask::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / a).powi(2) + (v / b).powi(2) <= 1.0
    })
    .expect("dims")
}

fn poly_blob(w: usize, h: usize, rng: &mut Xoshiro256PlusPlus) -> BinaryMask {
    let (fw, fh) = (w as f64, h as f64);
    let cx = rng.gen_range(0.3..0.7) * fw;
    let cy = rng.gen_range(0.3..0.7) * fh;
    let n = rng.gen_range(5..=9usize);
    let base = fw.min(fh);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let verts: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let ang = phase + 2.0 * PI * (k as f64 + rng.gen_range(-0.3..0.3)) / n as f64;
            let r = rng.gen_range(0.25..0.6) * base;
            (cx + r * ang.cos(), cy + r * ang.sin())
        })
        .collect();
    BinaryMask::from_fn(w, h, |x, y| point_in_polygon(x as f64 + 0.5, y as f64 + 0.5, &verts)).expect("dims")
}

// Even-odd crossing test.
fn point_in_polygon(px: f64, py: f64, verts: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let mut j = verts.len() - 1;
    for i in 0..verts.len() {
        let (xi, yi) = verts[i];
        let (xj, yj) = verts[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Draws a complementary mask pair. `M1` covers between 20% and 80% of
/// the image; the same spec always yields the same masks.
pub fn gen_mask_pair(width: usize, height: usize, spec: &MaskSpec) -> Result<MaskPair> {
    if width == 0 || height == 0 {
        return Err(Error::EmptyImage);
    }
    if width * height < 2 {
        return Err(Error::TooSmall {
            width,
            height,
            reason: "a mask pair needs at least two pixels".into(),
        });
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
    let shape = match spec.shape_kind {
        Some(k) => k,
        None => ShapeKind::ALL[rng.gen_range(0..ShapeKind::ALL.len())],
    };
    let mut m1 = None;
    if shape != ShapeKind::HalfPlane {
        for _ in 0..MAX_ATTEMPTS {
            let mut m = match shape {
                ShapeKind::Rect => rect(width, height, &mut rng),
                ShapeKind::Ellipse => ellipse(width, height, &mut rng),
                _ => poly_blob(width, height, &mut rng),
            };
            if rng.gen_bool(0.5) {
                m = m.not();
            }
            if in_range(m.area_fraction()) {
                m1 = Some(m);
                break;
            }
        }
    }
    // Half-plane masks hit their area target by construction, so they also
    // serve as the fallback when rejection sampling runs out of attempts.
    let m1 = m1.unwrap_or_else(|| half_plane(width, height, &mut rng));
    let m2 = m1.not();
    Ok(MaskPair { m1, m2, shape })
}

/// Defocused pair `(f1, f2)` from a clear image and complementary masks.
pub fn simulate_defocus(
    f_clear: &GrayImage,
    m1: &BinaryMask,
    m2: &BinaryMask,
    sigma: f64,
) -> Result<(GrayImage, GrayImage)> {
    crate::image::ensure_dims(f_clear.dims(), m1.dims())?;
    crate::image::ensure_dims(m1.dims(), m2.dims())?;
    let w = m1.width();
    if let Some(i) = m1.data().iter().zip(m2.data()).position(|(a, b)| a == b) {
        return Err(Error::NonComplementaryMasks { x: i % w, y: i / w });
    }
    let f_blur = gaussian_blur(f_clear, sigma)?;
    let m1f = m1.to_image();
    let m2f = m2.to_image();
    let compose = |a: &GrayImage, ma: &GrayImage, b: &GrayImage, mb: &GrayImage| -> Result<GrayImage> {
        a.zip_map(ma, |p, m| p * m)?.add(&b.zip_map(mb, |p, m| p * m)?)
    };
    let f1 = compose(f_clear, &m1f, &f_blur, &m2f)?;
    let f2 = compose(f_clear, &m2f, &f_blur, &m1f)?;
    Ok((f1, f2))
}

// Squared 1-D distance transform of a sampled function (lower envelope of
// parabolas). Infinite samples contribute no parabola.
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let Some(q0) = f.iter().position(|x| x.is_finite()) else {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    };
    let mut k = 0usize;
    v[0] = q0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let meet = |q: usize, p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
    for q in q0 + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let mut s = meet(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = meet(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared Euclidean distance from every pixel to the nearest pixel where
/// `targets` is set (infinite when there is none).
pub fn squared_distance_to(targets: &BinaryMask) -> Vec<f64> {
    let (w, h) = targets.dims();
    let mut grid: Vec<f64> = targets
        .data()
        .iter()
        .map(|&t| if t { 0.0 } else { f64::INFINITY })
        .collect();
    let mut col = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = grid[y * w + x];
        }
        edt_1d(&col, &mut col_out);
        for y in 0..h {
            grid[y * w + x] = col_out[y];
        }
    }
    let mut row_out = vec![0.0; w];
    for y in 0..h {
        edt_1d(&grid[y * w..(y + 1) * w], &mut row_out);
        grid[y * w..(y + 1) * w].copy_from_slice(&row_out);
    }
    grid
}

/// Pixels at Euclidean distance `≥ margin` from every pixel of the opposite
/// label.
pub fn interior_mask(mask: &BinaryMask, margin: f64) -> BinaryMask {
    let to_zero = squared_distance_to(&mask.not());
    let to_one = squared_distance_to(mask);
    let m2 = margin * margin;
    let data = mask
        .data()
        .iter()
        .enumerate()
        .map(|(i, &b)| if b { to_zero[i] >= m2 } else { to_one[i] >= m2 })
        .collect();
    BinaryMask::from_vec(mask.width(), mask.height(), data).expect("dims")
}

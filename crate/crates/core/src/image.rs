//! Pixel containers shared by every stage of the pipeline.
//!
//! [`GrayImage`] stores `f64` intensities in row-major order. Source images
//! live in `[0, 1]`, but intermediate layers (textures, gradient maps) are
//! signed and unbounded; only saving clamps.

use crate::error::{Error, Result};

/// Row-major grid of real intensities, nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    /// Image of the given size filled with `value`.
    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        Ok(Self {
            width,
            height,
            data: vec![value; width * height],
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, 0.0)
    }

    /// Wraps a row-major buffer. Fails on zero size, a length mismatch or
    /// non-finite samples.
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "buffer of {} samples does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite sample at ({}, {})",
                i % width,
                i / width
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_vec(width, height, data)
    }

    // Internal constructor for buffers produced by our own arithmetic.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        debug_assert!(width > 0 && height > 0);
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Sample with symmetric (half-sample mirror) extension: index `-1`
    /// reads `0`, index `width` reads `width - 1`.
    #[inline]
    pub fn get_mirrored(&self, x: isize, y: isize) -> f64 {
        let xi = mirror_index(x, self.width);
        let yi = mirror_index(y, self.height);
        self.data[yi * self.width + xi]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise combination of two equally sized images.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_dims(other)?;
        Ok(Self::from_raw(
            self.width,
            self.height,
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|v| v * k)
    }

    pub fn offset(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn clamp01(&self) -> Self {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.ensure_same_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Swaps rows and columns.
    pub fn transpose(&self) -> Self {
        let mut out = vec![0.0; self.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                out[x * self.height + y] = self.data[y * self.width + x];
            }
        }
        Self::from_raw(self.height, self.width, out)
    }

    /// Pixelwise select: `self` where `mask` is set, `other` elsewhere.
    pub fn select(&self, other: &Self, mask: &BinaryMask) -> Result<Self> {
        self.ensure_same_dims(other)?;
        ensure_dims(self.dims(), mask.dims())?;
        Ok(Self::from_raw(
            self.width,
            self.height,
            self.data
                .iter()
                .zip(&other.data)
                .zip(mask.data())
                .map(|((&a, &b), &m)| if m { a } else { b })
                .collect(),
        ))
    }

    pub fn ensure_same_dims(&self, other: &Self) -> Result<()> {
        ensure_dims(self.dims(), other.dims())
    }
}

pub(crate) fn ensure_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            left_w: a.0,
            left_h: a.1,
            right_w: b.0,
            right_h: b.1,
        })
    }
}

/// Half-sample symmetric reflection of `i` into `0..n`.
#[inline]
pub fn mirror_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Row-major boolean grid, same layout as [`GrayImage`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn filled(width: usize, height: usize, value: bool) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        Ok(Self {
            width,
            height,
            data: vec![value; width * height],
        })
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "mask buffer of {} samples does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_vec(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn not(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| !b).collect(),
        }
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Fraction of set pixels.
    pub fn area_fraction(&self) -> f64 {
        self.count_ones() as f64 / self.data.len() as f64
    }

    /// True when `self XOR other` holds at every pixel.
    pub fn is_complement_of(&self, other: &Self) -> bool {
        self.dims() == other.dims() && self.data.iter().zip(&other.data).all(|(a, b)| a ^ b)
    }

    /// Fraction of pixels on which two masks agree, optionally restricted to
    /// the pixels set in `region`.
    pub fn agreement(&self, other: &Self, region: Option<&BinaryMask>) -> Result<f64> {
        ensure_dims(self.dims(), other.dims())?;
        let mut total = 0usize;
        let mut same = 0usize;
        for i in 0..self.data.len() {
            if let Some(r) = region {
                if !r.data[i] {
                    continue;
                }
            }
            total += 1;
            if self.data[i] == other.data[i] {
                same += 1;
            }
        }
        if total == 0 {
            return Ok(1.0);
        }
        Ok(same as f64 / total as f64)
    }

    /// 0/1 intensities, handy for saving masks as 0/255 images.
    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_raw(
            self.width,
            self.height,
            self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
    }

    /// Thresholds an image at 0.5.
    pub fn from_image(img: &GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.data().iter().map(|&v| v >= 0.5).collect(),
        }
    }
}

/// Three-channel image with channels stored as separate planes.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub r: GrayImage,
    pub g: GrayImage,
    pub b: GrayImage,
}

impl RgbImage {
    pub fn new(r: GrayImage, g: GrayImage, b: GrayImage) -> Result<Self> {
        r.ensure_same_dims(&g)?;
        r.ensure_same_dims(&b)?;
        Ok(Self { r, g, b })
    }

    /// Replicates one gray plane into all three channels.
    pub fn from_gray(gray: &GrayImage) -> Self {
        Self {
            r: gray.clone(),
            g: gray.clone(),
            b: gray.clone(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.r.dims()
    }

    /// Luma `0.299 R + 0.587 G + 0.114 B`.
    pub fn luminance(&self) -> GrayImage {
        let data = self
            .r
            .data()
            .iter()
            .zip(self.g.data())
            .zip(self.b.data())
            .map(|((&r, &g), &b)| luma(r, g, b))
            .collect();
        GrayImage::from_raw(self.r.width(), self.r.height(), data)
    }

    pub fn clamp01(&self) -> Self {
        Self {
            r: self.r.clamp01(),
            g: self.g.clamp01(),
            b: self.b.clamp01(),
        }
    }
}

#[inline]
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirror_index_reflects_half_sample() {
        let got: Vec<usize> = (-3..7).map(|i| mirror_index(i, 4)).collect();
        assert_eq!(got, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        assert_eq!(mirror_index(-5, 1), 0);
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(matches!(GrayImage::zeros(0, 3), Err(Error::EmptyImage)));
        assert!(GrayImage::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::from_vec(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn transpose_twice_is_identity() {
        let img = GrayImage::from_fn(3, 2, |x, y| (x + 10 * y) as f64).unwrap();
        let t = img.transpose();
        assert_eq!(t.dims(), (2, 3));
        assert_eq!(t.get(1, 2), img.get(2, 1));
        assert_eq!(t.transpose(), img);
    }

    #[test]
    fn select_follows_mask() {
        let a = GrayImage::filled(2, 1, 1.0).unwrap();
        let b = GrayImage::filled(2, 1, 2.0).unwrap();
        let m = BinaryMask::from_vec(2, 1, vec![true, false]).unwrap();
        assert_eq!(a.select(&b, &m).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn complement_and_agreement() {
        let m = BinaryMask::from_fn(4, 4, |x, _| x < 2).unwrap();
        assert!(m.is_complement_of(&m.not()));
        assert!(!m.is_complement_of(&m));
        assert_eq!(m.agreement(&m.not(), None).unwrap(), 0.0);
        assert_eq!(m.area_fraction(), 0.5);
    }
}

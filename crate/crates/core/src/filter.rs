//! Linear filtering, 2× resampling and histogram entropy.
//!
//! Every filter here extends the image by half-sample mirroring, so a
//! constant image stays constant and no dark halos appear along borders.

use crate::error::{Error, Result};
use crate::image::{mirror_index, GrayImage};

/// Small dense correlation kernel.
///
/// The anchor sits at `((rows - 1) / 2, (cols - 1) / 2)`, so odd kernels are
/// centered and the two-tap difference `[-1, 1]` computes `f(x+1) - f(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("empty kernel".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "kernel buffer of {} taps does not match {rows}x{cols}",
                data.len()
            )));
        }
        let even_ok = (rows == 1 && cols == 2) || (rows == 2 && cols == 1);
        if (rows.is_multiple_of(2) || cols.is_multiple_of(2)) && !even_ok {
            return Err(Error::InvalidParameter(format!(
                "kernel must have odd dimensions or be a 1x2 / 2x1 difference, got {rows}x{cols}"
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a kernel from nested rows.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter("ragged kernel rows".into()));
        }
        Self::new(rows.len(), cols, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    /// Horizontal forward difference `[-1, 1]`.
    pub fn diff_x() -> Self {
        Self::new(1, 2, vec![-1.0, 1.0]).expect("valid kernel")
    }

    /// Vertical difference `[1, -1]ᵀ`, i.e. `f(y) - f(y+1)`.
    pub fn diff_y() -> Self {
        Self::new(2, 1, vec![1.0, -1.0]).expect("valid kernel")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

/// 2-D correlation with mirror extension. Output has the input's size.
pub fn convolve2d(img: &GrayImage, kernel: &Kernel) -> GrayImage {
    let (w, h) = img.dims();
    let ay = ((kernel.rows - 1) / 2) as isize;
    let ax = ((kernel.cols - 1) / 2) as isize;
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for ky in 0..kernel.rows {
                for kx in 0..kernel.cols {
                    let k = kernel.data[ky * kernel.cols + kx];
                    if k != 0.0 {
                        acc += k * img.get_mirrored(x + kx as isize - ax, y + ky as isize - ay);
                    }
                }
            }
            out.push(acc);
        }
    }
    GrayImage::from_raw(w, h, out)
}

/// Centered 1-D correlation along rows (`horizontal = true`) or columns.
pub(crate) fn filter_1d(img: &GrayImage, taps: &[f64], horizontal: bool) -> GrayImage {
    debug_assert!(taps.len() % 2 == 1);
    let (w, h) = img.dims();
    let r = (taps.len() / 2) as isize;
    let mut out = vec![0.0; w * h];
    let src = img.data();
    if horizontal {
        for y in 0..h {
            let row = &src[y * w..(y + 1) * w];
            for x in 0..w {
                let mut acc = 0.0;
                for (k, &t) in taps.iter().enumerate() {
                    acc += t * row[mirror_index(x as isize + k as isize - r, w)];
                }
                out[y * w + x] = acc;
            }
        }
    } else {
        for y in 0..h {
            for (k, &t) in taps.iter().enumerate() {
                let sy = mirror_index(y as isize + k as isize - r, h);
                let srow = &src[sy * w..(sy + 1) * w];
                let orow = &mut out[y * w..(y + 1) * w];
                for (o, &s) in orow.iter_mut().zip(srow) {
                    *o += t * s;
                }
            }
        }
    }
    GrayImage::from_raw(w, h, out)
}

/// Normalized 1-D Gaussian taps with radius `ceil(3 sigma)`.
pub fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable Gaussian blur.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gaussian sigma must be positive, got {sigma}"
        )));
    }
    let taps = gaussian_taps(sigma);
    Ok(filter_1d(&filter_1d(img, &taps, true), &taps, false))
}

/// Shannon entropy in bits over 256 uniform bins of the image clamped to `[0, 1]`.
pub fn entropy(img: &GrayImage) -> f64 {
    let mut hist = [0usize; 256];
    for &v in img.data() {
        let bin = (v.clamp(0.0, 1.0) * 256.0).floor() as usize;
        hist[bin.min(255)] += 1;
    }
    let n = img.len() as f64;
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

const BINOMIAL5: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Output size of one 2× reduction along an axis.
#[inline]
pub fn half_size(n: usize) -> usize {
    n.div_ceil(2)
}

/// Binomial blur followed by keeping every second sample; `n` becomes `ceil(n / 2)`.
pub fn downsample2(img: &GrayImage) -> GrayImage {
    let blurred = filter_1d(&filter_1d(img, &BINOMIAL5, true), &BINOMIAL5, false);
    let (w, h) = img.dims();
    let (nw, nh) = (half_size(w), half_size(h));
    let mut out = Vec::with_capacity(nw * nh);
    for y in 0..nh {
        for x in 0..nw {
            out.push(blurred.get(2 * x, 2 * y));
        }
    }
    GrayImage::from_raw(nw, nh, out)
}

// Zero-insertion followed by the binomial kernel scaled ×2, evaluated
// directly: fine sample `x` collects coarse samples `k` with `|x - 2k| <= 2`.
// The coarse signal is mirror-extended, which keeps constants exact at
// both ends for even and odd target lengths.
fn upsample_axis(src: &[f64], n: usize, target: usize, out: &mut [f64]) {
    for (x, o) in out.iter_mut().enumerate().take(target) {
        let j = (x / 2) as isize;
        *o = if x % 2 == 0 {
            (src[mirror_index(j - 1, n)] + 6.0 * src[mirror_index(j, n)] + src[mirror_index(j + 1, n)]) / 8.0
        } else {
            (src[mirror_index(j, n)] + src[mirror_index(j + 1, n)]) / 2.0
        };
    }
}

/// Expands `img` to `target_w × target_h`, which must be the size it was
/// reduced from (`ceil(target / 2) == current` on each axis).
pub fn upsample2(img: &GrayImage, target_w: usize, target_h: usize) -> Result<GrayImage> {
    let (w, h) = img.dims();
    if target_w == 0 || target_h == 0 || half_size(target_w) != w || half_size(target_h) != h {
        return Err(Error::InvalidParameter(format!(
            "cannot upsample {w}x{h} to {target_w}x{target_h}: target must halve to the current size"
        )));
    }
    let mut wide = vec![0.0; target_w * h];
    for y in 0..h {
        upsample_axis(img.row(y), w, target_w, &mut wide[y * target_w..(y + 1) * target_w]);
    }
    let mut out = vec![0.0; target_w * target_h];
    let mut col = vec![0.0; h];
    let mut col_out = vec![0.0; target_h];
    for x in 0..target_w {
        for y in 0..h {
            col[y] = wide[y * target_w + x];
        }
        upsample_axis(&col, h, target_h, &mut col_out);
        for y in 0..target_h {
            out[y * target_w + x] = col_out[y];
        }
    }
    Ok(GrayImage::from_raw(target_w, target_h, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::GrayImage;
    use proptest::prelude::*;

    fn noise(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        GrayImage::from_fn(w, h, |_, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
        .unwrap()
    }

    #[test]
    fn averaging_kernel_keeps_constants() {
        let img = GrayImage::filled(9, 7, 0.37).unwrap();
        let k = Kernel::new(3, 3, vec![1.0 / 9.0; 9]).unwrap();
        let out = convolve2d(&img, &k);
        assert!(out.max_abs_diff(&img).unwrap() < 1e-15);
    }

    #[test]
    fn difference_of_constant_is_zero() {
        let img = GrayImage::filled(5, 4, 0.8).unwrap();
        assert!(convolve2d(&img, &Kernel::diff_x()).data().iter().all(|&v| v == 0.0));
        assert!(convolve2d(&img, &Kernel::diff_y()).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_kernel() {
        let img = noise(3, 3, 4);
        let k = Kernel::from_rows(&[&[0.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(convolve2d(&img, &k), img);
    }

    #[test]
    fn difference_kernels_orientation() {
        let img = GrayImage::from_fn(4, 3, |x, y| (x * x + 10 * y) as f64).unwrap();
        let dx = convolve2d(&img, &Kernel::diff_x());
        let dy = convolve2d(&img, &Kernel::diff_y());
        assert_eq!(dx.get(1, 0), 3.0);
        assert_eq!(dx.get(3, 0), 0.0);
        assert_eq!(dy.get(0, 0), -10.0);
        assert_eq!(dy.get(0, 2), 0.0);
    }

    #[test]
    fn kernel_validation() {
        assert!(Kernel::new(0, 3, vec![]).is_err());
        assert!(Kernel::new(2, 2, vec![1.0; 4]).is_err());
        assert!(Kernel::from_rows(&[]).is_err());
    }

    #[test]
    fn gaussian_constant_and_impulse() {
        let img = GrayImage::filled(40, 40, 0.6).unwrap();
        let out = gaussian_blur(&img, 5.0).unwrap();
        assert!(out.max_abs_diff(&img).unwrap() < 1e-9);

        let sigma = 1.5;
        let mut imp = GrayImage::zeros(31, 31).unwrap();
        imp.set(15, 15, 1.0);
        let out = gaussian_blur(&imp, sigma).unwrap();
        // Independent evaluation of the discrete, normalized 2-D Gaussian.
        let r = (3.0 * sigma).ceil() as i64;
        let mut norm = 0.0;
        for dy in -r..=r {
            for dx in -r..=r {
                norm += (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
            }
        }
        for dy in -r..=r {
            for dx in -r..=r {
                let want = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp() / norm;
                let got = out.get((15 + dx) as usize, (15 + dy) as usize);
                assert!((got - want).abs() < 1e-12);
            }
        }
        assert_eq!(out.get(15 + r as usize + 1, 15), 0.0);
        assert!(gaussian_blur(&imp, 0.0).is_err());
        assert!(gaussian_blur(&imp, -1.0).is_err());
    }

    #[test]
    fn entropy_fixtures() {
        assert_eq!(entropy(&GrayImage::filled(8, 8, 0.3).unwrap()), 0.0);
        let half = GrayImage::from_fn(8, 8, |x, _| if x < 4 { 0.0 } else { 1.0 }).unwrap();
        assert!((entropy(&half) - 1.0).abs() < 1e-12);
        let all = GrayImage::from_fn(16, 16, |x, y| (y * 16 + x) as f64 / 255.0).unwrap();
        assert!((entropy(&all) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn resample_sizes_and_constants() {
        let img = GrayImage::filled(8, 8, 0.25).unwrap();
        let d = downsample2(&img);
        assert_eq!(d.dims(), (4, 4));
        assert!(d.data().iter().all(|v| (v - 0.25).abs() < 1e-12));
        for (tw, th) in [(8, 8), (7, 8), (8, 7), (7, 7)] {
            let u = upsample2(&d, tw, th).unwrap();
            assert_eq!(u.dims(), (tw, th));
            assert!(u.data().iter().all(|v| (v - 0.25).abs() < 1e-12));
        }
        assert_eq!(downsample2(&GrayImage::zeros(7, 5).unwrap()).dims(), (4, 3));
        assert!(upsample2(&d, 10, 8).is_err());
        assert!(upsample2(&d, 6, 8).is_err());
    }

    #[test]
    fn upsample_reproduces_linear_ramps_in_interior() {
        let coarse = GrayImage::from_fn(8, 8, |x, _| x as f64).unwrap();
        let fine = upsample2(&coarse, 16, 16).unwrap();
        for x in 2..13 {
            assert!((fine.get(x, 5) - x as f64 / 2.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn convolution_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let f = noise(9, 6, seed);
            let g = noise(9, 6, seed ^ 0xABCD);
            let k = Kernel::from_rows(&[&[0.1, -0.4, 0.2], &[0.7, 1.0, -0.3], &[0.0, 0.5, 0.25]]).unwrap();
            let lhs = convolve2d(&f.scale(a).add(&g.scale(b)).unwrap(), &k);
            let rhs = convolve2d(&f, &k).scale(a).add(&convolve2d(&g, &k).scale(b)).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-9);
        }

        #[test]
        fn blur_preserves_mean(seed in any::<u64>(), sigma in 0.5f64..4.0) {
            let f = noise(24, 17, seed);
            let g = gaussian_blur(&f, sigma).unwrap();
            // Mirror extension keeps the mean exact only when the kernel fits
            // inside one reflection period.
            prop_assume!((3.0 * sigma).ceil() as usize <= 17);
            prop_assert!((g.mean() - f.mean()).abs() < 1e-6);
        }

        #[test]
        fn entropy_bounded_and_permutation_invariant(seed in any::<u64>()) {
            let f = noise(12, 9, seed);
            let e = entropy(&f);
            prop_assert!((0.0..=8.0).contains(&e));
            let mut data = f.data().to_vec();
            data.reverse();
            data.rotate_left((seed % 50) as usize);
            let p = GrayImage::from_vec(12, 9, data).unwrap();
            prop_assert!((entropy(&p) - e).abs() < 1e-12);
        }
    }
}

//! Finite-difference operators and their adjoints on a mirror-extended grid.
//!
//! `dx`/`dy` are forward differences that vanish on the last column/row.
//! With that convention `dxᵀdx` is the Neumann 1-D Laplacian, and the
//! second-order stack `(dxx, dyy, √2·dxy)` satisfies
//! `D2ᵀD2 = (dxᵀdx + dyᵀdy)²`, which the spectral solver relies on.

use crate::image::GrayImage;

pub(crate) fn dx(u: &GrayImage) -> GrayImage {
    let (w, h) = u.dims();
    let s = u.data();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w - 1 {
            out[y * w + x] = s[y * w + x + 1] - s[y * w + x];
        }
    }
    GrayImage::from_raw(w, h, out)
}

pub(crate) fn dy(u: &GrayImage) -> GrayImage {
    let (w, h) = u.dims();
    let s = u.data();
    let mut out = vec![0.0; w * h];
    for y in 0..h.saturating_sub(1) {
        for x in 0..w {
            out[y * w + x] = s[(y + 1) * w + x] - s[y * w + x];
        }
    }
    GrayImage::from_raw(w, h, out)
}

pub(crate) fn dx_t(v: &GrayImage) -> GrayImage {
    let (w, h) = v.dims();
    let s = v.data();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            if x >= 1 {
                acc += s[y * w + x - 1];
            }
            if x + 1 < w {
                acc -= s[y * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    GrayImage::from_raw(w, h, out)
}

pub(crate) fn dy_t(v: &GrayImage) -> GrayImage {
    let (w, h) = v.dims();
    let s = v.data();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            if y >= 1 {
                acc += s[(y - 1) * w + x];
            }
            if y + 1 < h {
                acc -= s[y * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    GrayImage::from_raw(w, h, out)
}

/// Centered second difference along x with mirror ends; self-adjoint.
pub(crate) fn dxx(u: &GrayImage) -> GrayImage {
    let (w, h) = u.dims();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w as isize {
            out[y * w + x as usize] =
                u.get_mirrored(x - 1, y as isize) - 2.0 * u.get_mirrored(x, y as isize) + u.get_mirrored(x + 1, y as isize);
        }
    }
    GrayImage::from_raw(w, h, out)
}

pub(crate) fn dyy(u: &GrayImage) -> GrayImage {
    let (w, h) = u.dims();
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w {
            out[y as usize * w + x] =
                u.get_mirrored(x as isize, y - 1) - 2.0 * u.get_mirrored(x as isize, y) + u.get_mirrored(x as isize, y + 1);
        }
    }
    GrayImage::from_raw(w, h, out)
}

pub(crate) fn dxy(u: &GrayImage) -> GrayImage {
    dy(&dx(u))
}

pub(crate) fn dxy_t(v: &GrayImage) -> GrayImage {
    dx_t(&dy_t(v))
}

/// Stacked second-order field `(dxx, dyy, √2·dxy)`.
#[derive(Clone, Debug)]
pub(crate) struct Hessian {
    pub xx: GrayImage,
    pub yy: GrayImage,
    pub xy: GrayImage,
}

impl Hessian {
    pub fn of(u: &GrayImage) -> Self {
        Self {
            xx: dxx(u),
            yy: dyy(u),
            xy: dxy(u).scale(std::f64::consts::SQRT_2),
        }
    }

    /// Per-pixel squared Frobenius magnitude.
    pub fn magnitude_sq(&self) -> Vec<f64> {
        self.xx
            .data()
            .iter()
            .zip(self.yy.data())
            .zip(self.xy.data())
            .map(|((a, b), c)| a * a + b * b + c * c)
            .collect()
    }

    /// `D2ᵀ g`.
    pub fn adjoint(&self) -> GrayImage {
        let xy = dxy_t(&self.xy).scale(std::f64::consts::SQRT_2);
        let a = dxx(&self.xx).into_vec();
        let b = dyy(&self.yy).into_vec();
        let (w, h) = self.xx.dims();
        let data = a
            .iter()
            .zip(&b)
            .zip(xy.data())
            .map(|((p, q), r)| p + q + r)
            .collect();
        GrayImage::from_raw(w, h, data)
    }

    /// Zeroes every pixel whose squared magnitude is at most `threshold`.
    pub fn hard_threshold(mut self, threshold: f64) -> Self {
        let mag = self.magnitude_sq();
        let (w, h) = self.xx.dims();
        let mask = |img: &GrayImage| {
            let data = img
                .data()
                .iter()
                .zip(&mag)
                .map(|(&v, &m)| if m > threshold { v } else { 0.0 })
                .collect();
            GrayImage::from_raw(w, h, data)
        };
        self.xx = mask(&self.xx);
        self.yy = mask(&self.yy);
        self.xy = mask(&self.xy);
        self
    }
}

/// `(dxᵀdx + dyᵀdy) u`.
pub(crate) fn first_order_normal(u: &GrayImage) -> GrayImage {
    let a = dx_t(&dx(u));
    let b = dy_t(&dy(u));
    a.add(&b).expect("same dims")
}

/// `(I + α D1ᵀD1 + β D2ᵀD2) u`.
pub(crate) fn system_apply(u: &GrayImage, alpha: f64, beta: f64) -> GrayImage {
    let first = first_order_normal(u);
    let second = Hessian::of(u).adjoint();
    let (w, h) = u.dims();
    let data = u
        .data()
        .iter()
        .zip(first.data())
        .zip(second.data())
        .map(|((v, f), s)| v + alpha * f + beta * s)
        .collect();
    GrayImage::from_raw(w, h, data)
}

pub(crate) fn dot(a: &GrayImage, b: &GrayImage) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut s = seed | 1;
        GrayImage::from_fn(w, h, |_, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .unwrap()
    }

    #[test]
    fn adjoints_match_inner_products() {
        for (w, h) in [(7, 5), (1, 4), (6, 1), (9, 9)] {
            let u = noise(w, h, 3);
            let v = noise(w, h, 11);
            let pairs: [(fn(&GrayImage) -> GrayImage, fn(&GrayImage) -> GrayImage); 4] =
                [(dx, dx_t), (dy, dy_t), (dxy, dxy_t), (dxx, dxx)];
            for (op, adj) in pairs {
                let lhs = dot(&op(&u), &v);
                let rhs = dot(&u, &adj(&v));
                assert!((lhs - rhs).abs() < 1e-12, "{w}x{h}: {lhs} vs {rhs}");
            }
            assert!((dot(&dyy(&u), &v) - dot(&u, &dyy(&v))).abs() < 1e-12);
        }
    }

    #[test]
    fn second_difference_is_negative_neumann_laplacian() {
        let u = noise(8, 6, 5);
        let a = dxx(&u);
        let b = dx_t(&dx(&u)).scale(-1.0);
        assert!(a.max_abs_diff(&b).unwrap() < 1e-14);
    }

    #[test]
    fn hessian_normal_operator_is_squared_laplacian() {
        let u = noise(10, 7, 9);
        let l = first_order_normal(&u);
        let l2 = first_order_normal(&l);
        let h = Hessian::of(&u).adjoint();
        assert!(h.max_abs_diff(&l2).unwrap() < 1e-12);
    }

    #[test]
    fn constants_are_in_every_kernel() {
        let c = GrayImage::filled(5, 5, 0.4).unwrap();
        assert!(Hessian::of(&c).magnitude_sq().iter().all(|&m| m == 0.0));
        assert!(first_order_normal(&c).data().iter().all(|&v| v == 0.0));
    }
}

//! Focus decision maps, their consistency verification, and the texture
//! fusion rules that consume them.

use std::collections::VecDeque;

use crate::error::Result;
use crate::filter::filter_1d;
use crate::image::{ensure_dims, BinaryMask, GrayImage};

/// Denominator below which texture weights fall back to one half each.
pub const WEIGHT_EPS: f64 = 1e-12;

/// Raw and verified focus decision maps.
#[derive(Clone, Debug)]
pub struct DecisionMaps {
    pub map_raw: BinaryMask,
    pub map_verified: BinaryMask,
}

/// Consistency verification settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyParams {
    /// Components smaller than this fraction of the image are flipped.
    pub area_frac: f64,
    /// Majority filters of width `2^l + 1` run for `l = 1..=levels`.
    pub levels: usize,
}

impl Default for VerifyParams {
    fn default() -> Self {
        Self {
            area_frac: 0.01,
            levels: 3,
        }
    }
}

/// `1` where `tm1 > tm2`; ties go to the second image.
pub fn focus_decision(tm1: &GrayImage, tm2: &GrayImage) -> Result<BinaryMask> {
    tm1.ensure_same_dims(tm2)?;
    BinaryMask::from_vec(
        tm1.width(),
        tm1.height(),
        tm1.data().iter().zip(tm2.data()).map(|(a, b)| a > b).collect(),
    )
}

/// 8-connected components of pixels equal to `value`, as lists of indices.
fn components(mask: &BinaryMask, value: bool) -> Vec<Vec<usize>> {
    let (w, h) = mask.dims();
    let data = mask.data();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if seen[start] || data[start] != value {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] && data[j] == value {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Flips every connected region (either polarity) smaller than
/// `area_frac × pixel count`. Foreground regions are processed first.
pub fn remove_small_regions(mask: &BinaryMask, area_frac: f64) -> BinaryMask {
    let (w, h) = mask.dims();
    let min_area = area_frac * (w * h) as f64;
    let mut data = mask.data().to_vec();
    for value in [true, false] {
        let current = BinaryMask::from_vec(w, h, data.clone()).expect("same dims");
        for comp in components(&current, value) {
            if (comp.len() as f64) < min_area {
                for i in comp {
                    data[i] = !value;
                }
            }
        }
    }
    BinaryMask::from_vec(w, h, data).expect("same dims")
}

/// Square majority filter of odd width `window` with mirror extension.
pub fn majority_filter(mask: &BinaryMask, window: usize) -> BinaryMask {
    debug_assert!(window % 2 == 1);
    let ones = mask.to_image();
    let taps = vec![1.0; window];
    let counts = filter_1d(&filter_1d(&ones, &taps, true), &taps, false);
    let half = (window * window) as f64 / 2.0;
    BinaryMask::from_vec(
        mask.width(),
        mask.height(),
        counts.data().iter().map(|&c| c > half).collect(),
    )
    .expect("same dims")
}

/// Small-region removal followed by majority filtering at widths
/// `3, 5, 9, ..., 2^levels + 1`.
pub fn consistency_verify(map_raw: &BinaryMask, params: VerifyParams) -> BinaryMask {
    let mut map = remove_small_regions(map_raw, params.area_frac);
    for l in 1..=params.levels {
        map = majority_filter(&map, (1usize << l) + 1);
    }
    map
}

/// Selects `t1` where the verified map is set and `t2` elsewhere.
pub fn compose_focused_texture(t1: &GrayImage, t2: &GrayImage, omp: &BinaryMask) -> Result<GrayImage> {
    t1.select(t2, omp)
}

/// Per-pixel weights `(w4, w3)` with `w4 + w3 = 1`; equal halves where the
/// saliency sum vanishes.
pub fn texture_weights(tm4: &GrayImage, tm3: &GrayImage) -> Result<(GrayImage, GrayImage)> {
    tm4.ensure_same_dims(tm3)?;
    let w4 = tm4.zip_map(tm3, |a, b| {
        let s = a + b;
        if s < WEIGHT_EPS {
            0.5
        } else {
            a / s
        }
    })?;
    let w3 = w4.map(|v| 1.0 - v);
    Ok((w4, w3))
}

/// Saliency-weighted average of the focused visible texture `t4` and the
/// infrared texture `t3`.
pub fn fuse_texture(t4: &GrayImage, t3: &GrayImage, tm4: &GrayImage, tm3: &GrayImage) -> Result<GrayImage> {
    t4.ensure_same_dims(t3)?;
    ensure_dims(t4.dims(), tm4.dims())?;
    let (w4, _) = texture_weights(tm4, tm3)?;
    let data = t4
        .data()
        .iter()
        .zip(t3.data())
        .zip(w4.data())
        .map(|((&a, &b), &w)| w * a + (1.0 - w) * b)
        .collect();
    GrayImage::from_vec(t4.width(), t4.height(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use proptest::prelude::*;

    fn img(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> GrayImage {
        GrayImage::from_fn(w, h, f).unwrap()
    }

    #[test]
    fn decision_tie_and_dominance() {
        let a = img(4, 4, |x, y| (x + y) as f64);
        assert_eq!(focus_decision(&a, &a).unwrap().count_ones(), 0);
        assert_eq!(focus_decision(&a.offset(1.0), &a).unwrap().count_ones(), 16);
        let small = GrayImage::zeros(3, 4).unwrap();
        assert!(matches!(focus_decision(&a, &small), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn verification_fixed_points() {
        let ones = BinaryMask::filled(40, 40, true).unwrap();
        assert_eq!(consistency_verify(&ones, VerifyParams::default()), ones);
        let mut speck = ones.clone();
        speck.set(17, 23, false);
        assert_eq!(consistency_verify(&speck, VerifyParams::default()), ones);
    }

    #[test]
    fn half_plane_is_stable() {
        for vertical in [true, false] {
            let m = BinaryMask::from_fn(48, 40, |x, y| if vertical { x < 20 } else { y < 15 }).unwrap();
            let v = consistency_verify(&m, VerifyParams::default());
            assert_eq!(v, m);
            assert_eq!(consistency_verify(&v, VerifyParams::default()), v);
        }
        // Diagonal boundary: only a band of half the largest window may change.
        let m = BinaryMask::from_fn(64, 64, |x, y| x + y < 64).unwrap();
        let v = consistency_verify(&m, VerifyParams::default());
        for y in 0..64 {
            for x in 0..64 {
                let dist = ((x + y) as f64 - 63.5).abs() / std::f64::consts::SQRT_2;
                if dist > 4.0 * std::f64::consts::SQRT_2 {
                    assert_eq!(v.get(x, y), m.get(x, y), "({x},{y})");
                }
            }
        }
    }

    #[test]
    fn small_regions_of_both_polarities_flip() {
        let mut m = BinaryMask::from_fn(30, 30, |x, _| x < 15).unwrap();
        m.set(25, 5, true);
        m.set(26, 5, true);
        m.set(3, 3, false);
        let cleaned = remove_small_regions(&m, 0.01);
        assert!(!cleaned.get(25, 5) && !cleaned.get(26, 5));
        assert!(cleaned.get(3, 3));
    }

    #[test]
    fn diagonal_neighbours_join_components() {
        let m = BinaryMask::from_fn(5, 5, |x, y| x == y).unwrap();
        assert_eq!(components(&m, true).len(), 1);
        // The background also touches itself diagonally across the line.
        assert_eq!(components(&m, false).len(), 1);
        let ring = BinaryMask::from_fn(5, 5, |x, y| x == 0 || y == 0 || x == 4 || y == 4).unwrap();
        assert_eq!(components(&ring, false).len(), 1);
        assert_eq!(components(&ring.not(), false).len(), 1);
    }

    #[test]
    fn compose_selects_by_map() {
        let t1 = img(5, 5, |x, _| x as f64);
        let t2 = img(5, 5, |_, y| -(y as f64));
        let all = BinaryMask::filled(5, 5, true).unwrap();
        assert_eq!(compose_focused_texture(&t1, &t2, &all).unwrap(), t1);
        let m = BinaryMask::from_fn(5, 5, |x, _| x % 2 == 0).unwrap();
        assert_eq!(compose_focused_texture(&t1, &t1, &m).unwrap(), t1);
    }

    #[test]
    fn texture_fusion_rules() {
        let t4 = img(6, 6, |x, y| (x * y) as f64 * 0.01);
        let t3 = img(6, 6, |x, _| -(x as f64) * 0.02);
        let tm = GrayImage::filled(6, 6, 0.3).unwrap();
        let zero = GrayImage::zeros(6, 6).unwrap();
        let half = t4.add(&t3).unwrap().scale(0.5);
        assert!(fuse_texture(&t4, &t3, &tm, &tm).unwrap().max_abs_diff(&half).unwrap() < 1e-15);
        assert_eq!(fuse_texture(&t4, &t3, &tm, &zero).unwrap(), t4);
        assert!(fuse_texture(&t4, &t3, &zero, &zero).unwrap().max_abs_diff(&half).unwrap() < 1e-15);
        let (w4, w3) = texture_weights(&zero, &zero).unwrap();
        assert!(w4.data().iter().zip(w3.data()).all(|(a, b)| *a == 0.5 && a + b == 1.0));
    }

    proptest! {
        #[test]
        fn fused_texture_is_convex(vals in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.0f64..2.0, 0.0f64..2.0), 16)) {
            let t4 = GrayImage::from_vec(4, 4, vals.iter().map(|v| v.0).collect()).unwrap();
            let t3 = GrayImage::from_vec(4, 4, vals.iter().map(|v| v.1).collect()).unwrap();
            let tm4 = GrayImage::from_vec(4, 4, vals.iter().map(|v| v.2).collect()).unwrap();
            let tm3 = GrayImage::from_vec(4, 4, vals.iter().map(|v| v.3).collect()).unwrap();
            let ft = fuse_texture(&t4, &t3, &tm4, &tm3).unwrap();
            let (w4, w3) = texture_weights(&tm4, &tm3).unwrap();
            for i in 0..16 {
                let (a, b) = (t4.data()[i], t3.data()[i]);
                let v = ft.data()[i];
                prop_assert!(v >= a.min(b) - 1e-15 && v <= a.max(b) + 1e-15);
                prop_assert!((w4.data()[i] + w3.data()[i] - 1.0).abs() <= f64::EPSILON);
            }
        }

        #[test]
        fn decision_is_scale_covariant(vals in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 25), k in 0.01f64..100.0) {
            let a = GrayImage::from_vec(5, 5, vals.iter().map(|v| v.0).collect()).unwrap();
            let b = GrayImage::from_vec(5, 5, vals.iter().map(|v| v.1).collect()).unwrap();
            prop_assert_eq!(focus_decision(&a, &b).unwrap(), focus_decision(&a.scale(k), &b.scale(k)).unwrap());
        }
    }
}

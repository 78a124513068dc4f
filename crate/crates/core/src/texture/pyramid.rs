//! Gaussian / Laplacian pyramids.

use crate::error::{Error, Result};
use crate::filter::{downsample2, upsample2};
use crate::image::GrayImage;

/// Gaussian levels `G_0..=G_N` and Laplacian levels `L_0..L_N`, with
/// `L_l = G_l − up(G_{l+1})`.
#[derive(Clone, Debug)]
pub struct PyramidStack {
    pub gaussian: Vec<GrayImage>,
    pub laplacian: Vec<GrayImage>,
}

impl PyramidStack {
    /// Number of decompositions `N`.
    pub fn levels(&self) -> usize {
        self.laplacian.len()
    }

    /// Folds the Laplacian levels back onto the coarsest Gaussian level.
    pub fn collapse(&self) -> GrayImage {
        collapse(&self.laplacian, self.gaussian.last().expect("non-empty pyramid"))
    }
}

/// Reconstructs `G_0` from `L_0..L_{N-1}` and `G_N`.
pub fn collapse(laplacian: &[GrayImage], coarsest: &GrayImage) -> GrayImage {
    laplacian.iter().rev().fold(coarsest.clone(), |acc, lap| {
        let up = upsample2(&acc, lap.width(), lap.height()).expect("pyramid sizes are consistent");
        lap.add(&up).expect("same dims")
    })
}

/// Smallest side length that supports `levels` reductions.
pub fn min_side_for(levels: usize) -> usize {
    4usize << levels
}

/// Builds an `N`-level pyramid. Requires `min(width, height) / 2^N ≥ 4`.
pub fn build_pyramid(img: &GrayImage, levels: usize) -> Result<PyramidStack> {
    if levels == 0 {
        return Err(Error::InvalidParameter("pyramid needs at least one level".into()));
    }
    let (w, h) = img.dims();
    if w.min(h) < min_side_for(levels) {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            reason: format!("{levels} pyramid levels need a side of at least {}", min_side_for(levels)),
        });
    }
    let mut gaussian = Vec::with_capacity(levels + 1);
    gaussian.push(img.clone());
    for l in 0..levels {
        let next = downsample2(&gaussian[l]);
        gaussian.push(next);
    }
    let laplacian = (0..levels)
        .map(|l| {
            let g = &gaussian[l];
            let up = upsample2(&gaussian[l + 1], g.width(), g.height()).expect("consistent sizes");
            g.sub(&up).expect("same dims")
        })
        .collect();
    Ok(PyramidStack { gaussian, laplacian })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_contract() {
        let img = GrayImage::zeros(64, 64).unwrap();
        let p = build_pyramid(&img, 3).unwrap();
        let g: Vec<usize> = p.gaussian.iter().map(|i| i.width()).collect();
        let l: Vec<usize> = p.laplacian.iter().map(|i| i.width()).collect();
        assert_eq!(g, vec![64, 32, 16, 8]);
        assert_eq!(l, vec![64, 32, 16]);
        assert_eq!(p.levels(), 3);
    }

    #[test]
    fn constant_levels() {
        let img = GrayImage::filled(40, 33, 0.7).unwrap();
        let p = build_pyramid(&img, 3).unwrap();
        for g in &p.gaussian {
            assert!(g.data().iter().all(|v| (v - 0.7).abs() < 1e-12));
        }
        for l in &p.laplacian {
            assert!(l.data().iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn rejects_small_images() {
        let img = GrayImage::zeros(31, 64).unwrap();
        assert!(matches!(build_pyramid(&img, 3), Err(Error::TooSmall { .. })));
        assert!(build_pyramid(&GrayImage::zeros(32, 32).unwrap(), 3).is_ok());
        assert!(build_pyramid(&img, 0).is_err());
    }
}

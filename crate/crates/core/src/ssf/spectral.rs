//! Exact solve of `(I + α D1ᵀD1 + β D2ᵀD2) u = rhs` in the DCT-II basis.
//!
//! The Neumann Laplacian `L = dxᵀdx + dyᵀdy` is diagonalized by the 2-D
//! DCT-II with eigenvalues `(2 - 2cos(πi/W)) + (2 - 2cos(πj/H))`, and
//! `D2ᵀD2 = L²`, so the system matrix has eigenvalues `1 + αλ + βλ²`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use crate::image::GrayImage;

pub(crate) struct SpectralSolver {
    width: usize,
    height: usize,
    row_dct: Arc<dyn TransformType2And3<f64>>,
    col_dct: Arc<dyn TransformType2And3<f64>>,
    laplacian_eig: Vec<f64>,
}

impl SpectralSolver {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = DctPlanner::new();
        let row_dct = planner.plan_dct2(width);
        let col_dct = planner.plan_dct2(height);
        let ex: Vec<f64> = (0..width).map(|i| 2.0 - 2.0 * (PI * i as f64 / width as f64).cos()).collect();
        let ey: Vec<f64> = (0..height).map(|j| 2.0 - 2.0 * (PI * j as f64 / height as f64).cos()).collect();
        let mut laplacian_eig = Vec::with_capacity(width * height);
        for &b in &ey {
            for &a in &ex {
                laplacian_eig.push(a + b);
            }
        }
        Self {
            width,
            height,
            row_dct,
            col_dct,
            laplacian_eig,
        }
    }

    fn transform(&self, data: &mut [f64], forward: bool) {
        let (w, h) = (self.width, self.height);
        for row in data.chunks_exact_mut(w) {
            if forward {
                self.row_dct.process_dct2(row);
            } else {
                self.row_dct.process_dct3(row);
            }
        }
        let mut col = vec![0.0; h];
        for x in 0..w {
            for y in 0..h {
                col[y] = data[y * w + x];
            }
            if forward {
                self.col_dct.process_dct2(&mut col);
            } else {
                self.col_dct.process_dct3(&mut col);
            }
            for y in 0..h {
                data[y * w + x] = col[y];
            }
        }
    }

    pub fn solve(&self, rhs: &GrayImage, alpha: f64, beta: f64) -> GrayImage {
        debug_assert_eq!(rhs.dims(), (self.width, self.height));
        let mut data = rhs.data().to_vec();
        self.transform(&mut data, true);
        // DCT-III after unnormalized DCT-II scales each axis by n / 2.
        let norm = 4.0 / (self.width * self.height) as f64;
        for (v, &l) in data.iter_mut().zip(&self.laplacian_eig) {
            *v *= norm / (1.0 + alpha * l + beta * l * l);
        }
        self.transform(&mut data, false);
        GrayImage::from_raw(self.width, self.height, data)
    }
}

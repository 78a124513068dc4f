//! Structure-layer fusion.
//!
//! Each structure layer gets a global weight proportional to its entropy
//! times its directional frequency variance `ψ`. `ψ` is measured on
//! non-overlapping DCT blocks (3×3 by default): the AC coefficients of each
//! block are grouped by orientation (0°, 45°, 90°, 135°), the population
//! standard deviation of each group is normalized by their mean, and the
//! variance of those four normalized values is averaged over all blocks.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::filter::entropy;
use crate::image::GrayImage;

/// Denominator below which structure weights fall back to uniform.
pub const WEIGHT_EPS: f64 = 1e-12;

/// Default DCT block size.
pub const DEFAULT_BLOCK: usize = 3;

/// Per-layer features driving the structure weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructureFeatures {
    pub psi: f64,
    pub entropy_e: f64,
    pub weight: f64,
}

fn dct_basis(n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for k in 0..n {
        let a = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for i in 0..n {
            c[k * n + i] = a * (PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
        }
    }
    c
}

fn check_block(block: &[f64], n: usize) -> Result<()> {
    if n == 0 || block.len() != n * n {
        return Err(Error::InvalidParameter(format!(
            "expected a {n}x{n} block, got {} samples",
            block.len()
        )));
    }
    Ok(())
}

// out = A · X · Bᵀ for n×n matrices stored row-major.
fn sandwich(a: &[f64], x: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut tmp = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            tmp[i * n + j] = (0..n).map(|k| a[i * n + k] * x[k * n + j]).sum();
        }
    }
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = (0..n).map(|k| tmp[i * n + k] * b[j * n + k]).sum();
        }
    }
    out
}

fn transpose(m: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = m[i * n + j];
        }
    }
    t
}

/// Orthonormal 2-D DCT-II of a row-major `n × n` block.
pub fn dct2d(block: &[f64], n: usize) -> Result<Vec<f64>> {
    check_block(block, n)?;
    let c = dct_basis(n);
    Ok(sandwich(&c, block, &c, n))
}

/// Inverse of [`dct2d`].
pub fn idct2d(coeffs: &[f64], n: usize) -> Result<Vec<f64>> {
    check_block(coeffs, n)?;
    let ct = transpose(&dct_basis(n), n);
    Ok(sandwich(&ct, coeffs, &ct, n))
}

/// Orthonormal DCT-II of a 3×3 block.
pub fn dct3(block: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let flat: Vec<f64> = block.iter().flatten().copied().collect();
    let c = dct2d(&flat, 3).expect("3x3 block");
    [[c[0], c[1], c[2]], [c[3], c[4], c[5]], [c[6], c[7], c[8]]]
}

/// Orientation of AC coefficient `(row, col)`: 0 → 0°, 1 → 45°, 2 → 90°, 3 → 135°.
pub fn direction_of(row: usize, col: usize) -> Option<usize> {
    match (row, col) {
        (0, 0) => None,
        (0, _) => Some(0),
        (_, 0) => Some(2),
        (r, c) if r == c => Some(1),
        _ => Some(3),
    }
}

fn population_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Directional standard deviations `[σ0, σ45, σ90, σ135]` of a block's DCT coefficients.
pub fn directional_stds(coeffs: &[f64], n: usize) -> [f64; 4] {
    let mut groups: [Vec<f64>; 4] = Default::default();
    for r in 0..n {
        for c in 0..n {
            if let Some(d) = direction_of(r, c) {
                groups[d].push(coeffs[r * n + c]);
            }
        }
    }
    [
        population_std(&groups[0]),
        population_std(&groups[1]),
        population_std(&groups[2]),
        population_std(&groups[3]),
    ]
}

/// Variance of the four mean-normalized directional stds; zero for flat blocks.
pub fn block_anisotropy(coeffs: &[f64], n: usize) -> f64 {
    let s = directional_stds(coeffs, n);
    let phi = s.iter().sum::<f64>() / 4.0;
    if phi < WEIGHT_EPS {
        return 0.0;
    }
    let norm: Vec<f64> = s.iter().map(|v| v / phi).collect();
    let mean = norm.iter().sum::<f64>() / 4.0;
    norm.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0
}

/// Image-level frequency variance `ψ` over non-overlapping `block × block`
/// tiles (partial tiles at the right and bottom are skipped).
pub fn freq_variance_with_block(s: &GrayImage, block: usize) -> Result<f64> {
    if block < 2 {
        return Err(Error::InvalidParameter(format!("struct.block must be at least 2, got {block}")));
    }
    let (w, h) = s.dims();
    let (bx, by) = (w / block, h / block);
    if bx == 0 || by == 0 {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            reason: format!("needs at least one {block}x{block} block"),
        });
    }
    let c = dct_basis(block);
    let mut tile = vec![0.0; block * block];
    let mut total = 0.0;
    for ty in 0..by {
        for tx in 0..bx {
            for r in 0..block {
                for q in 0..block {
                    tile[r * block + q] = s.get(tx * block + q, ty * block + r);
                }
            }
            let coeffs = sandwich(&c, &tile, &c, block);
            total += block_anisotropy(&coeffs, block);
        }
    }
    Ok(total / (bx * by) as f64)
}

/// `ψ` with the default 3×3 blocks.
pub fn freq_variance(s: &GrayImage) -> Result<f64> {
    freq_variance_with_block(s, DEFAULT_BLOCK)
}

/// Features and normalized weights for a set of structure layers.
pub fn structure_features(structures: &[GrayImage], block: usize) -> Result<Vec<StructureFeatures>> {
    if structures.is_empty() {
        return Err(Error::Arity { expected: 1, found: 0 });
    }
    for s in &structures[1..] {
        structures[0].ensure_same_dims(s)?;
    }
    let mut feats = Vec::with_capacity(structures.len());
    for s in structures {
        feats.push(StructureFeatures {
            psi: freq_variance_with_block(s, block)?,
            entropy_e: entropy(s),
            weight: 0.0,
        });
    }
    let k: f64 = feats.iter().map(|f| f.entropy_e * f.psi).sum();
    let m = feats.len() as f64;
    for f in &mut feats {
        f.weight = if k < WEIGHT_EPS { 1.0 / m } else { f.entropy_e * f.psi / k };
    }
    Ok(feats)
}

/// Weighted sum of structure layers with the given per-layer weights.
pub fn weighted_sum(structures: &[GrayImage], weights: &[f64]) -> Result<GrayImage> {
    let mut acc = structures[0].scale(weights[0]);
    for (s, &w) in structures.iter().zip(weights).skip(1) {
        acc = acc.zip_map(s, |a, b| a + w * b)?;
    }
    Ok(acc)
}

/// Fuses structure layers by `FS = Σ (E_m ψ_m / K) S_m`, `K = Σ E_m ψ_m`,
/// falling back to equal weights when `K` vanishes.
pub fn fuse_structure(structures: &[GrayImage], block: usize) -> Result<(GrayImage, Vec<StructureFeatures>)> {
    let feats = structure_features(structures, block)?;
    let weights: Vec<f64> = feats.iter().map(|f| f.weight).collect();
    Ok((weighted_sum(structures, &weights)?, feats))
}

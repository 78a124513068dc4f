//! Matrix-free conjugate gradient for the smoothing subproblem.

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::ssf::operators::{dot, system_apply};

/// Iteration budget: ten times the classical CG estimate
/// `½·√κ·ln(2/tol)` with `κ ≤ 1 + 8α + 64β` (the Laplacian spectrum lies in `[0, 8]`).
pub(crate) fn iteration_cap(alpha: f64, beta: f64, tol: f64) -> usize {
    let kappa = 1.0 + 8.0 * alpha + 64.0 * beta;
    let expected = (0.5 * kappa.sqrt() * (2.0 / tol).ln()).ceil().max(50.0);
    10 * expected as usize
}

/// Solves `(I + α D1ᵀD1 + β D2ᵀD2) u = rhs` from the initial guess `x0`
/// until `‖r‖ ≤ tol·‖rhs‖`.
pub(crate) fn solve(rhs: &GrayImage, x0: &GrayImage, alpha: f64, beta: f64, tol: f64) -> Result<GrayImage> {
    solve_capped(rhs, x0, alpha, beta, tol, iteration_cap(alpha, beta, tol))
}

fn solve_capped(rhs: &GrayImage, x0: &GrayImage, alpha: f64, beta: f64, tol: f64, cap: usize) -> Result<GrayImage> {
    let (w, h) = rhs.dims();
    let b_norm = dot(rhs, rhs).sqrt();
    if b_norm == 0.0 {
        return Ok(GrayImage::from_raw(w, h, vec![0.0; w * h]));
    }
    let mut x = x0.data().to_vec();
    let ax = system_apply(x0, alpha, beta);
    let mut r: Vec<f64> = rhs.data().iter().zip(ax.data()).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    for _ in 0..cap {
        if rr.sqrt() <= tol * b_norm {
            return Ok(GrayImage::from_raw(w, h, x));
        }
        let p_img = GrayImage::from_raw(w, h, p.clone());
        let ap = system_apply(&p_img, alpha, beta);
        let pap: f64 = p.iter().zip(ap.data()).map(|(a, b)| a * b).sum();
        let step = rr / pap;
        for i in 0..x.len() {
            x[i] += step * p[i];
            r[i] -= step * ap.data()[i];
        }
        let rr_next: f64 = r.iter().map(|v| v * v).sum();
        let ratio = rr_next / rr;
        for i in 0..p.len() {
            p[i] = r[i] + ratio * p[i];
        }
        rr = rr_next;
    }
    if rr.sqrt() <= tol * b_norm {
        return Ok(GrayImage::from_raw(w, h, x));
    }
    Err(Error::NonConvergence {
        iterations: cap,
        residual: rr.sqrt() / b_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_known_solution() {
        let v = GrayImage::from_fn(12, 9, |x, y| ((x * 5 + y * 3) % 7) as f64 / 7.0).unwrap();
        let rhs = system_apply(&v, 0.8, 2.0);
        let u = solve(&rhs, &rhs, 0.8, 2.0, 1e-10).unwrap();
        assert!(u.max_abs_diff(&v).unwrap() < 1e-7);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let z = GrayImage::zeros(4, 4).unwrap();
        assert_eq!(solve(&z, &z, 0.8, 1.0, 1e-6).unwrap(), z);
    }

    #[test]
    fn reports_residual_when_capped() {
        let v = GrayImage::from_fn(16, 16, |x, y| ((x * x + 3 * y) % 13) as f64).unwrap();
        let rhs = system_apply(&v, 0.8, 1e4);
        let zero = GrayImage::zeros(16, 16).unwrap();
        match solve_capped(&rhs, &zero, 0.8, 1e4, 1e-12, 2) {
            Err(Error::NonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-12);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn cap_grows_with_beta() {
        assert!(iteration_cap(0.8, 1e5, 1e-4) > iteration_cap(0.8, 1.0, 1e-4));
        assert_eq!(iteration_cap(0.0, 0.0, 1e-4), 500);
    }
}

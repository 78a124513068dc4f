//! Semi-sparsity smoothing filter.
//!
//! [`ssf_smooth`] approximately minimizes
//!
//! ```text
//! ‖u − Zf‖² + α‖∇u − ∇(Zf)‖² + λ‖∇²u‖₀
//! ```
//!
//! where `∇²u` is the stacked second-order field `(uxx, uyy, √2·uxy)` and the
//! L0 term counts pixels at which it is non-zero. The solver is half-quadratic
//! splitting: an auxiliary field `g` takes the hard-thresholded Hessian, then
//! the quadratic subproblem
//!
//! ```text
//! (I + α D1ᵀD1 + β D2ᵀD2) u = Zf + α D1ᵀD1 (Zf) + β D2ᵀ g
//! ```
//!
//! is solved exactly, with `β` growing geometrically from `beta0` to `beta_max`.
//!
//! [`decompose`] splits an image into the smoothed structure layer and the
//! signed texture residual.

mod cg;
pub(crate) mod operators;
mod spectral;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use operators::{dx, dy, first_order_normal, Hessian};
use spectral::SpectralSolver;

/// Linear solver used for the quadratic subproblem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InnerSolver {
    /// Direct diagonalization by the 2-D DCT-II.
    #[default]
    Spectral,
    /// Matrix-free conjugate gradient to `inner_tol`.
    ConjugateGradient,
}

/// Smoothing parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SsfParams {
    /// Weight of the first-order fidelity term.
    pub alpha: f64,
    /// Weight of the L0 penalty on second-order differences.
    pub lambda: f64,
    /// Highest regularization order. Only `2` is supported.
    pub order_n: usize,
    /// Per-pixel confidence `Z` in `(0, 1]`; `None` means all ones.
    pub confidence: Option<GrayImage>,
    pub beta0: f64,
    pub beta_mult: f64,
    pub beta_max: f64,
    /// Relative residual target of the conjugate-gradient solver.
    pub inner_tol: f64,
    pub max_outer_iters: usize,
    pub solver: InnerSolver,
}

impl Default for SsfParams {
    fn default() -> Self {
        Self::with_lambda(0.05)
    }
}

impl SsfParams {
    /// Defaults with a custom `lambda`; `beta0` follows as `2·lambda`.
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            alpha: 0.8,
            lambda,
            order_n: 2,
            confidence: None,
            beta0: if lambda > 0.0 { 2.0 * lambda } else { 0.1 },
            beta_mult: 2.0,
            beta_max: 1e5,
            inner_tol: 1e-4,
            max_outer_iters: 30,
            solver: InnerSolver::Spectral,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return bad(format!("ssf.alpha must be nonnegative, got {}", self.alpha));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad(format!("ssf.lambda must be nonnegative, got {}", self.lambda));
        }
        if self.order_n != 2 {
            return bad(format!("only second-order regularization is implemented, got order {}", self.order_n));
        }
        if !(self.beta0 > 0.0) {
            return bad(format!("ssf.beta0 must be positive, got {}", self.beta0));
        }
        if !(self.beta_mult > 1.0) {
            return bad(format!("ssf.beta_mult must exceed 1, got {}", self.beta_mult));
        }
        if !(self.beta_max > 0.0) {
            return bad(format!("ssf.beta_max must be positive, got {}", self.beta_max));
        }
        if !(self.inner_tol > 0.0) {
            return bad(format!("ssf.inner_tol must be positive, got {}", self.inner_tol));
        }
        if self.max_outer_iters == 0 {
            return bad("ssf.max_outer_iters must be positive".into());
        }
        if let Some(z) = &self.confidence {
            if z.data().iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
                return bad("confidence values must lie in (0, 1]".into());
            }
        }
        Ok(())
    }

    /// `Z ⊙ f` (per-pixel product).
    pub fn weighted_source(&self, f: &GrayImage) -> Result<GrayImage> {
        match &self.confidence {
            None => Ok(f.clone()),
            Some(z) => f.zip_map(z, |a, b| a * b),
        }
    }

    /// Sequence of `β` values the continuation visits.
    pub fn beta_schedule(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut beta = self.beta0;
        while beta <= self.beta_max && out.len() < self.max_outer_iters {
            out.push(beta);
            beta *= self.beta_mult;
        }
        out
    }
}

/// Runs the semi-sparsity filter on `f`.
pub fn ssf_smooth(f: &GrayImage, params: &SsfParams) -> Result<GrayImage> {
    params.validate()?;
    let zf = params.weighted_source(f)?;
    let (w, h) = zf.dims();
    let spectral = match params.solver {
        InnerSolver::Spectral => Some(SpectralSolver::new(w, h)),
        InnerSolver::ConjugateGradient => None,
    };
    let rhs_base = zf
        .zip_map(&first_order_normal(&zf), |v, l| v + params.alpha * l)
        .expect("same dims");

    let mut u = zf.clone();
    for beta in params.beta_schedule() {
        let g = Hessian::of(&u).hard_threshold(params.lambda / beta);
        let rhs = rhs_base
            .zip_map(&g.adjoint(), |b, a| b + beta * a)
            .expect("same dims");
        u = match &spectral {
            Some(s) => s.solve(&rhs, params.alpha, beta),
            None => cg::solve(&rhs, &u, params.alpha, beta, params.inner_tol)?,
        };
    }
    Ok(u)
}

/// Structure (smoothed) and texture (`f − structure`) layers.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub structure: GrayImage,
    pub texture: GrayImage,
}

/// Splits one pixel value `f ≈ s` into `(s', t)` with `s' + t == f` in
/// floating point, moving `s` by at most a few ulps.
///
/// When `s` and `f − s` both lie in a coarser binade than `f` their sum is
/// confined to a grid that may miss `f`; such pixels keep `t = f − s` and
/// reconstruct to within one ulp of the larger layer.
pub fn exact_split(f: f64, s: f64) -> (f64, f64) {
    let t = f - s;
    if s + t == f {
        return (s, t);
    }
    let mut up = t;
    let mut down = t;
    for _ in 0..=4 {
        for cand in [up, down] {
            let s2 = f - cand;
            if s2 + cand == f {
                return (s2, cand);
            }
        }
        up = up.next_up();
        down = down.next_down();
    }
    (s, t)
}

/// Splits `f` into a structure layer (`ssf_smooth(f)`) and a texture layer
/// such that `structure + texture == f` wherever binary64 admits it (see
/// [`exact_split`]).
pub fn decompose(f: &GrayImage, params: &SsfParams) -> Result<Decomposition> {
    let smooth = ssf_smooth(f, params)?;
    let (w, h) = f.dims();
    let (s, t): (Vec<f64>, Vec<f64>) = f.data().iter().zip(smooth.data()).map(|(&fv, &sv)| exact_split(fv, sv)).unzip();
    Ok(Decomposition {
        structure: GrayImage::from_raw(w, h, s),
        texture: GrayImage::from_raw(w, h, t),
    })
}

/// Squared second-order magnitude below which [`ssf_energy`] callers may treat
/// an entry as zero: half an 8-bit gray level.
pub const L0_ZERO_SQ: f64 = 0.25 / (255.0 * 255.0);

/// Objective value of `u` for source `f`, with the L0 term counting pixels
/// whose squared second-order magnitude exceeds `l0_eps`.
pub fn ssf_energy(u: &GrayImage, f: &GrayImage, params: &SsfParams, l0_eps: f64) -> Result<f64> {
    u.ensure_same_dims(f)?;
    let zf = params.weighted_source(f)?;
    let fidelity: f64 = u.data().iter().zip(zf.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    let grad: f64 = [(dx(u), dx(&zf)), (dy(u), dy(&zf))]
        .iter()
        .map(|(a, b)| a.data().iter().zip(b.data()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>())
        .sum();
    let l0 = Hessian::of(u).magnitude_sq().iter().filter(|&&m| m > l0_eps).count();
    Ok(fidelity + params.alpha * grad + params.lambda * l0 as f64)
}

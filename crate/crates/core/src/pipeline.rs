//! Decomposition, texture and structure fusion, and reconstruction.
//!
//! Every input is split into a structure layer `S` and a texture layer `T`
//! by the semi-sparsity filter. Textures of the two visible images are
//! merged through a verified focus map into `T4`, which is then blended
//! with the infrared texture by saliency. Structures are averaged with
//! global weights from entropy and directional frequency variance. The
//! output is `clamp(FT + FS, 0, 1)`.
//!
//! ```
//! use focusfuse::pipeline::{fuse, FusionConfig, Mode};
//! use focusfuse::GrayImage;
//!
//! let vis = GrayImage::from_fn(32, 32, |x, y| ((x ^ y) & 7) as f64 / 7.0)?;
//! let ir = GrayImage::from_fn(32, 32, |x, _| x as f64 / 31.0)?;
//! let cfg = FusionConfig::new(Mode::Mmif);
//! let fused = fuse(&[vis, ir], &cfg)?;
//! assert_eq!(fused.dims(), (32, 32));
//! # Ok::<(), focusfuse::Error>(())
//! ```

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{ensure_dims, BinaryMask, GrayImage, RgbImage};
use crate::ssf::{decompose, Decomposition, SsfParams};
use crate::structure::{fuse_structure, StructureFeatures, DEFAULT_BLOCK};
use crate::texture::{
    compose_focused_texture, consistency_verify, focus_decision, fuse_texture, min_side_for, salient_feature_map,
    GradDiff, SaliencyMaps, VerifyParams,
};

/// Which inputs take part in a fusion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    /// Two visible images with different focus plus one infrared image.
    #[default]
    Tri,
    /// One visible image plus one infrared image.
    Mmif,
    /// Two visible images with different focus.
    Mfif,
}

impl Mode {
    pub fn arity(self) -> usize {
        match self {
            Mode::Tri => 3,
            Mode::Mmif | Mode::Mfif => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Tri => "tri",
            Mode::Mmif => "mmif",
            Mode::Mfif => "mfif",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tri" => Ok(Mode::Tri),
            "mmif" => Ok(Mode::Mmif),
            "mfif" => Ok(Mode::Mfif),
            _ => Err(Error::InvalidParameter(format!("unknown mode `{s}` (expected tri, mmif or mfif)"))),
        }
    }
}

/// Colour handling in [`fuse_rgb`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Chroma {
    /// Grey output in all three channels.
    GrayOnly,
    /// Chroma copied from the visible input chosen by the focus map.
    #[default]
    CarryFromVisible,
}

impl FromStr for Chroma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gray" | "gray_only" => Ok(Chroma::GrayOnly),
            "carry" | "carry_from_visible" => Ok(Chroma::CarryFromVisible),
            _ => Err(Error::InvalidParameter(format!("unknown chroma mode `{s}`"))),
        }
    }
}

/// How three structure layers are combined in tri-input mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StructureRule {
    /// Fuse the two visible structures first, then fuse the result with the
    /// infrared structure. With identical visible inputs this equals the
    /// visible + infrared fusion.
    #[default]
    Hierarchical,
    /// One weighted sum over all three structures.
    Flat,
}

impl FromStr for StructureRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hierarchical" => Ok(StructureRule::Hierarchical),
            "flat" => Ok(StructureRule::Flat),
            _ => Err(Error::InvalidParameter(format!("unknown structure rule `{s}`"))),
        }
    }
}

/// Full set of fusion settings.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionConfig {
    pub mode: Mode,
    pub ssf: SsfParams,
    /// Pyramid depth for the significance map.
    pub pyr_levels: usize,
    /// Side of the local spatial-frequency window (odd).
    pub sf_window: usize,
    pub verify: VerifyParams,
    /// Exponent of the gradient response, in `(0, 1]`.
    pub grad_p: f64,
    pub grad_diff: GradDiff,
    /// DCT block side used by the structure weights.
    pub struct_block: usize,
    pub struct_rule: StructureRule,
    pub chroma: Chroma,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Tri,
            ssf: SsfParams::default(),
            pyr_levels: 3,
            sf_window: 7,
            verify: VerifyParams::default(),
            grad_p: 0.8,
            grad_diff: GradDiff::Magnitude,
            struct_block: DEFAULT_BLOCK,
            struct_rule: StructureRule::Hierarchical,
            chroma: Chroma::CarryFromVisible,
        }
    }
}

impl FusionConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ssf.validate()?;
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.pyr_levels == 0 {
            return bad("pyr.levels must be at least 1".into());
        }
        if self.sf_window < 3 || self.sf_window.is_multiple_of(2) {
            return bad(format!("sf.window must be odd and at least 3, got {}", self.sf_window));
        }
        if !(self.grad_p > 0.0 && self.grad_p <= 1.0) {
            return bad(format!("grad.p must lie in (0, 1], got {}", self.grad_p));
        }
        if !(0.0..=1.0).contains(&self.verify.area_frac) {
            return bad(format!("cv.area_frac must lie in [0, 1], got {}", self.verify.area_frac));
        }
        if self.struct_block == 0 {
            return bad("struct.block must be positive".into());
        }
        Ok(())
    }
}

/// Every intermediate of one fusion run.
#[derive(Clone, Debug)]
pub struct FusionDetail {
    pub mode: Mode,
    /// Decompositions in input order.
    pub layers: Vec<Decomposition>,
    /// Saliency of the two visible textures (absent in MMIF mode).
    pub visible_saliency: Option<[SaliencyMaps; 2]>,
    /// Raw focus decision map (absent in MMIF mode).
    pub map_raw: Option<BinaryMask>,
    /// Verified focus decision map (absent in MMIF mode).
    pub omp: Option<BinaryMask>,
    /// Focused visible texture.
    pub t4: GrayImage,
    /// Saliency of `t4` and of the infrared texture (absent in MFIF mode).
    pub ir_saliency: Option<[SaliencyMaps; 2]>,
    pub ft: GrayImage,
    pub fs: GrayImage,
    /// Structure features and weights of the final structure fusion step.
    pub structure_features: Vec<StructureFeatures>,
    pub fused: GrayImage,
}

impl FusionDetail {
    /// Named intermediate maps rescaled for viewing: signed layers are
    /// shifted by 0.5, saliency maps divided by their maximum.
    pub fn debug_images(&self) -> Vec<(String, GrayImage)> {
        let signed = |t: &GrayImage| t.offset(0.5).clamp01();
        let norm = |t: &GrayImage| {
            let m = t.max();
            if m > 0.0 {
                t.scale(1.0 / m)
            } else {
                t.clone()
            }
        };
        let mut out = Vec::new();
        for (i, d) in self.layers.iter().enumerate() {
            out.push((format!("S{}", i + 1), d.structure.clamp01()));
            out.push((format!("T{}", i + 1), signed(&d.texture)));
        }
        if let Some([a, b]) = &self.visible_saliency {
            out.push(("SM1".into(), norm(&a.sm)));
            out.push(("TM1".into(), norm(&a.tm)));
            out.push(("SM2".into(), norm(&b.sm)));
            out.push(("TM2".into(), norm(&b.tm)));
        }
        if let Some(m) = &self.map_raw {
            out.push(("MAP".into(), m.to_image()));
        }
        if let Some(m) = &self.omp {
            out.push(("OMP".into(), m.to_image()));
        }
        out.push(("T4".into(), signed(&self.t4)));
        if let Some([a, b]) = &self.ir_saliency {
            out.push(("TM4".into(), norm(&a.tm)));
            out.push(("TM3".into(), norm(&b.tm)));
        }
        out.push(("FT".into(), signed(&self.ft)));
        out.push(("FS".into(), self.fs.clamp01()));
        out
    }
}

fn check_inputs(inputs: &[GrayImage], cfg: &FusionConfig) -> Result<()> {
    if inputs.len() != cfg.mode.arity() {
        return Err(Error::Arity {
            expected: cfg.mode.arity(),
            found: inputs.len(),
        });
    }
    for img in &inputs[1..] {
        inputs[0].ensure_same_dims(img)?;
    }
    let (w, h) = inputs[0].dims();
    let need = min_side_for(cfg.pyr_levels);
    if w.min(h) < need {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            reason: format!("{} pyramid levels need both sides at least {need}", cfg.pyr_levels),
        });
    }
    Ok(())
}

fn saliency_pair(a: &GrayImage, b: &GrayImage, cfg: &FusionConfig) -> Result<[SaliencyMaps; 2]> {
    let sal = |t: &GrayImage| salient_feature_map(t, cfg.pyr_levels, cfg.sf_window, cfg.grad_p, cfg.grad_diff);
    let (sa, sb) = rayon::join(|| sal(a), || sal(b));
    Ok([sa?, sb?])
}

fn fuse_structures(structures: &[&GrayImage], cfg: &FusionConfig) -> Result<(GrayImage, Vec<StructureFeatures>)> {
    let own = |v: &[&GrayImage]| v.iter().map(|s| (*s).clone()).collect::<Vec<_>>();
    match (structures.len(), cfg.struct_rule) {
        (3, StructureRule::Hierarchical) => {
            let (s4, _) = fuse_structure(&own(&structures[..2]), cfg.struct_block)?;
            fuse_structure(&[s4, structures[2].clone()], cfg.struct_block)
        }
        _ => fuse_structure(&own(structures), cfg.struct_block),
    }
}

/// Runs the fusion and keeps every intermediate.
///
/// Input order is `[vis_a, vis_b, ir]` for [`Mode::Tri`], `[vis, ir]` for
/// [`Mode::Mmif`] and `[vis_a, vis_b]` for [`Mode::Mfif`].
pub fn fuse_detailed(inputs: &[GrayImage], cfg: &FusionConfig) -> Result<FusionDetail> {
    cfg.validate()?;
    check_inputs(inputs, cfg)?;
    let layers = inputs
        .par_iter()
        .map(|f| decompose(f, &cfg.ssf))
        .collect::<Result<Vec<_>>>()?;

    let (visible_saliency, map_raw, omp, t4) = match cfg.mode {
        Mode::Mmif => (None, None, None, layers[0].texture.clone()),
        Mode::Tri | Mode::Mfif => {
            let (t1, t2) = (&layers[0].texture, &layers[1].texture);
            let sal = saliency_pair(t1, t2, cfg)?;
            let map = focus_decision(&sal[0].tm, &sal[1].tm)?;
            let verified = consistency_verify(&map, cfg.verify);
            let t4 = compose_focused_texture(t1, t2, &verified)?;
            (Some(sal), Some(map), Some(verified), t4)
        }
    };

    let (ir_saliency, ft) = match cfg.mode {
        Mode::Mfif => (None, t4.clone()),
        Mode::Tri | Mode::Mmif => {
            let t3 = &layers[layers.len() - 1].texture;
            let sal = saliency_pair(&t4, t3, cfg)?;
            let ft = fuse_texture(&t4, t3, &sal[0].tm, &sal[1].tm)?;
            (Some(sal), ft)
        }
    };

    let structures: Vec<&GrayImage> = layers.iter().map(|d| &d.structure).collect();
    let (fs, structure_features) = fuse_structures(&structures, cfg)?;
    let fused = ft.add(&fs)?.clamp01();
    Ok(FusionDetail {
        mode: cfg.mode,
        layers,
        visible_saliency,
        map_raw,
        omp,
        t4,
        ir_saliency,
        ft,
        fs,
        structure_features,
        fused,
    })
}

/// Fused image in `[0, 1]`. See [`fuse_detailed`] for the input order.
pub fn fuse(inputs: &[GrayImage], cfg: &FusionConfig) -> Result<GrayImage> {
    fuse_detailed(inputs, cfg).map(|d| d.fused)
}

const KB: f64 = 0.114;
const KR: f64 = 0.299;
const KG: f64 = 1.0 - KB - KR;

// Colour-difference channels scaled so that they invert exactly with the
// luma weights used for grey conversion.
fn chroma_of(rgb: &RgbImage) -> Result<(GrayImage, GrayImage)> {
    let y = rgb.luminance();
    let cb = rgb.b.zip_map(&y, |b, y| (b - y) / (2.0 * (1.0 - KB)))?;
    let cr = rgb.r.zip_map(&y, |r, y| (r - y) / (2.0 * (1.0 - KR)))?;
    Ok((cb, cr))
}

fn from_luma_chroma(y: &GrayImage, cb: &GrayImage, cr: &GrayImage) -> Result<RgbImage> {
    let b = y.zip_map(cb, |y, cb| y + 2.0 * (1.0 - KB) * cb)?;
    let r = y.zip_map(cr, |y, cr| y + 2.0 * (1.0 - KR) * cr)?;
    let g = GrayImage::from_fn(y.width(), y.height(), |i, j| (y.get(i, j) - KR * r.get(i, j) - KB * b.get(i, j)) / KG)?;
    Ok(RgbImage::new(r, g, b)?.clamp01())
}

/// Colour fusion: luminance through [`fuse`], chroma per [`FusionConfig::chroma`].
///
/// `visible` holds one image in MMIF mode and two otherwise; `ir` is
/// required unless the mode is MFIF.
pub fn fuse_rgb(visible: &[RgbImage], ir: Option<&GrayImage>, cfg: &FusionConfig) -> Result<RgbImage> {
    fuse_rgb_detailed(visible, ir, cfg).map(|(rgb, _)| rgb)
}

/// [`fuse_rgb`] that also returns the luminance intermediates.
pub fn fuse_rgb_detailed(
    visible: &[RgbImage],
    ir: Option<&GrayImage>,
    cfg: &FusionConfig,
) -> Result<(RgbImage, FusionDetail)> {
    let want_vis = if cfg.mode == Mode::Mmif { 1 } else { 2 };
    if visible.len() != want_vis {
        return Err(Error::Arity {
            expected: want_vis,
            found: visible.len(),
        });
    }
    let mut inputs: Vec<GrayImage> = visible.iter().map(RgbImage::luminance).collect();
    match (cfg.mode, ir) {
        (Mode::Mfif, _) => {}
        (_, Some(ir)) => {
            ensure_dims(inputs[0].dims(), ir.dims())?;
            inputs.push(ir.clone());
        }
        (_, None) => {
            return Err(Error::Arity {
                expected: cfg.mode.arity(),
                found: inputs.len(),
            })
        }
    }
    let detail = fuse_detailed(&inputs, cfg)?;
    let y = &detail.fused;
    let rgb = match cfg.chroma {
        Chroma::GrayOnly => RgbImage::from_gray(y),
        Chroma::CarryFromVisible => {
            let (cb_a, cr_a) = chroma_of(&visible[0])?;
            let (cb, cr) = match &detail.omp {
                None => (cb_a, cr_a),
                Some(omp) => {
                    let (cb_b, cr_b) = chroma_of(&visible[1])?;
                    (cb_a.select(&cb_b, omp)?, cr_a.select(&cr_b, omp)?)
                }
            };
            from_luma_chroma(y, &cb, &cr)?
        }
    };
    Ok((rgb, detail))
}

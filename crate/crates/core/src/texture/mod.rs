//! Texture-layer fusion: focus detection across the two visible textures,
//! then saliency-weighted blending with the infrared texture.

mod decision;
mod pyramid;
mod saliency;

pub use decision::{
    compose_focused_texture, consistency_verify, focus_decision, fuse_texture, majority_filter,
    remove_small_regions, texture_weights, DecisionMaps, VerifyParams, WEIGHT_EPS,
};
pub use pyramid::{build_pyramid, collapse, min_side_for, PyramidStack};
pub use saliency::{
    grad_maps, grad_response, GradDiff, local_spatial_frequency, salient_feature_map, significance_map,
    SaliencyMaps, GRAD_BASE_FLOOR,
};

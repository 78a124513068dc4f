//! Compiles every Rust listing of the guide in `book/src` as a doctest.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/decomposition.md")]
pub mod decomposition {}
#[doc = include_str!("../../../book/src/texture.md")]
pub mod texture {}
#[doc = include_str!("../../../book/src/structure.md")]
pub mod structure {}
#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
#[doc = include_str!("../../../book/src/dataset.md")]
pub mod dataset {}
#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

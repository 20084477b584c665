//! Decoupled graph neural networks.
//!
//! A DGNN layer keeps three embeddings of every node: one anchored to the
//! raw attributes, one smoothed over the input graph and one smoothed over
//! a feature-similarity graph. A shared reconstruction factor ties the
//! three together, and each layer is one round of alternating
//! minimization of the joint objective. See the guide in `book/` for the
//! full derivation.

pub mod autodiff;
pub mod datasets;
pub mod error;
pub mod graph;
pub mod gsd;
pub mod layer;
pub mod oracle;
pub mod profiles;
pub mod train;

pub use error::{Error, Result};

// Runs the code blocks of the guide as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/denoising.md")]
    mod denoising {}
    #[doc = include_str!("../../../book/src/layer.md")]
    mod layer {}
    #[doc = include_str!("../../../book/src/autodiff.md")]
    mod autodiff {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/reproducing.md")]
    mod reproducing {}
}

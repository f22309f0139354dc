//! Stability analysis for learned image features.
//!
//! The crate simulates images with known latent source features
//! ([`lcmp_sim`]), learns features with random convolutional features under
//! bootstrap perturbation ([`rcf`]), aligns the learned feature subspaces with
//! generalized Procrustes ([`reduce_align`]) and scores how often each aligned
//! dimension is picked by stability selection ([`stability_select`]).
//! [`pipeline`] wires the stages together and owns the on-disk formats.

// `!(x > 0.0)` is used throughout to reject NaN alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod image;
pub mod lcmp_sim;
pub mod numerics;
pub mod pipeline;
pub mod rcf;
pub mod reduce_align;
pub mod stability_select;

pub use error::{Error, Result};
pub use image::ImageTensor;
pub use numerics::{Matrix, RngStream};

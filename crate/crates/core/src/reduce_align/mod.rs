//! Dimensionality reduction, Procrustes alignment and representation
//! comparison.

mod cca;
mod pca;
mod procrustes;
mod sca;

pub use cca::{cca, svcca_similarity, svd_truncate, CcaResult, CcaRidge};
pub use pca::{pca_reduce, ReducedFeatures, Reduction};
pub use procrustes::{fss_score, generalized_procrustes, procrustes_pair, AlignmentResult};
pub use sca::{sca_fit, sca_reduce, ScaFit};

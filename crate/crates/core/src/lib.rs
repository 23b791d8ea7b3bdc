//! Integrative sparse partial least squares across multiple independent datasets.
//!
//! The crate estimates one first-direction vector per dataset, coupling the
//! datasets through a selection penalty (shared or per-dataset support) and a
//! contrast penalty (magnitude or sign similarity).

pub mod error;
pub mod ispls;
pub mod model;
pub mod penalty;
pub mod pls;
pub mod seed;
pub mod spls;
pub mod tuning;

pub use error::{IsplsError, Result};
pub use ispls::{fit_ispls, ContrastWeights, IsplsConfig, SignDenominator};
pub use model::{
    build_cross_products, standardize, Contrast, CrossProduct, DirectionState, FitResult, Model, MultiStudyData,
    PenaltySpec, StudyData, ZeroVarianceColumn,
};
pub use pls::{first_direction, latent_regress, predict, refit_selected, LatentModel};
pub use spls::{fit_spls, spls_w_step, Sparsity, SplsConfig};
pub use tuning::{cross_validate, default_grid, CvResult, TuningGrid};

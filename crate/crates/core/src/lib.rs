//! Finite point processes, their Papangelou intensities, and Stein-method
//! upper bounds on Kantorovich–Rubinstein distances to Poisson and Cox
//! processes, together with the Monte-Carlo machinery that checks those
//! bounds empirically.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: ground spaces, configurations, intensity densities, quadrature.
//! - [`models`]: point-process families and their exact samplers.
//! - [`transforms`]: restriction, superposition, thinning and rescaling.
//! - [`papangelou`]: closed-form conditional intensities and the GNZ harness.
//! - [`distances`]: KR lower/upper estimates, count-law W1, Polish distance.
//! - [`glauber`]: the birth–death semigroup and its verification checks.
//! - [`stein_bounds`]: theoretical bound calculators.
//! - [`dominance`]: model/target pairs pairing a bound with an empirical KR estimate.
//! - [`config`]: the JSON experiment schema consumed by the CLI.

use thiserror::Error;

pub mod config;
pub mod distances;
pub mod dominance;
pub mod geometry;
pub mod glauber;
pub mod io;
pub mod models;
pub mod montecarlo;
pub mod papangelou;
pub mod report;
pub mod rng;
pub mod stats;
pub mod stein_bounds;
pub mod transforms;

pub use geometry::{Configuration, Density, Grid, IntensityMeasure, Point, Quadrature, Space};
pub use models::{Condition, CountDistribution, Draw, Kernel, Model, PointProcess};
pub use papangelou::Papangelou;
pub use rng::{StreamRng, Streams};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("no draw accepted after {attempts} attempts")]
    AcceptanceFailure { attempts: u64 },

    #[error("kernel spectrum violation: {0}")]
    SpectrumViolation(String),

    #[error("no closed form for this transform: {0}")]
    NotClosed(String),

    #[error("count distribution is truncated at n = {n_max}; index {requested} is beyond it")]
    TruncationExceeded { requested: usize, n_max: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("configurations live on different spaces")]
    SpaceMismatch,

    #[error("too many atoms in directing law: {0} (at most 16)")]
    TooManyAtoms(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

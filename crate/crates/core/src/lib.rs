//! Formation-top depth recommender.
//!
//! Picked tops form a sparse well × top matrix of subsea depths. A rank-f
//! factorization fitted by alternating least squares fills in the unpicked
//! cells. Around it sit the evaluation pieces: random and spatially blocked
//! k-fold plans, a Green's-function spline baseline fitted per top, MAE/RMSE
//! report tables, a hyperparameter grid search and a train-fraction sweep.

pub mod als;
pub mod dataset;
pub mod experiment;
pub mod hyperopt;
pub mod metrics;
pub mod seed;
pub mod spline;
pub mod synthetic;
pub mod validation;

pub use als::{fit, AlsConfig, AlsError, LatentModel, Ratings};
pub use dataset::{DatasetError, TopsDataset};
pub use hyperopt::{grid_search, GridResult, GridSpec};
pub use metrics::{ErrorReport, MetricsError, Prediction};
pub use spline::{SplineError, SplineModel};
pub use validation::{FoldPlan, PlanError};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Als(#[from] AlsError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

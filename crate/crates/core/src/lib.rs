//! Robust bridge regression.
//!
//! The MM-bridge estimator minimizes a bounded bisquare loss, evaluated at a
//! high-breakdown residual scale, plus an `L_gamma` penalty on the
//! coefficients. With `gamma <= 1` it selects variables; with `lambda = 0` it
//! is the MM estimator; with `gamma = 2` it is a robust ridge.
//!
//! The pipeline is
//!
//! 1. [`sinit::s_fit`]: fast-S initial fit and M-scale,
//! 2. [`mm::mm_fit`]: MM refinement at that fixed scale,
//! 3. [`mmbr::lqa_fit`] (or the closed-form [`mmbr::one_step`]) for a penalty,
//! 4. [`tuning::select_lambda`]: BIC over a `lambda` grid.
//!
//! [`baseline`] holds a least-squares LASSO comparator and [`simlab`] the
//! contamination Monte Carlo harness. See the crate's `examples/` directory
//! for one runnable program per capability.

pub mod baseline;
pub mod cli;
pub mod data;
pub mod error;
pub mod io;
pub mod linalg;
pub mod losses;
pub mod mm;
pub mod mmbr;
pub mod scale;
pub mod simlab;
pub mod sinit;
pub mod tuning;

pub use data::Dataset;
pub use error::{Error, Result};
pub use losses::{LossFamily, Target};
pub use mm::{mm_fit, sandwich_cov, MmConfig, MmFit, SandwichCov};
pub use mmbr::{hat_trace, lqa_fit, one_step, BrFit, LqaConfig, PenaltySpec};
pub use scale::{m_scale, ScaleEstimate};
pub use sinit::{s_fit, SConfig, SFit};
pub use tuning::{bic, select_lambda, TuneResult};

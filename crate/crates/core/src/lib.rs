//! Rain-robust SAR wind-speed toolkit.
//!
//! The crate covers the data side of training a rain-invariant wind-speed
//! estimator on SAR imagery:
//!
//! * [`scene`]: the 100 m/px multi-channel scene model and its container format;
//! * [`gmf`]: the CMOD5.N model, sea surface roughness and wind inversion;
//! * [`patches`]: 256x256 tiling, rain classification and the model-agreement filter;
//! * [`balance`]: wind histograms and rain/rainless balancing policies;
//! * [`split`]: scene-grouped train/validation/test assignment by stochastic search;
//! * [`stats`]: per-channel normalization statistics;
//! * [`metrics`]: bias/RMSE/PCC, rain-bin stratification, buoy collocation and reports;
//! * [`synth`]: synthetic scenes, rain cells and buoy fleets with known truth;
//! * [`store`]: the hashed on-disk workspace;
//! * [`pipeline`]: the stage driver behind the `sarwind` binary.

// `!(x > a)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balance;
pub mod error;
pub mod gmf;
pub mod metrics;
pub mod patches;
pub mod pipeline;
pub mod rng;
pub mod scene;
pub mod split;
pub mod stats;
pub mod store;
pub mod synth;

pub use error::{Error, Result};

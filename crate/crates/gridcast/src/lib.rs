//! Spatiotemporal forecasting for gridded weather fields.
//!
//! The toolkit predicts dense (latitude × longitude × time) measurement
//! series with a family of linear-algebraic models and evaluates them with
//! a shared metric suite:
//!
//! - [`tensor`] — dense tensor container and tensor-train (TT) machinery:
//!   TT-SVD decomposition, reconstruction, left-orthogonalization and
//!   efficient core-chain contraction.
//! - [`dmd`] — exact dynamic mode decomposition on snapshot matrices.
//! - [`ttdmd`] — tensor-train DMD: fits the reduced operator directly from
//!   tensorized snapshot histories and forecasts whole 2-D fields.
//! - [`mar`] — first-order matrix autoregression fit by alternating least
//!   squares.
//! - [`geo`] — haversine distance, latitude-weighted sampling, haversine
//!   k-means and per-cluster local autoregressive forecasting.
//! - [`metrics`] — RMSE / MAE / SMAPE plus frame-wise MSE, NRMSE, PSNR and
//!   SSIM for forecast tensors.
//! - [`ingest`] — NASA POWER API client with on-disk caching, the grid CSV
//!   and binary dataset formats, and train/test splitting.
//! - [`synth`] — deterministic synthetic field generators used by the test
//!   suites and the CLI.
//!
//! # Linearization convention
//!
//! Every place a multi-index `(i₁, …, i_d)` is flattened to a single offset
//! (vectorization, matricization, binary files) uses the *first-index-fastest*
//! (colexicographic) order: `pos = i₁ + n₁·(i₂ + n₂·(i₃ + …))`. The in-memory
//! layout of [`tensor::Tensor`] is row-major; the two orders are converted
//! explicitly at the boundaries.

// Force the link against system BLAS/LAPACK.
extern crate openblas_src;

pub mod dmd;
pub mod geo;
pub mod ingest;
pub mod mar;
pub mod metrics;
pub mod synth;
pub mod tensor;
pub mod ttdmd;

pub use tensor::{DenseTensor, SplitMatricization, TensorTrain};

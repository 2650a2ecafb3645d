//! Max-type deviation tests for projected sample covariances of
//! high-dimensional linear vector time series.
//!
//! The pipeline: simulate or load a sample ([`linproc`]), choose the pairs
//! `(v_j, w_j)` ([`projections`]), compute `D_j = √n v_j'(Σ̂ − Σ₀)w_j`
//! ([`covstat`]), standardize by the asymptotic variances ([`asymvar`]) and
//! calibrate the maximum against the Gumbel law ([`gumbel`]).

pub mod asymvar;
pub mod covstat;
pub mod error;
pub mod exec;
pub mod gumbel;
pub mod linproc;
pub mod matrix_serde;
pub mod mcharness;
pub mod portfolio;
pub mod projections;

pub use error::{Error, Result};

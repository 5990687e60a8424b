//! Core pipeline for predicting daily stock-market attributes from online
//! emotion time series.
//!
//! The crate covers the full modelling chain: keyword filtering and Naive
//! Bayes emotion labelling of tweets ([`corpus`]), daily emotion-proportion
//! series on a trading calendar ([`timeseries`]), market rate-of-change
//! targets ([`market`]), correlation and Granger-causality analysis
//! ([`stats`]), discretization of real-valued targets ([`discretize`]),
//! logistic-regression and SVM classifiers ([`learn`]) and cross-validated /
//! chronological holdout evaluation ([`eval`]).
//!
//! The crate is `no_std`-compatible (with `alloc`); enable the `libm` feature
//! instead of `std` on targets without a float runtime. File formats, CLI and
//! synthetic data generation live in the companion `emostock` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("emostock-core requires either the `std` or the `libm` feature");

extern crate alloc;

pub mod corpus;
pub mod date;
pub mod discretize;
pub mod emotion;
pub mod error;
pub mod eval;
pub mod learn;
pub mod market;
pub mod math;
pub mod rng;
pub mod stats;
pub mod timeseries;

pub use date::Date;
pub use emotion::EmotionLabel;
pub use error::{Error, Result};

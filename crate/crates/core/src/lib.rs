// SPDX-License-Identifier: MIT OR Apache-2.0

//! Drift-aware training-data selection for streaming classification.
//!
//! A stream is cut into segments (one concept each) and fixed-size batches.
//! Two mechanisms decide which historical data to train on:
//!
//! * [`forest`] ranks every training batch by how often its samples share a
//!   random-forest leaf with a query sample (covariate-shift proximity).
//! * [`selection`] scores each historical segment with the gain and disparity
//!   of its mean last-layer gradient against the validation gradient, drops
//!   segments whose concept disagrees with the current one, and trains only on
//!   the best-ranked surviving batches.
//!
//! [`datagen`] provides the drifting synthetic streams and a CSV loader,
//! [`model`] the one-hidden-layer softmax classifier, and [`bench`] the
//! experiment harness behind the `driftseg` binary.

pub mod bench;
pub mod datagen;
pub mod error;
pub mod forest;
pub mod model;
pub mod selection;

pub use error::{Error, Result};

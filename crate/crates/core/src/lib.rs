//! Deterministic f64 laboratory for studying delayed generalisation ("grokking")
//! of small networks on group-theoretic tasks.
//!
//! The crate is self-contained: a dense row-major matrix engine with tape-based
//! reverse-mode differentiation, a cyclic-Jacobi symmetric eigensolver, a
//! counter-based RNG with labelled substreams, the two model architectures under
//! study (1-layer transformer and MLP baseline), AdamW, and the analysis stack —
//! spectral-entropy monitoring of the penultimate representation, collapse
//! detection, power-law grok-time forecasting, representation-mixing
//! interventions with norm-matched controls, and the statistics used to compare
//! conditions.
//!
//! Everything runs in f64 and is bit-reproducible: two runs with the same
//! `RunConfig` produce identical trajectory logs. The crate is `no_std`
//! compatible (with `alloc`); all file formats are exposed as string
//! encoders/decoders so IO can live elsewhere.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod config;
pub mod dynamics;
pub mod eigen;
pub mod entropy;
pub mod intervention;
pub(crate) mod math;
pub mod mathcheck;
pub mod matrix;
pub mod model;
pub mod optim;
pub mod rng;
pub mod stats;
pub mod tape;
pub mod tasks;
pub mod train;




pub use matrix::Matrix;
pub use rng::Rng;

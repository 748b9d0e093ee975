// Copyright 2026 The wsdrive Authors
// SPDX-License-Identifier: Apache-2.0

//! Coherent wavepacket transport in amplitude-modulated tilted optical
//! lattices: Wannier-Stark basis construction, reduced and full dynamics,
//! and drive synthesis from target paths.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod basis;
pub mod bessel;
pub mod config;
pub mod drive;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod lattice;
pub mod observables;
pub mod output;
pub mod presets;
pub mod run;

pub use error::{Error, Result};

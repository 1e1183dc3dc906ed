//! Core engines for concentration-shift-keying (CSK) links built from
//! spatially segregated engineered-cell consortia in a microfluidic channel.
//!
//! The crate provides
//!
//! * unit-safe domain types and the shared time-grid signal representation
//!   ([`trace::SignalTrace`]),
//! * the three cell building blocks (identity, inverter, thresholding) as
//!   streaming per-interval operators ([`kinetics`]),
//! * the advection-diffusion-reaction channel between consortia as a series
//!   impulse response plus a discrete propagation operator ([`propagation`]),
//! * layout synthesis for arbitrary-order CSK modulators/demodulators
//!   ([`synthesis`]),
//! * an analytic end-to-end evaluator that streams signals through a layout
//!   ([`cascade`]),
//! * and a particle/agent Monte-Carlo engine used as ground truth
//!   ([`stochastic`]).
//!
//! No IO lives here; scenario files, presets and the CLI are in the companion
//! `csk-cli` crate. The crate is `no_std` (with `alloc`) so the engines can be
//! embedded or compiled to unusual targets.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod cascade;
pub mod error;
pub mod geometry;
pub mod kinetics;
pub mod propagation;
pub mod scenario;
pub mod species;
pub mod stochastic;
pub mod synthesis;
pub mod trace;
pub mod units;

pub use error::{Error, Result};

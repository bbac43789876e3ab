//! Interference cancellation for full-duplex MIMO via a reconfigurable
//! reflective surface.
//!
//! A full-duplex base station serves uplink and downlink users on the
//! same band at the same time, which buys spectral efficiency at the
//! cost of two leakage paths: the station's own transmitter bleeding
//! into its receiver, and uplink users bleeding into downlink users. A
//! passive reflective surface adds a second, controllable copy of each
//! leakage path; choosing its per-element phases so the reflected copy
//! arrives in anti-phase cancels the direct one.
//!
//! The crate is organized around that idea:
//!
//! - [`channel`] draws the eight random channel matrices of a
//!   scenario from distance-dependent Rayleigh fading.
//! - [`sysmodel`] combines them into effective channels, rates,
//!   residual-interference objectives, and signal-floor constraints.
//! - [`solver`] computes surface settings: exact closed forms for the
//!   relaxed (arbitrary-modulus) problem in the determined, under- and
//!   overdetermined regimes, a unit-modulus projection, and a
//!   phase-grid coordinate descent that honors signal floors.
//! - [`baselines`] evaluates the comparison points: no surface, random
//!   phases, and receive-side null steering.
//! - [`harness`] sweeps a parameter over seeded Monte Carlo trials and
//!   writes reproducible CSVs.
//!
//! Everything is deterministic given a seed; the harness derives
//! per-cell seeds with a stable hash so experiment outputs are
//! byte-reproducible across runs and machines.

pub mod baselines;
pub mod channel;
pub mod error;
pub mod harness;
pub mod solver;
pub mod sysmodel;

pub use error::{Error, Result};

//! Core library for a hierarchical intersection-control simulator.
//!
//! The stack has two layers. A centralized allocator grants *control
//! authority* to one vehicle per step by maximizing an inequity-aversion
//! utility ([`fairness`]). Every vehicle tracks an offline-optimized
//! reference trajectory ([`ddp`]) with a discrete LQR lateral controller and
//! a PD longitudinal controller ([`tracking`]), shaped by a time-weighted
//! repulsive field ([`avoidance`]) and certified by a high-order CBF safety
//! filter solved as a small QP ([`safety`]). The [`sim`] module wires the
//! layers into a four-way intersection microsimulation with all-way-stop and
//! pre-timed-signal baselines, and [`metrics`] post-processes runs into
//! fairness / safety / efficiency / real-time summaries.
//!
//! The crate is `no_std` + `alloc`; all side effects (file IO, timing, CLI)
//! live in the companion `junction-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod avoidance;
pub mod ddp;
pub mod dynamics;
pub mod fairness;
pub mod geometry;
pub mod metrics;
pub mod safety;
pub mod scenario;
pub mod sim;
pub mod tracking;

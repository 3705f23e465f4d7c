//! Experiment driver for the `parmor` model-order-reduction library.
//!
//! The `parmor` binary reproduces three benchmark studies on the thermal
//! block at desk scale and emits deterministic CSV data files with metadata
//! sidecars:
//!
//! - `run nonparam` — H2 errors of BT, LQG-BT, IRKA, OS-IRKA, and POD over
//!   a sweep of reduced orders at the fixed parameter `mu = 1`;
//! - `run one-param` — local versus global bases over a single conductivity
//!   parameter spanning eight decades, plus a greedy reduced-basis
//!   competitor at the matched order;
//! - `run four-param` — the same comparison over seeded random samples of
//!   the four-dimensional parameter box.
//!
//! Supporting verbs: `fom build` (assemble and cache the full-order model),
//! `config print-defaults` (the complete TOML schema with defaults), and
//! `selftest` (compact oracle suite). This library half carries all the
//! logic so integration tests can drive it in-process.

pub mod cache;
pub mod config;
pub mod experiments;
pub mod report;
pub mod selftest;

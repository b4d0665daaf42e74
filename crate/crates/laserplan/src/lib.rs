//! Mission planning engine for space-based laser debris remediation.
//!
//! A constellation of laser platforms nudges debris objects onto lower-perigee
//! orbits by pulsed photon ablation. The engine models the orbital mechanics
//! and laser physics, expands per-debris engagement opportunities into
//! time-expanded graphs, schedules platform transfers and engagements with an
//! exact integer programming solver, and closes the loop with a
//! receding-horizon controller that re-plans as the mission unfolds.
//!
//! Module layout:
//! - [`astro`]: two-body propagation, orbital elements, transfer costing,
//!   plane-change envelopes.
//! - [`pla`]: pulsed laser ablation physics and engagement feasibility.
//! - [`teg`]: platform slot grids and debris time-expanded graphs.
//! - [`ilp`]: scheduling model construction, branch-and-bound solver,
//!   brute-force oracle, LP-format export.
//! - [`rhs`]: receding-horizon scheduling loop and mission log.
//! - [`scenario`]: scenario configuration, seeded population sampling,
//!   breakup events.
//! - [`report`]: run/sweep drivers and report artifacts.

pub mod astro;
pub mod ilp;
pub mod pla;
pub mod report;
pub mod rhs;
pub mod scenario;
pub mod teg;
pub mod vec3;

pub use vec3::Vec3;

//! Numerical verification toolkit for two-bubble concentration in a critical
//! four-dimensional Neumann system.
//!
//! The building blocks are closed-form fields (bubble, Bessel correction,
//! kernel elements), star-shaped domains with curvature data, a graded
//! radial-by-spherical quadrature, the energy functional with its error and
//! expansion pieces, and scaling-law regression on top of those.

pub mod specialfn;
pub mod geometry;
pub mod ansatz;
pub mod quadrature;
pub mod energy;
pub mod asymptotics;

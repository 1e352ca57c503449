//! Degree-one vortices in a two-component Schrödinger system with
//! cross-coupling `g`: point-vortex law, radial core profiles and a spectral
//! solver with trajectory tracking.

pub mod cnls;
pub mod config;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod harmonic_map;
pub mod io;
pub mod linalg;
pub mod profile_gamma;
pub mod reduced_dynamics;
pub mod renormalized_energy;
pub mod vec2;
pub mod vortex_tracking;

pub use error::{Error, Result};
pub use vec2::Vec2;

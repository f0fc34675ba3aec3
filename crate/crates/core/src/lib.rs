//! Generalized spatial modulation for indoor visible light links.
//!
//! The crate models a room with a ceiling grid of Lambertian LEDs and a
//! small array of upward-facing photodiodes. On top of the line-of-sight
//! channel it provides signal-set construction for GSM and its special
//! cases, ML detection, the union-bound BER, Monte Carlo BER estimation,
//! and a search over LED placements and activation patterns.

pub mod channel;
pub mod config;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod modulation;
pub mod placement;
pub mod presets;
pub mod runner;
pub mod simulation;
pub mod system;

pub use error::{Error, Result};

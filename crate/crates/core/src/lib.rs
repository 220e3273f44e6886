//! Oriented detection of densely packed shape tiles.

pub mod api;
pub mod catalog;
pub mod compose;
pub mod config;
pub mod detection;
pub mod encoding;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod refdetect;
pub mod scenegen;

pub use error::{Error, Result};

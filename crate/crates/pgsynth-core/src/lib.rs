//! Symmetry-reduced synthesis for high-level Petri games.

pub mod color;
pub mod buchi;
pub mod canon;
pub mod cs;
pub mod decision;
pub mod dot;
pub mod error;
pub mod game;
pub mod model;
pub mod net;
pub mod occurrence;
pub mod pipeline;
pub mod strategy;

pub use error::{Error, ErrorClass, Result};

//! Numerics for the resource theory of asymmetric distinguishability.

extern crate openblas_src;

pub mod asymptotics;
pub mod divergences;
pub mod error;
pub mod linalg;
pub mod protocols;
pub mod sdp;
pub mod testkit;

pub use error::{Error, Result};

pub mod error;
pub mod gf2m;
pub mod zpoly;
pub mod curve;
pub mod local;
pub mod count;
pub mod zeta;
pub mod cache;
pub mod kani_rosen;
pub mod config;
pub mod verify;

pub use error::{Error, Result};

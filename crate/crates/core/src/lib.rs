//! Gradient test statistic with its order-`1/n` null distribution expansion
//! and Bartlett-type corrections.

pub mod correction;
pub mod cumulant;
pub mod data;
pub mod error;
pub mod expansion;
pub mod models;
pub mod rng;
pub mod simulation;
pub mod special;

pub use error::{Error, Result};

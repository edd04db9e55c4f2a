//! Weighted product-space Douglas-Rachford splitting for finding zeros of
//! `A_1 + ... + A_m` with possibly weakly monotone operators.

pub mod covlab;
pub mod engine;
pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod operator;
pub mod planner;
pub mod problem;
pub mod prox;
pub mod reform;
pub mod toys;
pub mod verify;

pub use error::{Error, Result};

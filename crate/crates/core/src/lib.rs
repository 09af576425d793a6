//! Exact cutting-and-stacking constructions of measure-preserving
//! transformations, their symbolic dynamics, and computable experiments on
//! effective randomness and compression of the resulting trajectories.

pub mod certified;
pub mod construction;
pub mod deficiency;
pub mod experiments;
pub mod error;
pub mod gadget;
pub mod rational;
pub mod solovay;
pub mod symbolic;

pub use error::{Error, Result};
pub use rational::Rational;

//! Spectral analysis of spherically symmetric α²-dynamo operators.

pub mod acceptance;
pub mod eig;
pub mod error;
pub mod mesh;
pub mod operator;
pub mod output;
pub mod profiles;
pub mod quadrature;
pub mod soliton;
pub mod tracker;
pub mod special;
pub mod tridiag;

pub use error::{Error, Result};

//! Pseudospectral laboratory for the cubic nonlinear Schrödinger equation
//! `i d_t u + Delta_{x,y} u = kappa |u|^2 u` on `R^n x T^k`.
//!
//! `R^n` is approximated by a periodic box `[-L/2, L/2)^n`, the torus has
//! period `2 pi` in every direction, and fields are stored as coefficients
//! against the orthonormal Fourier basis.

pub mod cli;
pub mod error;
pub mod estimates;
pub mod fields;
pub mod lattice;
pub mod mixednorms;
pub mod propagators;
pub mod scattering;
pub mod solver;

pub use error::{Error, Result};
pub use fields::{MultiIndex, SobolevSpec, Variant};
pub use lattice::{make_grid, GridSpec, LatticeField, SpectralField};
pub use mixednorms::Trajectory;
pub use solver::{EvolutionConfig, PicardSettings, PicardTrace};

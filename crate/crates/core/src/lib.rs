//! Multiresolution ultra-weak discontinuous Galerkin solvers for the KdV
//! equation in 1D and the Zakharov-Kuznetsov equation in 2D on full,
//! sparse and adaptive dyadic grids with periodic boundaries.

pub mod adapt;
pub mod basis;
pub mod config;
pub mod driver;
pub mod error;
pub mod forms;
pub mod imex;
pub mod interp;
pub mod kdv;
pub mod mesh;
pub mod pipeline;
pub mod poly;
pub mod problems;
pub mod projection;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod zk;

pub use error::{Error, Result};

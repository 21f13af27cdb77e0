//! Solver workbench for steady super-Alfvenic MHD transonic shocks in a
//! concentric cylindrical duct with the magnetic field aligned to the velocity.
//!
//! The crate builds the cylindrically symmetric shock background, marches the
//! perturbed supersonic inflow, and computes the three-dimensionally perturbed
//! shock front together with the downstream subsonic flow by a fixed-point
//! iteration over transport solves, a weighted div-curl system and a nonlocal
//! potential problem on a fixed computational box.

pub mod background;
pub mod cal;
pub mod config;
pub mod driver;
pub mod elliptic;
pub mod error;
pub mod field;
pub mod interface;
pub mod jump;
pub mod state;
pub mod transport;
pub mod upstream;

pub use error::{Error, Result};

//! Principal symmetric space approximation.
//!
//! Fits best-approximating totally geodesic submanifolds to data on
//! spheres, Grassmannians, flat tori and products of 2-spheres, and
//! assembles the rooted tree of nested fits.

pub mod cli;
pub mod error;
pub mod grassmann;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod plot;
pub mod polysphere;
pub mod report;
pub mod sphere;
pub mod synth;
pub mod torus;
pub mod tree;
pub mod tolerance;

pub use error::{PssaError, Result};

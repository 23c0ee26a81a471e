//! Stationary geodesic nets on surfaces given by coordinate atlases.

pub mod continuation;
pub mod error;
pub mod experiments;
pub mod io;
pub mod multigraph;
pub mod net;
pub mod riemann;
pub mod solver;
pub mod surgery;

pub use error::{GeonetError, Result};

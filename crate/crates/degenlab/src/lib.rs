//! Numerical laboratory for planar equations `div G(∇u) = 0` with continuous,
//! strictly monotone and possibly degenerate fields `G`.

pub mod error;
pub mod field;
pub mod geom;
pub mod io;
pub mod linsolve;
pub mod mesh;
pub mod analysis;
pub mod barrier;
pub mod regularize;
pub mod solve;
pub mod stats;

pub use error::{Error, Result};
pub use geom::{Disk, Mat2, Rect, Vec2};

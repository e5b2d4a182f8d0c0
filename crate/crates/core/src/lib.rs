pub mod dimension;
pub mod error;
pub mod ftc;
pub mod geometry;
pub mod gifs;
pub mod index_sets;
pub mod model_io;
pub mod parallel;
pub mod render;
pub mod report;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{open_overlap, ConvexPolygon, Similitude};
pub use scalar::{Field, QuadScalar};

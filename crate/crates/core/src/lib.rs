pub mod bundle;
pub mod diffusion;
pub mod error;
pub mod group;
pub mod io;
pub mod linalg;
pub mod manifold;
pub mod message;

pub use error::{Error, Result};

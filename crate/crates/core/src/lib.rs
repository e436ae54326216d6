pub mod error;
pub mod experiments;
pub mod fem;
pub mod filters;
pub mod flow;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod testbed;

pub use error::{Error, Result};
pub use mesh::{BoundaryTag, Mesh};

//! Complex singular vector tuples of tensors and the linear span of their
//! rank-one tensors.

pub mod cli;
pub mod combinatorics;
pub mod error;
pub mod linalg;
pub mod monodromy;
pub mod relations;
pub mod span;
pub mod system;
pub mod tensor;
pub mod tracking;

pub use error::{Error, Result};

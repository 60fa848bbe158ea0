//! Finite-structure laboratory for metric continuous logic: formulas and
//! types, exact evaluation on finite metric structures, well-founded tree
//! tools, the tree-based models and a Henkin-style forcing engine.

pub mod condition;
pub mod error;
pub mod forge;
pub mod formula;
pub mod models;
pub mod modulus;
pub mod q;
pub mod structure;
pub mod trees;
pub mod types;

pub use error::{Error, Result};
pub use q::Q;

//! Code-based CAD programs: representation, execution and evaluation.

pub mod constraints;
pub mod convert;
pub mod dsl;
pub mod kernel;
pub mod model;
pub mod render;
pub mod score;

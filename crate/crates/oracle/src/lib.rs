//! Independent reference computations for tests: analytic occupancy of
//! extruded primitives and random program generators.

pub mod gen;
pub mod occupancy;

pub use gen::{random_constraint, random_plane, random_primitive_program, random_program, random_sketch};
pub use occupancy::{voxel_agreement, Agreement, AnalyticSolid, Prism, Seg};

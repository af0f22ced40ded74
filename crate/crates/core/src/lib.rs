//! Bounded-distance bijections between cut-and-project sets and lattices.

pub mod bijection;
pub mod brs;
pub mod catalog;
pub mod cutproject;
pub mod form;
pub mod hp;
pub mod lattice;
pub mod matrix;
pub mod metric;
pub mod penrose;
pub mod scalar;

pub use cutproject::{LiftedPoint, Region, Scheme, SchemeError, Target, Window};
pub use hp::HpFloat;
pub use lattice::{complement, index, saturate, smith_normal_form, LatticeError, SmithForm};
pub use matrix::IntMatrix;
pub use scalar::ExactScalar;

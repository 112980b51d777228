//! Exact workbench for controlled algebraic K-theory computations.

pub mod chains;
pub mod control;
pub mod doc;
pub mod gen;
pub mod geometric;
pub mod ksimplex;
pub mod morphisms;
pub mod posets;
pub mod rings;

/// Basis elements, points and frontier ids are identified by string labels.
pub type Label = String;

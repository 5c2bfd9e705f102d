//! Hierarchical fuzzy inference trees (HFIT).
//!
//! Trees of low-dimensional type-1 or interval type-2 TSK systems, built in
//! two phases: a nondominated-sorting genetic program searches the structure
//! (minimizing training RMSE and parameter count), then differential
//! evolution tunes the parameters of the chosen tree.
//!
//! * [`fuzzy`] – membership, firing, consequents, Karnik–Mendel reduction
//! * [`tree`] – the tree genotype/phenotype and its parameter vector
//! * [`mogp`] – structure search (sorting, crowding, operators, evolution loop)
//! * [`de`] – DE/rand-to-best/1/bin parameter tuning
//! * [`data`] – benchmark generators, CSV loading, scaling, splits, metrics

pub mod fuzzy;
pub mod tree;
pub mod data;
pub mod mogp;
pub mod de;

pub use tree::{FisKind, FuzzyTree, TreeLimits};

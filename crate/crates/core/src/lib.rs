//! Training engine for networks whose backward pass runs through pluggable
//! feedback pathways (exact transpose, fixed random, learned low-rank
//! factors, local Oja/Hebbian factors, direct broadcast), together with the
//! continuous-time linear theory used to check their learning dynamics.

// NaN must fail range checks, so `!(x >= 0.0)` is the intended form.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod error;
pub mod feedback;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod tasks;
pub mod theory;
pub mod trajectory;

pub use error::{Error, Result};
pub use linalg::{Matrix, Rng, SvdTriple};

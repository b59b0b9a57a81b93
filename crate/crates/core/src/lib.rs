//! Symbiotic thread-to-core allocation for processors with two-way
//! simultaneous multithreading.
//!
//! Counter samples become dispatch/stall stacks ([`stack`]), a per-category
//! bilinear model predicts how two applications slow each other down
//! ([`model`]), and a minimum-weight perfect matching picks the pairs
//! ([`matching`], [`policy`]). A quantum-driven simulator with a hidden
//! ground truth ([`sim`]) evaluates the policies; [`train`], [`io`] and
//! [`cli`] supply model fitting, file formats and the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod cli;
pub mod io;
pub mod matching;
pub mod model;
pub mod policy;
pub mod sim;
pub mod stack;
pub mod train;

//! Numerical laboratory for Hardy-type averaging operators on products of
//! Heisenberg groups.

pub mod cli;
pub mod closedform;
pub mod error;
pub mod funcs;
pub mod hgroup;
pub mod lab;
pub mod measure;
pub mod operators;
pub mod special;

pub use error::{Error, Result};

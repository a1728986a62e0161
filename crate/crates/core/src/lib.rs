//! Exact verification of supermartingale deflators for sets of nonnegative
//! adapted processes on finite event trees.

pub mod rational;
pub mod tree;
pub mod process;
pub mod boundedness;
pub mod lp;
pub mod deflator;
pub mod gsm;
pub mod instance;
pub mod gallery;
pub mod lab;
pub mod cli;

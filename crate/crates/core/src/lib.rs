#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod beam;
pub mod error;
pub mod inference;
pub mod kernels;
pub mod likelihood;
pub mod linalg;
pub mod study;

pub use error::{Error, Result};

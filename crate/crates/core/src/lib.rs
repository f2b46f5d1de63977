//! Certified computations around the `l^p` chain and Hardy spaces on the disc:
//! strict-inclusion witnesses, dense lineable and spaceable subspaces avoiding
//! smaller spaces, and radial growth of singular holomorphic functions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod enumeration;
pub mod error;
pub mod hardy;
pub mod lineability;
pub mod quad;
pub mod report;
pub mod seq;
pub mod spaceability;
pub mod witness;

pub use error::{Error, Result};

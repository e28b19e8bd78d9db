#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod almost_complex;
pub mod cauchy_green;
pub mod disc;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod lab;
pub mod linalg;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/cauchy-green.md")]
    mod cauchy_green {}
    #[doc = include_str!("../../../book/src/structures.md")]
    mod structures {}
    #[doc = include_str!("../../../book/src/discs.md")]
    mod discs {}
    #[doc = include_str!("../../../book/src/regions.md")]
    mod regions {}
    #[doc = include_str!("../../../book/src/limits.md")]
    mod limits {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

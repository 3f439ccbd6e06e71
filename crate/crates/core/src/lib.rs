#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod matrix;
pub mod minimax;
pub mod multivariate;
pub mod procedure;
pub mod rng;
pub mod sdp;
pub mod series;
pub mod signal;
pub mod sparse_eig;
pub mod univariate;

pub use error::{Error, Result};
pub use matrix::SymMatrix;
pub use procedure::{Procedure, Scanner};
pub use series::Series;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/univariate.md")]
    mod univariate {}
    #[doc = include_str!("../../../book/src/sparse-eigenvalues.md")]
    mod sparse_eigenvalues {}
    #[doc = include_str!("../../../book/src/multivariate.md")]
    mod multivariate {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/lower-bounds.md")]
    mod lower_bounds {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

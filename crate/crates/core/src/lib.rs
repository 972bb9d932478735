//! Cocycles over hyperbolic toral automorphisms with values in circle
//! diffeomorphisms: holonomies, cycle weights, conjugacies by path transport
//! and invariant fiber metrics.

pub mod circle;
pub mod cocycle;
pub mod conjugacy;
pub mod estimates;
mod error;
pub mod holonomy;
pub mod metric;
pub mod spectral;
pub mod stats;
pub mod torus;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/base.md")]
    mod base {}
    #[doc = include_str!("../../../book/src/circle.md")]
    mod circle {}
    #[doc = include_str!("../../../book/src/cocycles.md")]
    mod cocycles {}
    #[doc = include_str!("../../../book/src/holonomy.md")]
    mod holonomy {}
    #[doc = include_str!("../../../book/src/conjugacy.md")]
    mod conjugacy {}
    #[doc = include_str!("../../../book/src/metric.md")]
    mod metric {}
}

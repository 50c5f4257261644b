//! Bermudan option exposure and XVA under the CGMY Lévy model.

pub mod cos;
pub mod error;
pub mod experiment;
pub mod exposure;
pub mod fpde;
pub mod model;
pub mod simulate;
pub mod special;
pub mod xva;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/model.md")]
    pub struct Model;
    #[doc = include_str!("../../../book/src/simulation.md")]
    pub struct Simulation;
    #[doc = include_str!("../../../book/src/fpde.md")]
    pub struct Fpde;
    #[doc = include_str!("../../../book/src/cos.md")]
    pub struct Cos;
    #[doc = include_str!("../../../book/src/exposure.md")]
    pub struct Exposure;
    #[doc = include_str!("../../../book/src/xva.md")]
    pub struct Xva;
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub struct Experiments;
    #[doc = include_str!("../../../book/src/accuracy.md")]
    pub struct Accuracy;
}

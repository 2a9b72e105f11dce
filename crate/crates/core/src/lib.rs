//! Out-of-distribution analysis for image classification datasets.
//!
//! The crate scores samples with an ensemble of logistic-regression models
//! over several feature sets, projects them to 2D, packs the projection into a
//! square grid with a kNN-accelerated assignment solver, and serves zoomable,
//! OoD-biased views of the result over HTTP.

pub mod analysis;
pub mod cli;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod geom;
pub mod grid;
pub mod hierarchy;
pub mod knn;
pub mod lap;
pub mod metrics;
pub mod projection;
pub mod server;
pub mod synthetic;

pub use error::{Error, Result};

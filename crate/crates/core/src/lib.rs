//! Supervised graph prediction with Fused Gromov-Wasserstein (FGW) barycenters.
//!
//! Graphs are represented as metric measure spaces `(C, F, 1/n)`. The crate
//! provides exact linear transport, a Frank-Wolfe FGW solver, weighted FGW
//! barycenters, and two conditional barycenter predictors: kernel ridge
//! weights over training graphs and a neural weight head with learned
//! template graphs.

pub mod barycenter;
pub mod dataset;
pub mod error;
pub mod fgw;
pub mod graph;
pub mod io;
pub mod krr;
pub mod neural;
pub mod ot;
pub mod synth;

pub use error::{Error, Result};

//! Ensemble data assimilation (LETKF) on adaptive 1D meshes.
//!
//! Every ensemble member is forecast on one shared look-ahead mesh. That mesh is
//! built by intersecting the metric tensors accumulated by a small pre-forecast
//! ensemble with a metric that resolves the upcoming observations. Two forward
//! models are included: the Nagumo reaction-diffusion equation and a coupled pair
//! of Kuramoto-Sivashinsky equations.

pub mod config;
pub mod cycle;
pub mod error;
pub mod experiments;
pub mod io;
pub mod letkf;
pub mod mesh;
pub mod metric;
pub mod models;
pub mod observations;
pub mod rng;

pub use error::{Error, Result};
pub use mesh::{equidistribute, interp_linear, mesh_quality, Mesh1D, MeshQuality, StateField};
pub use metric::{metric_intersect_field, spd_intersect, Location, MetricField, SpdMatrix};

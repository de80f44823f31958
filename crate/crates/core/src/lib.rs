//! Geographic word-usage analysis on a hierarchical triangular mesh.
//!
//! The pipeline: documents are binned into spherical-triangle cells
//! ([`htm`]), counted into a word×cell matrix and normalized to relative
//! frequencies ([`corpus`]), split into low-rank and sparse parts by
//! Principal Component Pursuit ([`rpca`]), and turned into ranked word lists,
//! cell score maps and cross-corpus projections ([`analysis`]).

pub mod analysis;
pub mod corpus;
pub mod geojson;
pub mod htm;
pub mod linalg;
pub mod rpca;
pub mod store;
pub mod synthetic;

pub use analysis::{ComponentModel, SourceTag};
pub use corpus::{CountMatrix, Document, FilterSpec, FrequencyMatrix};
pub use htm::{GeoPoint, TrixelId};
pub use linalg::DenseMatrix;
pub use rpca::{PcpConfig, PcpResult};

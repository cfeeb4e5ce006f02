//! Geometry and alignment measurements for neural-network embedding spaces.
//!
//! Two quantities are computed from per-layer embedding files:
//!
//! * the graph convexity score of labelled concept regions, measured on a
//!   Euclidean k-nearest-neighbour graph ([`graph`], [`convexity`]);
//! * the triplet odd-one-out accuracy against human judgments ([`alignment`]),
//!   together with the affine "naive transform" that is fitted to raise it
//!   ([`transform`]).
//!
//! [`stats`] correlates the two layer-wise, [`synth`] produces Gaussian-mixture
//! fixtures with known ground truth, and the `convexalign` binary wires the
//! pipeline together.

pub mod alignment;
pub mod convexity;
pub mod embedding;
pub mod error;
pub mod graph;
pub mod manifest;
pub mod plot;
pub mod stats;
pub mod summation;
pub mod synth;
pub mod transform;

pub use error::{Error, Result};

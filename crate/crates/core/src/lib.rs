//! Segmentation of clumped cell nuclei in fluorescence microscopy images.
//!
//! The pipeline finds concave points on the boundary of each foreground
//! clump, screens candidate point pairs, keeps the connections whose
//! resulting regions are well explained by an ellipse, and replaces each
//! straight connection with a curve that follows the intensity valley
//! between touching nuclei.

pub mod config;
pub mod curvature;
pub mod curve_trace;
pub mod ellipse_fit;
pub mod error;
pub mod eval_metrics;
pub mod geom;
pub mod image_prep;
pub mod pairing;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};

//! Spiking graph contrastive learning: 1-bit node embeddings from spiking
//! GNN encoders trained blockwise with surrogate gradients, plus empirical
//! verification of the firing-rate approximation theory, the SOP/MAC energy
//! model, and CKA representation similarity.

pub mod analytics;
pub mod bits;
pub mod contrastive;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod nd;
pub mod neuron;
pub mod synth;
pub mod theory;
pub mod trainer;

pub use error::{Result, SgclError};

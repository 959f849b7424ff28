//! Functional generative modeling for small molecular graphs.
//!
//! Molecules are treated as functions from spectral coordinates (rows of the
//! graph-Laplacian eigenvector matrix, and Hadamard products thereof for node
//! pairs) to signal vectors holding atom-type, bond-type, and null-token
//! slots. A pair of modulated coordinate networks is trained with a denoising
//! diffusion objective: an inner gradient-descent loop infers a per-molecule
//! latent code from noisy signals, and an outer Adam loop updates both
//! networks. Sampling runs the reverse diffusion on signals attached to
//! training-set topologies and decodes the result back into a graph.

pub mod checkpoint;
pub mod config;
pub mod diffusion;
pub mod metrics;
pub mod molgraph;
pub mod nn;
pub mod rng;
pub mod signal;
pub mod spectral;
pub mod trainer;

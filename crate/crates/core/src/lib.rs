//! Face-scan sizing pipeline: landmark-based face extraction, a point-cloud
//! autoencoder trained with a matching-based reconstruction loss and an MMD
//! latent loss, and latent-space clustering into demographic sizing groups.

pub mod analysis;
pub mod assignment;
pub mod cli;
pub mod formats;
pub mod geometry;
pub mod nn;
pub mod pipeline;
pub mod vae;

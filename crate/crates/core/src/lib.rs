//! Training-free compression for 3D Gaussian splatting models.
//!
//! The pipeline ranks Gaussians by how much they contribute to rendered
//! pixels ([`importance`]), prunes whole rows or just the view-dependent
//! color block of weak rows ([`adp`]), quantizes every attribute channel at
//! 4 or 8 bits with per-subgroup ranges ([`mpq`]) and walks an ordered list
//! of candidate plans to meet a quality or size target ([`foa`]). A CPU
//! reference rasterizer ([`render`]) and image metrics ([`metrics`]) close
//! the loop without any training code.

pub mod adp;
pub mod bitpack;
pub mod error;
pub mod fgc;
pub mod foa;
pub mod importance;
pub mod metrics;
pub mod model;
pub mod mpq;
pub mod ply;
pub mod render;
pub mod scenegen;
pub mod sh;

pub use crate::error::{Error, Result};
pub use crate::model::{ChannelGroup, ChannelSchema, GaussianModel};
pub use crate::render::{Camera, ImageBuffer, RenderStats};

//! Reduced-reference and no-reference quality metrics for dehazed images.
//!
//! Numeric routines are generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below name the double-precision instantiations used by the
//! command-line tool and the persisted file formats.

pub mod error;
pub mod eval;
pub mod features;
pub mod imageio;
pub mod naturalness;
pub mod nrbp;
pub mod rrpd;
pub mod scalar;
pub mod stats;
pub mod structure;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Plane64 = imageio::Plane<f64>;
pub type Plane32 = imageio::Plane<f32>;
pub type Image64 = imageio::YCbCrImage<f64>;
pub type Image32 = imageio::YCbCrImage<f32>;
pub type FeatureVector64 = features::FeatureVector<f64>;
pub type ChannelConfig64 = features::ChannelConfig<f64>;
pub type Packet64 = rrpd::RrFeaturePacket<f64>;
pub type SvrModel64 = nrbp::SvrModel<f64>;
pub type SvrConfig64 = nrbp::SvrConfig<f64>;
pub type LogisticParams64 = eval::LogisticParams<f64>;

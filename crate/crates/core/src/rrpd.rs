//! Sender-side feature packets and the partial-discrepancy score.
//!
//! The sender extracts `LD ⊕ CA` (22 values) and the naturalness block (120
//! values) from the pristine image and ships them as a small JSON packet.
//! The receiver extracts the same features from the dehazed image and scores
//!
//! ```text
//! Q = mean(|LDCA - LDCA'|) * mean(|ON - ON'|)
//! ```
//!
//! Lower is better; an undistorted image scores exactly zero.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ldca_features, ChannelConfig, Schema};
use crate::imageio::YCbCrImage;
use crate::naturalness::on_features;
use crate::scalar::Real;

pub const PACKET_VERSION: &str = "rrpd/1";

/// Field order is part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct RrFeaturePacket<T> {
    pub version: String,
    pub ppd: T,
    pub ldca: Vec<T>,
    pub on: Vec<T>,
    pub source_hint: Option<String>,
}

impl<T: Real> RrFeaturePacket<T> {
    pub fn validate(&self) -> Result<()> {
        if self.version != PACKET_VERSION {
            return Err(Error::Version {
                expected: PACKET_VERSION.into(),
                found: self.version.clone(),
            });
        }
        for (name, v, schema) in [("ldca", &self.ldca, Schema::Ldca22), ("on", &self.on, Schema::On120)] {
            if v.len() != schema.len() {
                return Err(Error::Schema(format!(
                    "packet {name} holds {} values, expected {}",
                    v.len(),
                    schema.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Data(format!("packet {name} has non-finite values")));
            }
        }
        if !(self.ppd.is_finite() && self.ppd > T::zero()) {
            return Err(Error::Data(format!("packet ppd {} is not positive", self.ppd)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("packets serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // check the version before the payload shape so old packets report clearly
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let found = raw.get("version").and_then(|v| v.as_str()).unwrap_or("");
        if found != PACKET_VERSION {
            return Err(Error::Version {
                expected: PACKET_VERSION.into(),
                found: found.into(),
            });
        }
        let packet: Self = serde_json::from_value(raw).map_err(|e| Error::Schema(e.to_string()))?;
        packet.validate()?;
        Ok(packet)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Receiver-side and sender-side features share this extraction.
fn extract_blocks<T: Real>(img: &YCbCrImage<T>, cfg: &ChannelConfig<T>) -> Result<(Vec<T>, Vec<T>)> {
    cfg.validate()?;
    let ldca = ldca_features(img, cfg)?.into_values();
    let on = on_features(img, &cfg.local_moment)?.into_values();
    Ok((ldca, on))
}

pub fn extract_rr_packet<T: Real>(reference: &YCbCrImage<T>, cfg: &ChannelConfig<T>) -> Result<RrFeaturePacket<T>> {
    let (ldca, on) = extract_blocks(reference, cfg)?;
    let source_hint = Path::new(&reference.source_path)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned());
    Ok(RrFeaturePacket {
        version: PACKET_VERSION.into(),
        ppd: cfg.csf.ppd,
        ldca,
        on,
        source_hint,
    })
}

fn mean_abs_diff<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum::<T>() / T::from_usize_lossy(a.len())
}

/// Partial-discrepancy score of a dehazed image against a sender packet.
pub fn rrpd_score<T: Real>(packet: &RrFeaturePacket<T>, dehazed: &YCbCrImage<T>, cfg: &ChannelConfig<T>) -> Result<T> {
    packet.validate()?;
    if packet.ppd != cfg.csf.ppd {
        return Err(Error::Config(format!(
            "packet was extracted at ppd {} but the receiver uses ppd {}",
            packet.ppd, cfg.csf.ppd
        )));
    }
    let (ldca, on) = extract_blocks(dehazed, cfg)?;
    Ok(score_blocks(packet, &ldca, &on))
}

/// Combines already extracted receiver-side blocks with a packet.
pub fn score_blocks<T: Real>(packet: &RrFeaturePacket<T>, ldca: &[T], on: &[T]) -> T {
    mean_abs_diff(&packet.ldca, ldca) * mean_abs_diff(&packet.on, on)
}

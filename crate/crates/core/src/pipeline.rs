//! Convenience chaining of the ingest and fire-graph stages.

use crate::error::Result;
use crate::firegraph::{build_fires, GraphParams, Wildfire};
use crate::ingest::{encode_all, filter_bbox, BoundingBox, EncodedPoint, NormalizationStats, RawDetection};

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub stats: NormalizationStats,
    pub points: Vec<EncodedPoint>,
    pub fires: Vec<Wildfire>,
}

/// Box filter, encoding and fire extraction in one call.
pub fn reconstruct(detections: &[RawDetection], bbox: &BoundingBox, params: &GraphParams) -> Result<Reconstruction> {
    let kept = filter_bbox(detections, bbox);
    let (stats, points) = encode_all(&kept)?;
    let fires = build_fires(&points, params)?;
    Ok(Reconstruction { stats, points, fires })
}

//! Spherical-earth helpers on WGS84 latitude/longitude degrees.

use crate::error::{Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    /// Unit vector on the sphere.
    pub fn to_unit_vector(self) -> [f64; 3] {
        let (phi, lambda) = (self.lat.to_radians(), self.lon.to_radians());
        [phi.cos() * lambda.cos(), phi.cos() * lambda.sin(), phi.sin()]
    }
}

/// Great-circle distance in meters (haversine formula).
///
/// Bit-for-bit symmetric in its arguments.
pub fn haversine_m(a: LatLon, b: LatLon) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = (b.lat - a.lat).abs().to_radians();
    let dlambda = (b.lon - a.lon).abs().to_radians();
    let s_phi = (dphi / 2.0).sin();
    let s_lambda = (dlambda / 2.0).sin();
    let h = s_phi * s_phi + (phi1.cos() * phi2.cos()) * s_lambda * s_lambda;
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Chord length on the unit sphere for a surface distance in meters.
pub fn chord_for_distance(meters: f64) -> f64 {
    2.0 * (meters / (2.0 * EARTH_RADIUS_M)).min(std::f64::consts::FRAC_PI_2).sin()
}

/// Initial great-circle bearing, degrees clockwise from true north in `[0, 360)`.
pub fn bearing_deg(from: LatLon, to: LatLon) -> Result<f64> {
    if from == to {
        return Err(Error::CoincidentPoints);
    }
    let (phi1, phi2) = (from.lat.to_radians(), to.lat.to_radians());
    let dlambda = (to.lon - from.lon).to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    if x == 0.0 && y == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let deg = y.atan2(x).to_degrees().rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    Ok(if deg >= 360.0 { 0.0 } else { deg })
}

/// Point reached by travelling `meters` along the great circle leaving `from` at `bearing`.
pub fn destination(from: LatLon, bearing: f64, meters: f64) -> LatLon {
    let delta = meters / EARTH_RADIUS_M;
    let theta = bearing.to_radians();
    let phi1 = from.lat.to_radians();
    let lambda1 = from.lon.to_radians();
    let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos()).asin();
    let lambda2 = lambda1
        + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());
    LatLon {
        lat: phi2.to_degrees(),
        lon: (lambda2.to_degrees() + 540.0).rem_euclid(360.0) - 180.0,
    }
}

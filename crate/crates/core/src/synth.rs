//! Seeded synthetic detections.
//!
//! Each fire is a random walk whose steps point at sector centres (plus
//! optional jitter), repeating the previous direction with probability
//! `p_stay`. Fires start on a grid at least 10 km apart, so with lengths up
//! to [`MAX_SYNTH_LENGTH`] every fire is recovered as exactly one component.

use chrono::{DateTime, NaiveDate};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::firegraph::{DEFAULT_K, DEFAULT_SPATIAL_RADIUS_M, DEFAULT_TEMPORAL_RADIUS_S};
use crate::geo::{destination, haversine_m, LatLon, EARTH_RADIUS_M};
use crate::ingest::{BoundingBox, RawDetection};
use crate::sequence::Direction;

pub const MIN_FIRE_SPACING_M: f64 = 10_000.0;

/// Longest fire whose points are all within each other's `K` nearest
/// neighbours.
pub const MAX_SYNTH_LENGTH: usize = DEFAULT_K + 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_fires: usize,
    pub length_min: usize,
    pub length_max: usize,
    pub step_min_m: f64,
    pub step_max_m: f64,
    pub p_stay: f64,
    /// Seconds between consecutive detections; whole minutes.
    pub cadence_min_s: i64,
    pub cadence_max_s: i64,
    /// Uniform deviation from the sector centre, degrees.
    pub bearing_jitter_deg: f64,
    pub region: BoundingBox,
    pub spacing_m: f64,
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_fires: 500,
            length_min: 1,
            length_max: 6,
            step_min_m: 150.0,
            step_max_m: 350.0,
            p_stay: 0.8,
            cadence_min_s: 1800,
            cadence_max_s: 4 * 3600,
            bearing_jitter_deg: 10.0,
            region: BoundingBox::SOUTH_AFRICA,
            spacing_m: MIN_FIRE_SPACING_M,
            first_day: NaiveDate::from_ymd_opt(2012, 1, 1).expect("valid date"),
            last_day: NaiveDate::from_ymd_opt(2014, 12, 31).expect("valid date"),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    /// All detections, ordered by time.
    pub detections: Vec<RawDetection>,
    /// Indices into `detections`, one list per fire in spread order.
    pub fires: Vec<Vec<usize>>,
    /// Direction of every step of every fire.
    pub directions: Vec<Vec<Direction>>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_fires == 0 {
            return bad("n_fires must be positive".into());
        }
        if self.length_min == 0 || self.length_min > self.length_max {
            return bad(format!("invalid length range {}..={}", self.length_min, self.length_max));
        }
        if self.length_max > MAX_SYNTH_LENGTH {
            return bad(format!(
                "length_max {} exceeds {MAX_SYNTH_LENGTH}; longer fires are not guaranteed to stay connected",
                self.length_max
            ));
        }
        if !(self.step_min_m > 0.0 && self.step_min_m <= self.step_max_m) {
            return bad(format!("invalid step range {}..={} m", self.step_min_m, self.step_max_m));
        }
        if self.step_max_m > DEFAULT_SPATIAL_RADIUS_M {
            return bad(format!(
                "step distance {} m exceeds the {DEFAULT_SPATIAL_RADIUS_M} m spatial radius",
                self.step_max_m
            ));
        }
        if self.cadence_min_s < 60 || self.cadence_min_s > self.cadence_max_s {
            return bad(format!("invalid cadence range {}..={} s", self.cadence_min_s, self.cadence_max_s));
        }
        if self.cadence_max_s > DEFAULT_TEMPORAL_RADIUS_S {
            return bad(format!(
                "cadence {} s exceeds the {DEFAULT_TEMPORAL_RADIUS_S} s temporal radius",
                self.cadence_max_s
            ));
        }
        if self.cadence_min_s % 60 != 0 || self.cadence_max_s % 60 != 0 {
            return bad("cadence must be whole minutes".into());
        }
        if !(0.0..=1.0).contains(&self.p_stay) {
            return bad(format!("p_stay must be in [0, 1], got {}", self.p_stay));
        }
        if !(0.0..=20.0).contains(&self.bearing_jitter_deg) {
            return bad(format!("bearing jitter must be in [0, 20] degrees, got {}", self.bearing_jitter_deg));
        }
        if self.spacing_m < MIN_FIRE_SPACING_M {
            return bad(format!("fire spacing must be at least {MIN_FIRE_SPACING_M} m"));
        }
        if self.first_day > self.last_day {
            return bad("first_day is after last_day".into());
        }
        BoundingBox::new(self.region.lat_min, self.region.lat_max, self.region.lon_min, self.region.lon_max)?;
        Ok(())
    }

    /// Start positions on a grid inset far enough that no fire leaves the
    /// region.
    fn grid(&self) -> Vec<LatLon> {
        let m_per_deg = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        let widest = self.region.lat_min.abs().max(self.region.lat_max.abs()).to_radians().cos();
        let reach = MAX_SYNTH_LENGTH as f64 * self.step_max_m;
        let (dlat, dlon) = (self.spacing_m / m_per_deg, self.spacing_m / (m_per_deg * widest));
        let (ilat, ilon) = (reach / m_per_deg, reach / (m_per_deg * widest));
        let mut nodes = Vec::new();
        let mut lat = self.region.lat_min + ilat;
        while lat <= self.region.lat_max - ilat {
            let mut lon = self.region.lon_min + ilon;
            while lon <= self.region.lon_max - ilon {
                nodes.push(LatLon::new(lat, lon));
                lon += dlon;
            }
            lat += dlat;
        }
        nodes
    }
}

pub fn synth_generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let grid = spec.grid();
    if grid.len() < spec.n_fires {
        return Err(Error::Config(format!(
            "region fits only {} fires at {} m spacing, {} requested",
            grid.len(),
            spec.spacing_m,
            spec.n_fires
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let starts = index::sample(&mut rng, grid.len(), spec.n_fires).into_vec();
    let t_first = spec.first_day.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp() / 60;
    let t_last = spec.last_day.and_hms_opt(23, 59, 0).expect("valid time").and_utc().timestamp() / 60;
    let (cad_lo, cad_hi) = (spec.cadence_min_s / 60, spec.cadence_max_s / 60);

    // (minute, fire, step, position)
    let mut points: Vec<(i64, usize, usize, LatLon)> = Vec::new();
    let mut directions = Vec::with_capacity(spec.n_fires);
    for (fire, &cell) in starts.iter().enumerate() {
        let len = rng.random_range(spec.length_min..=spec.length_max);
        let mut pos = grid[cell];
        let mut minute = rng.random_range(t_first..=t_last);
        let mut dirs = Vec::with_capacity(len.saturating_sub(1));
        points.push((minute, fire, 0, pos));
        for step in 1..len {
            let dir = match dirs.last() {
                Some(&prev) if rng.random::<f64>() < spec.p_stay => prev,
                Some(&prev) => {
                    let other = rng.random_range(1..8u8);
                    let code = (Direction::code(prev) - 1 + other) % 8 + 1;
                    Direction::from_code(code)?
                }
                None => Direction::from_code(rng.random_range(1..=8))?,
            };
            let centre = dir.center_bearing().expect("real direction");
            let next = loop {
                let jitter = if spec.bearing_jitter_deg > 0.0 {
                    rng.random_range(-spec.bearing_jitter_deg..=spec.bearing_jitter_deg)
                } else {
                    0.0
                };
                let meters = rng.random_range(spec.step_min_m..=spec.step_max_m);
                let candidate = destination(pos, (centre + jitter).rem_euclid(360.0), meters);
                if haversine_m(pos, candidate) <= DEFAULT_SPATIAL_RADIUS_M {
                    break candidate;
                }
            };
            minute += rng.random_range(cad_lo..=cad_hi);
            pos = next;
            dirs.push(dir);
            points.push((minute, fire, step, pos));
        }
        directions.push(dirs);
    }
    points.sort_by_key(|&(minute, fire, step, _)| (minute, fire, step));

    let mut fires = vec![Vec::new(); spec.n_fires];
    let mut detections = Vec::with_capacity(points.len());
    for (i, &(minute, fire, _, pos)) in points.iter().enumerate() {
        let time = DateTime::from_timestamp(minute * 60, 0).expect("in range").naive_utc();
        detections.push(RawDetection {
            latitude: pos.lat,
            longitude: pos.lon,
            acq_date: time.date(),
            acq_time: (minute.rem_euclid(1440)) as u16,
            frp: (rng.random_range(1.0..100.0f64) * 10.0).round() / 10.0,
            elevation: Some((rng.random_range(0.0..2500.0f64) * 10.0).round() / 10.0),
        });
        fires[fire].push(i);
    }
    Ok(SynthOutput {
        detections,
        fires,
        directions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::bearing_deg;
    use crate::sequence::direction_of;

    #[test]
    fn long_steps_rejected() {
        let spec = SynthSpec {
            step_max_m: 500.0,
            ..SynthSpec::default()
        };
        assert!(matches!(synth_generate(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn infeasible_specs_rejected() {
        let bad = [
            SynthSpec { cadence_max_s: 30_000, ..SynthSpec::default() },
            SynthSpec { p_stay: 1.5, ..SynthSpec::default() },
            SynthSpec { length_max: 12, ..SynthSpec::default() },
            SynthSpec { length_min: 0, ..SynthSpec::default() },
            SynthSpec { cadence_min_s: 90, ..SynthSpec::default() },
            SynthSpec { spacing_m: 2_000.0, ..SynthSpec::default() },
            SynthSpec { n_fires: 1_000_000, ..SynthSpec::default() },
        ];
        for spec in bad {
            assert!(synth_generate(&spec).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn steps_respect_bounds_and_directions() {
        let spec = SynthSpec {
            n_fires: 200,
            length_min: 1,
            length_max: 9,
            step_max_m: 375.0,
            cadence_max_s: 21_600,
            bearing_jitter_deg: 20.0,
            seed: 4,
            ..SynthSpec::default()
        };
        let out = synth_generate(&spec).unwrap();
        assert_eq!(out.fires.len(), 200);
        for (fire, dirs) in out.fires.iter().zip(&out.directions) {
            assert!((1..=9).contains(&fire.len()));
            assert_eq!(dirs.len(), fire.len() - 1);
            for (w, &dir) in fire.windows(2).zip(dirs) {
                let (a, b) = (&out.detections[w[0]], &out.detections[w[1]]);
                let (pa, pb) = (LatLon::new(a.latitude, a.longitude), LatLon::new(b.latitude, b.longitude));
                assert!(haversine_m(pa, pb) <= 375.0);
                let gap = b.timestamp() - a.timestamp();
                assert!(gap > 0 && gap <= 21_600 && gap % 60 == 0);
                assert_eq!(direction_of(bearing_deg(pa, pb).unwrap()), dir);
            }
        }
        let times: Vec<i64> = out.detections.iter().map(|d| d.timestamp()).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
        assert!(out.detections.iter().all(|d| BoundingBox::SOUTH_AFRICA.contains(d.latitude, d.longitude)));
    }

    #[test]
    fn full_persistence_repeats_direction() {
        let spec = SynthSpec {
            n_fires: 100,
            length_min: 3,
            length_max: 3,
            p_stay: 1.0,
            seed: 9,
            ..SynthSpec::default()
        };
        let out = synth_generate(&spec).unwrap();
        assert!(out.directions.iter().all(|d| d.len() == 2 && d[0] == d[1]));
    }

    #[test]
    fn fires_are_far_apart() {
        let spec = SynthSpec { n_fires: 300, seed: 2, ..SynthSpec::default() };
        let out = synth_generate(&spec).unwrap();
        let starts: Vec<LatLon> = out
            .fires
            .iter()
            .map(|f| {
                let d = &out.detections[f[0]];
                LatLon::new(d.latitude, d.longitude)
            })
            .collect();
        for i in 0..starts.len() {
            for j in i + 1..starts.len() {
                assert!(haversine_m(starts[i], starts[j]) >= MIN_FIRE_SPACING_M - 1e-6);
            }
        }
    }

    #[test]
    fn seeded() {
        let spec = SynthSpec { n_fires: 20, ..SynthSpec::default() };
        assert_eq!(synth_generate(&spec).unwrap(), synth_generate(&spec).unwrap());
        let other = SynthSpec { seed: 1, ..spec.clone() };
        assert_ne!(synth_generate(&spec).unwrap(), synth_generate(&other).unwrap());
    }
}

//! Supervised samples from ordered wildfires.
//!
//! Binary samples concatenate the features of `l_w - 1` points. Multiclass
//! samples do the same and then append one direction code per input point:
//! `[x_0 | x_1 | ... | x_{l-2} | d_0, d_1, ..., d_{l-2}]` with `d_0 = 0`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::firegraph::Wildfire;
use crate::geo::{bearing_deg, LatLon};
use crate::ingest::FEATURE_DIM;

pub const MIN_LW: usize = 2;
pub const MAX_LW: usize = 8;

/// Compass sector code: 0 means "no previous direction", 1..=8 run
/// clockwise N, NE, E, SE, S, SW, W, NW.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Direction(u8);

impl Direction {
    pub const NONE: Direction = Direction(0);
    pub const N: Direction = Direction(1);
    pub const NE: Direction = Direction(2);
    pub const E: Direction = Direction(3);
    pub const SE: Direction = Direction(4);
    pub const S: Direction = Direction(5);
    pub const SW: Direction = Direction(6);
    pub const W: Direction = Direction(7);
    pub const NW: Direction = Direction(8);

    pub fn from_code(code: u8) -> Result<Self> {
        if code <= 8 {
            Ok(Direction(code))
        } else {
            Err(Error::OutOfRange {
                what: "direction code",
                value: code.to_string(),
            })
        }
    }

    pub fn code(self) -> u8 {
        self.0
    }

    /// Bearing at the middle of the sector; `None` for [`Direction::NONE`].
    pub fn center_bearing(self) -> Option<f64> {
        (self.0 > 0).then(|| f64::from(self.0 - 1) * 45.0)
    }

    pub fn name(self) -> &'static str {
        ["-", "N", "NE", "E", "SE", "S", "SW", "W", "NW"][usize::from(self.0)]
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Bins a bearing into a 45° sector centred on each compass point.
/// Sector boundaries belong to the clockwise-later sector.
pub fn direction_of(bearing: f64) -> Direction {
    let b = bearing.rem_euclid(360.0);
    let sector = ((b + 22.5) / 45.0).floor() as i64;
    Direction((sector.rem_euclid(8) + 1) as u8)
}

/// Direction of travel between two consecutive detections.
pub fn step_direction(from: LatLon, to: LatLon) -> Result<Direction> {
    bearing_deg(from, to).map(direction_of)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Binary,
    Multiclass,
}

impl Task {
    pub fn n_classes(self) -> usize {
        match self {
            Task::Binary => 2,
            Task::Multiclass => 8,
        }
    }

    /// Values per timestep when a sample is viewed as a sequence.
    pub fn per_step_dim(self) -> usize {
        match self {
            Task::Binary => FEATURE_DIM,
            Task::Multiclass => FEATURE_DIM + 1,
        }
    }

    pub fn input_dim(self, lw: usize) -> usize {
        self.per_step_dim() * (lw - 1)
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::Multiclass => "multiclass",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Task::Binary),
            "multiclass" => Ok(Task::Multiclass),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySample {
    pub input: Vec<f64>,
    /// 1 = fire continued burning, 0 = fire ended.
    pub label: u8,
    pub lw: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassSample {
    pub input: Vec<f64>,
    pub label: Direction,
    pub lw: usize,
}

fn check_lw(lw: usize) -> Result<()> {
    if lw < MIN_LW {
        return Err(Error::Config(format!("l_w must be at least {MIN_LW}, got {lw}")));
    }
    Ok(())
}

fn concat_features(fire: &Wildfire, count: usize) -> Vec<f64> {
    let mut input = Vec::with_capacity(count * FEATURE_DIM);
    for p in &fire.points[..count] {
        input.extend_from_slice(&p.features);
    }
    input
}

/// Fires of length exactly `lw` (last point dropped) become label 1; fires
/// of length `lw - 1` become label 0. Other lengths are ignored.
pub fn make_binary(fires: &[Wildfire], lw: usize) -> Result<Vec<BinarySample>> {
    check_lw(lw)?;
    Ok(fires
        .iter()
        .filter_map(|fire| {
            let label = match fire.len() {
                n if n == lw => 1,
                n if n == lw - 1 && n > 0 => 0,
                _ => return None,
            };
            Some(BinarySample {
                input: concat_features(fire, lw - 1),
                label,
                lw,
            })
        })
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MulticlassSet {
    pub samples: Vec<MulticlassSample>,
    /// Fires dropped because two consecutive points coincide.
    pub skipped: usize,
}

/// Directions `d_1..d_{n-1}` between consecutive points of a fire.
pub fn fire_directions(fire: &Wildfire) -> Result<Vec<Direction>> {
    fire.points
        .windows(2)
        .map(|w| {
            step_direction(
                LatLon::new(w[0].raw_lat, w[0].raw_lon),
                LatLon::new(w[1].raw_lat, w[1].raw_lon),
            )
        })
        .collect()
}

pub fn make_multiclass(fires: &[Wildfire], lw: usize) -> Result<MulticlassSet> {
    check_lw(lw)?;
    let mut set = MulticlassSet::default();
    for fire in fires.iter().filter(|f| f.len() == lw) {
        let steps = match fire_directions(fire) {
            Ok(steps) => steps,
            Err(Error::CoincidentPoints) => {
                set.skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut input = concat_features(fire, lw - 1);
        input.push(f64::from(Direction::NONE.code()));
        input.extend(steps[..lw - 2].iter().map(|d| f64::from(d.code())));
        set.samples.push(MulticlassSample {
            input,
            label: steps[lw - 2],
            lw,
        });
    }
    Ok(set)
}

/// Flat inputs with zero-based class indices, ready for training.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub task: Task,
    pub lw: usize,
    pub inputs: Vec<Vec<f64>>,
    /// Binary: the label itself. Multiclass: direction code minus one.
    pub labels: Vec<usize>,
    pub skipped: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.task.input_dim(self.lw)
    }

    pub fn from_binary(lw: usize, samples: Vec<BinarySample>) -> Self {
        let (inputs, labels) = samples.into_iter().map(|s| (s.input, usize::from(s.label))).unzip();
        Self {
            task: Task::Binary,
            lw,
            inputs,
            labels,
            skipped: 0,
        }
    }

    pub fn from_multiclass(lw: usize, set: MulticlassSet) -> Self {
        let (inputs, labels) = set
            .samples
            .into_iter()
            .map(|s| (s.input, usize::from(s.label.code() - 1)))
            .unzip();
        Self {
            task: Task::Multiclass,
            lw,
            inputs,
            labels,
            skipped: set.skipped,
        }
    }

    pub fn build(fires: &[Wildfire], task: Task, lw: usize) -> Result<Self> {
        Ok(match task {
            Task::Binary => Self::from_binary(lw, make_binary(fires, lw)?),
            Task::Multiclass => Self::from_multiclass(lw, make_multiclass(fires, lw)?),
        })
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.task.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            task: self.task,
            lw: self.lw,
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            skipped: 0,
        }
    }

    /// Down-samples every class to the size of the rarest one (seeded).
    /// Order of the kept samples follows the original order.
    pub fn balanced(&self, seed: u64) -> Self {
        let counts = self.class_counts();
        let target = counts.iter().copied().filter(|&c| c > 0).min().unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = Vec::new();
        for class in 0..counts.len() {
            let mut idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == class).collect();
            idx.shuffle(&mut rng);
            idx.truncate(target);
            keep.extend(idx);
        }
        keep.sort_unstable();
        let mut out = self.subset(&keep);
        out.skipped = self.skipped;
        out
    }

    /// Label as written on disk: binary 0/1, multiclass direction code 1..=8.
    pub fn file_label(&self, i: usize) -> usize {
        match self.task {
            Task::Binary => self.labels[i],
            Task::Multiclass => self.labels[i] + 1,
        }
    }

    /// One record per line: label, then the input values.
    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for i in 0..self.len() {
            let mut row = Vec::with_capacity(self.dim() + 1);
            row.push(self.file_label(i).to_string());
            row.extend(self.inputs[i].iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<dataset>", e))?;
        Ok(())
    }

    pub fn manifest(&self) -> DatasetManifest {
        DatasetManifest {
            task: self.task,
            lw: self.lw,
            dimension: self.dim(),
            samples: self.len(),
            class_counts: self.class_counts(),
            skipped: self.skipped,
        }
    }
}

/// Sidecar describing a written dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub task: Task,
    pub lw: usize,
    pub dimension: usize,
    pub samples: usize,
    /// Indexed by class: binary `[label 0, label 1]`, multiclass `[N, NE, ..., NW]`.
    pub class_counts: Vec<usize>,
    pub skipped: usize,
}

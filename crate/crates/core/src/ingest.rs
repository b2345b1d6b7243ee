//! Detection parsing and point encoding.
//!
//! Every detection becomes an 80-wide feature vector laid out as
//!
//! | indices | content                                   |
//! |---------|-------------------------------------------|
//! | 0..24   | hour-of-day one-hot                       |
//! | 24..76  | week-of-year one-hot (53rd week clamped)  |
//! | 76      | latitude, min-max scaled                  |
//! | 77      | longitude, min-max scaled                 |
//! | 78      | fire radiative power, min-max scaled      |
//! | 79      | elevation, min-max scaled                 |

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HOUR_SLOTS: usize = 24;
pub const WEEK_SLOTS: usize = 52;
pub const CONTINUOUS: usize = 4;
/// Width of one encoded point.
pub const FEATURE_DIM: usize = HOUR_SLOTS + WEEK_SLOTS + CONTINUOUS;

const _: () = assert!(FEATURE_DIM == 80);

/// One satellite fire pixel as read from a detection file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDetection {
    pub latitude: f64,
    pub longitude: f64,
    pub acq_date: NaiveDate,
    /// Minutes after midnight, `0..1440`.
    pub acq_time: u16,
    /// Fire radiative power in megawatts.
    pub frp: f64,
    /// Meters above sea level, when known.
    pub elevation: Option<f64>,
}

impl RawDetection {
    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(Error::OutOfRange {
                what: "latitude",
                value: self.latitude.to_string(),
            });
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(Error::OutOfRange {
                what: "longitude",
                value: self.longitude.to_string(),
            });
        }
        if !(self.frp >= 0.0) || !self.frp.is_finite() {
            return Err(Error::OutOfRange {
                what: "frp",
                value: self.frp.to_string(),
            });
        }
        if self.acq_time >= 1440 {
            return Err(Error::OutOfRange {
                what: "acq_time",
                value: self.acq_time.to_string(),
            });
        }
        Ok(())
    }

    /// Seconds since the Unix epoch, reading date and time as UTC.
    pub fn timestamp(&self) -> i64 {
        let midnight = self
            .acq_date
            .and_hms_opt(0, 0, 0)
            .expect("midnight is always valid")
            .and_utc()
            .timestamp();
        midnight + i64::from(self.acq_time) * 60
    }
}

/// Closed latitude/longitude rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self> {
        if !(lat_min < lat_max) || !(lon_min < lon_max) {
            return Err(Error::Config(format!(
                "bounding box requires lat_min < lat_max and lon_min < lon_max, got \
                 lat [{lat_min}, {lat_max}] lon [{lon_min}, {lon_max}]"
            )));
        }
        Ok(Self {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
        })
    }

    /// Mainland South Africa.
    pub const SOUTH_AFRICA: BoundingBox = BoundingBox {
        lat_min: -35.0,
        lat_max: -22.0,
        lon_min: 16.0,
        lon_max: 33.0,
    };

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.lat_min..=self.lat_max).contains(&lat) && (self.lon_min..=self.lon_max).contains(&lon)
    }
}

impl Default for BoundingBox {
    fn default() -> Self {
        Self::SOUTH_AFRICA
    }
}

/// Header names for each detection column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub latitude: String,
    pub longitude: String,
    pub acq_date: String,
    pub acq_time: String,
    pub frp: String,
    pub elevation: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            latitude: "latitude".into(),
            longitude: "longitude".into(),
            acq_date: "acq_date".into(),
            acq_time: "acq_time".into(),
            frp: "frp".into(),
            elevation: "elevation".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    /// Abort on the first malformed row.
    #[default]
    Strict,
    /// Record malformed rows and continue.
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    pub delimiter: u8,
    pub mode: ParseMode,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            mode: ParseMode::Strict,
        }
    }
}

#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub detections: Vec<RawDetection>,
    /// Rows rejected in [`ParseMode::Skip`], each an [`Error::Row`].
    pub skipped: Vec<Error>,
}

/// Parses delimiter-separated detections with a header row.
///
/// `acq_time` is an `HHMM` integer (`1345` is 13:45), `acq_date` is ISO-8601.
/// Line numbers in row errors count the header as line 1.
pub fn parse_detections<R: Read>(
    source: R,
    columns: &ColumnMap,
    options: ParseOptions,
) -> Result<ParseOutcome> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let idx_lat = need(&columns.latitude)?;
    let idx_lon = need(&columns.longitude)?;
    let idx_date = need(&columns.acq_date)?;
    let idx_time = need(&columns.acq_time)?;
    let idx_frp = need(&columns.frp)?;
    let idx_elev = find(&columns.elevation);

    let mut outcome = ParseOutcome::default();
    for (row, record) in reader.records().enumerate() {
        let line = row as u64 + 2;
        let parsed = record
            .map_err(|e| e.to_string())
            .and_then(|rec| {
                let field = |i: usize, name: &str| {
                    rec.get(i)
                        .ok_or_else(|| format!("missing field `{name}`"))
                };
                let num = |i: usize, name: &str| -> std::result::Result<f64, String> {
                    let raw = field(i, name)?;
                    raw.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| format!("`{name}` is not a number: {raw:?}"))
                };
                let latitude = num(idx_lat, "latitude")?;
                let longitude = num(idx_lon, "longitude")?;
                let frp = num(idx_frp, "frp")?;
                let date_raw = field(idx_date, "acq_date")?;
                let acq_date = NaiveDate::parse_from_str(date_raw, "%Y-%m-%d")
                    .map_err(|_| format!("invalid acq_date {date_raw:?}"))?;
                let time_raw = field(idx_time, "acq_time")?;
                let acq_time = parse_hhmm(time_raw)?;
                let elevation = match idx_elev.and_then(|i| rec.get(i)) {
                    None | Some("") => None,
                    Some(raw) => Some(
                        raw.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| format!("`elevation` is not a number: {raw:?}"))?,
                    ),
                };
                let det = RawDetection {
                    latitude,
                    longitude,
                    acq_date,
                    acq_time,
                    frp,
                    elevation,
                };
                det.validate().map_err(|e| e.to_string())?;
                Ok(det)
            })
            .map_err(|message| Error::Row { line, message });
        match parsed {
            Ok(det) => outcome.detections.push(det),
            Err(e) => match options.mode {
                ParseMode::Strict => return Err(e),
                ParseMode::Skip => outcome.skipped.push(e),
            },
        }
    }
    Ok(outcome)
}

/// Writes detections with the default column names. Times are `HHMM`;
/// coordinates use shortest round-trip formatting.
pub fn write_detections<W: Write>(out: W, detections: &[RawDetection]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["latitude", "longitude", "acq_date", "acq_time", "frp", "elevation"])?;
    for d in detections {
        w.write_record([
            d.latitude.to_string(),
            d.longitude.to_string(),
            d.acq_date.format("%Y-%m-%d").to_string(),
            format!("{:02}{:02}", d.acq_time / 60, d.acq_time % 60),
            d.frp.to_string(),
            d.elevation.map(|e| e.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("detections", e))
}

fn parse_hhmm(raw: &str) -> std::result::Result<u16, String> {
    let value: u16 = raw
        .parse()
        .map_err(|_| format!("`acq_time` is not an HHMM integer: {raw:?}"))?;
    let (hours, minutes) = (value / 100, value % 100);
    if hours >= 24 || minutes >= 60 {
        return Err(format!("`acq_time` out of range: {raw:?}"));
    }
    Ok(hours * 60 + minutes)
}

/// Elevation samples keyed by coordinates rounded to a fixed number of decimals.
#[derive(Debug, Clone, Default)]
pub struct ElevationLookup {
    decimals: i32,
    table: HashMap<(i64, i64), f64>,
}

impl ElevationLookup {
    pub fn new(decimals: i32) -> Self {
        Self {
            decimals,
            table: HashMap::new(),
        }
    }

    fn key(&self, lat: f64, lon: f64) -> (i64, i64) {
        let scale = 10f64.powi(self.decimals);
        ((lat * scale).round() as i64, (lon * scale).round() as i64)
    }

    pub fn insert(&mut self, lat: f64, lon: f64, elevation: f64) {
        let key = self.key(lat, lon);
        self.table.insert(key, elevation);
    }

    pub fn get(&self, lat: f64, lon: f64) -> Option<f64> {
        self.table.get(&self.key(lat, lon)).copied()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Reads `latitude,longitude,elevation` rows (header required).
    pub fn read<R: Read>(source: R, decimals: i32) -> Result<Self> {
        let mut lookup = Self::new(decimals);
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let line = row as u64 + 2;
            let value = |i: usize| -> Result<f64> {
                record
                    .get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or(Error::Row {
                        line,
                        message: format!("elevation lookup column {i} is not a number"),
                    })
            };
            lookup.insert(value(0)?, value(1)?, value(2)?);
        }
        Ok(lookup)
    }

    /// Fills absent elevations from the table; returns how many are still absent.
    pub fn fill(&self, detections: &mut [RawDetection]) -> usize {
        let mut missing = 0;
        for det in detections.iter_mut().filter(|d| d.elevation.is_none()) {
            det.elevation = self.get(det.latitude, det.longitude);
            if det.elevation.is_none() {
                missing += 1;
            }
        }
        missing
    }
}

pub fn filter_bbox(points: &[RawDetection], bbox: &BoundingBox) -> Vec<RawDetection> {
    points
        .iter()
        .filter(|p| bbox.contains(p.latitude, p.longitude))
        .cloned()
        .collect()
}

/// One-hot hour of day from minutes after midnight.
pub fn encode_hour(acq_time: u16) -> Result<[f64; HOUR_SLOTS]> {
    if acq_time >= 1440 {
        return Err(Error::OutOfRange {
            what: "acq_time",
            value: acq_time.to_string(),
        });
    }
    let mut out = [0.0; HOUR_SLOTS];
    out[usize::from(acq_time / 60)] = 1.0;
    Ok(out)
}

/// Zero-based week slot; day 358 onwards all land in the last slot.
pub fn week_index(date: NaiveDate) -> usize {
    ((date.ordinal0() / 7) as usize).min(WEEK_SLOTS - 1)
}

pub fn encode_week(date: NaiveDate) -> [f64; WEEK_SLOTS] {
    let mut out = [0.0; WEEK_SLOTS];
    out[week_index(date)] = 1.0;
    out
}

/// Calendar-date variant of [`encode_week`] that validates its components.
pub fn encode_week_ymd(year: i32, month: u32, day: u32) -> Result<[f64; WEEK_SLOTS]> {
    NaiveDate::from_ymd_opt(year, month, day)
        .map(encode_week)
        .ok_or_else(|| Error::InvalidDate(format!("{year:04}-{month:02}-{day:02}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn over(values: impl Iterator<Item = f64>) -> Self {
        values.fold(
            Range {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            },
            |r, v| Range {
                min: r.min.min(v),
                max: r.max.max(v),
            },
        )
    }

    /// Min-max scaling; a degenerate range maps everything to 0.
    pub fn scale(&self, x: f64) -> f64 {
        if self.max == self.min {
            0.0
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }
}

/// Per-feature ranges for the four continuous columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub latitude: Range,
    pub longitude: Range,
    pub frp: Range,
    pub elevation: Range,
}

/// Fits min/max over `points`. Absent elevations count as 0 m.
pub fn fit_normalizer(points: &[RawDetection]) -> Result<NormalizationStats> {
    if points.is_empty() {
        return Err(Error::Empty("cannot fit normalizer on zero detections"));
    }
    Ok(NormalizationStats {
        latitude: Range::over(points.iter().map(|p| p.latitude)),
        longitude: Range::over(points.iter().map(|p| p.longitude)),
        frp: Range::over(points.iter().map(|p| p.frp)),
        elevation: Range::over(points.iter().map(|p| p.elevation.unwrap_or(0.0))),
    })
}

/// A detection after encoding, plus the raw geometry the graph stage needs.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPoint {
    pub point_id: u64,
    /// Seconds since the Unix epoch (UTC).
    pub timestamp: i64,
    pub raw_lat: f64,
    pub raw_lon: f64,
    pub features: Vec<f64>,
}

impl EncodedPoint {
    pub fn hour_index(&self) -> Option<usize> {
        self.features[..HOUR_SLOTS].iter().position(|&v| v == 1.0)
    }

    pub fn week_index(&self) -> Option<usize> {
        self.features[HOUR_SLOTS..HOUR_SLOTS + WEEK_SLOTS]
            .iter()
            .position(|&v| v == 1.0)
    }
}

pub fn assemble_features(
    point: &RawDetection,
    stats: &NormalizationStats,
    point_id: u64,
) -> Result<EncodedPoint> {
    let mut features = Vec::with_capacity(FEATURE_DIM);
    features.extend_from_slice(&encode_hour(point.acq_time)?);
    features.extend_from_slice(&encode_week(point.acq_date));
    features.push(stats.latitude.scale(point.latitude));
    features.push(stats.longitude.scale(point.longitude));
    features.push(stats.frp.scale(point.frp));
    features.push(stats.elevation.scale(point.elevation.unwrap_or(0.0)));
    debug_assert_eq!(features.len(), FEATURE_DIM);
    Ok(EncodedPoint {
        point_id,
        timestamp: point.timestamp(),
        raw_lat: point.latitude,
        raw_lon: point.longitude,
        features,
    })
}

/// Fits on `points` and encodes them with ids `0..n` in input order.
pub fn encode_all(points: &[RawDetection]) -> Result<(NormalizationStats, Vec<EncodedPoint>)> {
    let stats = fit_normalizer(points)?;
    let encoded = points
        .iter()
        .enumerate()
        .map(|(i, p)| assemble_features(p, &stats, i as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok((stats, encoded))
}

/// Writes the intermediate point file: `point_id,timestamp,raw_lat,raw_lon,f0..f79`.
pub fn write_encoded<W: Write>(out: W, points: &[EncodedPoint]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec![
        "point_id".to_string(),
        "timestamp".to_string(),
        "raw_lat".to_string(),
        "raw_lon".to_string(),
    ];
    header.extend((0..FEATURE_DIM).map(|i| format!("f{i}")));
    writer.write_record(&header)?;
    for p in points {
        let mut row = vec![
            p.point_id.to_string(),
            p.timestamp.to_string(),
            p.raw_lat.to_string(),
            p.raw_lon.to_string(),
        ];
        row.extend(p.features.iter().map(f64::to_string));
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|e| Error::io("<encoded points>", e))?;
    Ok(())
}

pub fn read_encoded<R: BufRead>(source: R) -> Result<Vec<EncodedPoint>> {
    let mut reader = csv::Reader::from_reader(source);
    let mut points = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row as u64 + 2;
        let bad = |what: &str| Error::Row {
            line,
            message: format!("bad {what}"),
        };
        if record.len() != 4 + FEATURE_DIM {
            return Err(Error::Row {
                line,
                message: format!("expected {} fields, got {}", 4 + FEATURE_DIM, record.len()),
            });
        }
        let point_id = record[0].parse().map_err(|_| bad("point_id"))?;
        let timestamp = record[1].parse().map_err(|_| bad("timestamp"))?;
        let raw_lat = record[2].parse().map_err(|_| bad("raw_lat"))?;
        let raw_lon = record[3].parse().map_err(|_| bad("raw_lon"))?;
        let features = record
            .iter()
            .skip(4)
            .map(|s| s.parse::<f64>().map_err(|_| bad("feature")))
            .collect::<Result<Vec<_>>>()?;
        points.push(EncodedPoint {
            point_id,
            timestamp,
            raw_lat,
            raw_lon,
            features,
        });
    }
    Ok(points)
}

pub fn read_encoded_file(path: &Path) -> Result<Vec<EncodedPoint>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_encoded(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn det(lat: f64, lon: f64, frp: f64) -> RawDetection {
        RawDetection {
            latitude: lat,
            longitude: lon,
            acq_date: NaiveDate::from_ymd_opt(2013, 7, 15).unwrap(),
            acq_time: 825,
            frp,
            elevation: None,
        }
    }

    const HEADER: &str = "latitude,longitude,acq_date,acq_time,frp,elevation\n";

    #[test]
    fn parses_row_with_hhmm_time() {
        let src = format!("{HEADER}-28.5,24.1,2013-07-15,1345,12.3,1100\n");
        let out = parse_detections(src.as_bytes(), &ColumnMap::default(), ParseOptions::default())
            .unwrap();
        assert_eq!(out.detections.len(), 1);
        let d = &out.detections[0];
        assert_eq!(d.acq_time, 825);
        assert_eq!(d.latitude, -28.5);
        assert_eq!(d.elevation, Some(1100.0));
    }

    #[test]
    fn header_only_is_empty() {
        let out = parse_detections(HEADER.as_bytes(), &ColumnMap::default(), ParseOptions::default())
            .unwrap();
        assert!(out.detections.is_empty());
    }

    #[test]
    fn latitude_out_of_range_names_row() {
        let src = format!("{HEADER}-28.5,24.1,2013-07-15,1345,12.3,1100\n95.0,24.1,2013-07-15,1345,1,1\n");
        let err = parse_detections(src.as_bytes(), &ColumnMap::default(), ParseOptions::default())
            .unwrap_err();
        match err {
            Error::Row { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("latitude"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn skip_mode_keeps_good_rows() {
        let src = format!("{HEADER}abc,24.1,2013-07-15,1345,12.3,\n-28.5,24.1,2013-07-15,0005,1,\n");
        let opts = ParseOptions {
            mode: ParseMode::Skip,
            ..Default::default()
        };
        let out = parse_detections(src.as_bytes(), &ColumnMap::default(), opts).unwrap();
        assert_eq!(out.detections.len(), 1);
        assert_eq!(out.detections[0].acq_time, 5);
        assert_eq!(out.detections[0].elevation, None);
        assert_eq!(out.skipped.len(), 1);
    }

    #[test]
    fn missing_elevation_column_and_renamed_columns() {
        let src = "lat;lon;day;hhmm;power\n-28.5;24.1;2013-07-15;2359;3\n";
        let columns = ColumnMap {
            latitude: "lat".into(),
            longitude: "lon".into(),
            acq_date: "day".into(),
            acq_time: "hhmm".into(),
            frp: "power".into(),
            ..Default::default()
        };
        let opts = ParseOptions {
            delimiter: b';',
            ..Default::default()
        };
        let out = parse_detections(src.as_bytes(), &columns, opts).unwrap();
        assert_eq!(out.detections[0].acq_time, 1439);
        assert_eq!(out.detections[0].elevation, None);
    }

    #[test]
    fn missing_required_column() {
        let src = "latitude,longitude,acq_date,frp\n";
        let err = parse_detections(src.as_bytes(), &ColumnMap::default(), ParseOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "acq_time"));
    }

    #[test]
    fn bbox_filter() {
        let pts = vec![det(-29.0, 24.0, 1.0), det(10.0, 24.0, 1.0), det(-35.0, 16.0, 1.0)];
        let kept = filter_bbox(&pts, &BoundingBox::default());
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].latitude, -29.0);
        assert_eq!(kept[1].latitude, -35.0);
        assert!(BoundingBox::new(1.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn hour_encoding() {
        let hot = |t| encode_hour(t).unwrap().iter().position(|&v| v == 1.0).unwrap();
        assert_eq!(hot(0), 0);
        assert_eq!(hot(825), 13);
        assert_eq!(hot(1439), 23);
        assert!(encode_hour(1440).is_err());
    }

    #[test]
    fn week_encoding() {
        let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
        assert_eq!(week_index(d(2013, 1, 1)), 0);
        assert_eq!(week_index(d(2012, 12, 31)), 51);
        assert_eq!(week_index(d(2013, 2, 1)), 4);
        assert_eq!(encode_week(d(2013, 2, 1))[4], 1.0);
        assert!(encode_week_ymd(2013, 2, 30).is_err());
    }

    #[test]
    fn normalizer_fit() {
        assert!(fit_normalizer(&[]).is_err());
        let one = fit_normalizer(&[det(-29.0, 24.0, 3.0)]).unwrap();
        assert_eq!(one.frp.min, one.frp.max);
        assert_eq!(one.elevation.min, 0.0);
        let two = fit_normalizer(&[det(-29.0, 24.0, 5.0), det(-28.0, 25.0, 15.0)]).unwrap();
        assert_eq!(two.frp, Range { min: 5.0, max: 15.0 });
    }

    #[test]
    fn assembled_vector_layout() {
        let pts = vec![det(-29.0, 24.0, 5.0), det(-28.0, 25.0, 15.0)];
        let stats = fit_normalizer(&pts).unwrap();
        let e = assemble_features(&pts[1], &stats, 7).unwrap();
        assert_eq!(e.features.len(), 80);
        assert_eq!(e.features[78], 1.0);
        // all elevations absent -> degenerate range
        assert_eq!(e.features[79], 0.0);
        assert_eq!(e.hour_index(), Some(13));
        assert_eq!(e.week_index(), Some(week_index(pts[1].acq_date)));
        assert_eq!(e.point_id, 7);
        assert_eq!(e.timestamp, pts[1].timestamp());
    }

    #[test]
    fn outside_range_point_does_not_error() {
        let stats = fit_normalizer(&[det(-29.0, 24.0, 5.0), det(-28.0, 25.0, 15.0)]).unwrap();
        let e = assemble_features(&det(-27.0, 26.0, 30.0), &stats, 0).unwrap();
        assert!(e.features[78] > 1.0);
    }

    #[test]
    fn elevation_lookup_fills_absent() {
        let mut pts = vec![det(-29.0001, 24.0002, 1.0), det(-20.0, 20.0, 1.0)];
        let lookup =
            ElevationLookup::read("latitude,longitude,elevation\n-29.000,24.000,850\n".as_bytes(), 3)
                .unwrap();
        assert_eq!(lookup.fill(&mut pts), 1);
        assert_eq!(pts[0].elevation, Some(850.0));
    }

    #[test]
    fn encoded_file_round_trip() {
        let pts = vec![det(-29.0, 24.0, 5.0), det(-28.123456789, 25.0, 15.0)];
        let (_, enc) = encode_all(&pts).unwrap();
        let mut buf = Vec::new();
        write_encoded(&mut buf, &enc).unwrap();
        let back = read_encoded(buf.as_slice()).unwrap();
        assert_eq!(back, enc);
    }

    fn arb_detection() -> impl Strategy<Value = RawDetection> {
        (
            -35.0f64..-22.0,
            16.0f64..33.0,
            0u16..1440,
            1u32..=366,
            0.0f64..500.0,
            proptest::option::of(-100.0f64..3000.0),
        )
            .prop_map(|(lat, lon, t, doy, frp, elev)| RawDetection {
                latitude: lat,
                longitude: lon,
                acq_date: NaiveDate::from_yo_opt(2012, doy).unwrap(),
                acq_time: t,
                frp,
                elevation: elev,
            })
    }

    proptest! {
        #[test]
        fn encoding_invariants(pts in proptest::collection::vec(arb_detection(), 1..40)) {
            let (stats, enc) = encode_all(&pts).unwrap();
            for (raw, e) in pts.iter().zip(&enc) {
                prop_assert_eq!(e.features.len(), FEATURE_DIM);
                let ones = e.features[..76].iter().filter(|&&v| v == 1.0).count();
                let zeros = e.features[..76].iter().filter(|&&v| v == 0.0).count();
                prop_assert_eq!((ones, zeros), (2, 74));
                prop_assert!(e.features[76..].iter().all(|v| (0.0..=1.0).contains(v)));
                prop_assert_eq!(e.hour_index(), Some(usize::from(raw.acq_time / 60)));
                prop_assert_eq!(e.week_index(), Some(week_index(raw.acq_date)));
                let again = assemble_features(raw, &stats, e.point_id).unwrap();
                prop_assert_eq!(&again.features, &e.features);
            }
        }

        #[test]
        fn bbox_filter_idempotent(pts in proptest::collection::vec(arb_detection(), 0..40),
                                  lat0 in -40.0f64..-25.0, lon0 in 10.0f64..25.0) {
            let bbox = BoundingBox::new(lat0, lat0 + 8.0, lon0, lon0 + 9.0).unwrap();
            let once = filter_bbox(&pts, &bbox);
            prop_assert_eq!(filter_bbox(&once, &bbox), once);
        }
    }
}

//! Wildfire reconstruction: nearest neighbours, spatiotemporal filtering,
//! graph construction and connected components.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::LatLon;
use crate::ingest::EncodedPoint;
use crate::spatial::SphereTree;
use crate::unionfind::DisjointSet;

pub const DEFAULT_K: usize = 8;
/// VIIRS pixel size.
pub const DEFAULT_SPATIAL_RADIUS_M: f64 = 375.0;
/// Six hours.
pub const DEFAULT_TEMPORAL_RADIUS_S: i64 = 6 * 3600;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    pub k: usize,
    pub spatial_radius_m: f64,
    pub temporal_radius_s: i64,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            spatial_radius_m: DEFAULT_SPATIAL_RADIUS_M,
            temporal_radius_s: DEFAULT_TEMPORAL_RADIUS_S,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub point_id: u64,
    pub distance_m: f64,
    pub time_gap_s: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    pub center: u64,
    pub neighbors: Vec<Neighbor>,
}

/// For every point, its `k` nearest other points by great-circle distance
/// (ties to the smaller id). Output is aligned with `points`.
pub fn knn(points: &[EncodedPoint], k: usize) -> Result<Vec<NeighborSet>> {
    if points.len() < 2 {
        return Err(Error::TooFewSamples {
            need: 2,
            have: points.len(),
        });
    }
    let coords = points.iter().map(|p| LatLon::new(p.raw_lat, p.raw_lon)).collect();
    let ids = points.iter().map(|p| p.point_id).collect();
    let tree = SphereTree::new(coords, ids);
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, p)| NeighborSet {
            center: p.point_id,
            neighbors: tree
                .nearest_excluding(i, k)
                .into_iter()
                .map(|hit| {
                    let other = &points[hit.index];
                    Neighbor {
                        point_id: other.point_id,
                        distance_m: hit.distance_m,
                        time_gap_s: (other.timestamp - p.timestamp).abs(),
                    }
                })
                .collect(),
        })
        .collect())
}

/// Keeps neighbours within both radii (inclusive).
pub fn filter_neighbors(sets: &[NeighborSet], spatial_radius_m: f64, temporal_radius_s: i64) -> Vec<NeighborSet> {
    sets.iter()
        .map(|s| NeighborSet {
            center: s.center,
            neighbors: s
                .neighbors
                .iter()
                .filter(|n| n.distance_m <= spatial_radius_m && n.time_gap_s <= temporal_radius_s)
                .copied()
                .collect(),
        })
        .collect()
}

/// Undirected graph; edges are stored as `(smaller, larger)` id pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FireGraph {
    pub nodes: BTreeSet<u64>,
    pub edges: BTreeSet<(u64, u64)>,
}

impl FireGraph {
    pub fn has_edge(&self, a: u64, b: u64) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }
}

/// An edge joins two points when either lists the other.
pub fn build_graph(sets: &[NeighborSet]) -> FireGraph {
    let mut g = FireGraph::default();
    for s in sets {
        g.nodes.insert(s.center);
        for n in &s.neighbors {
            g.nodes.insert(n.point_id);
            if n.point_id != s.center {
                g.edges.insert((s.center.min(n.point_id), s.center.max(n.point_id)));
            }
        }
    }
    g
}

/// One connected component, chronologically ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct Wildfire {
    pub points: Vec<EncodedPoint>,
}

impl Wildfire {
    /// Sorts by (timestamp, raw_lat, raw_lon, point_id).
    pub fn new(mut points: Vec<EncodedPoint>) -> Self {
        points.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then(a.raw_lat.total_cmp(&b.raw_lat))
                .then(a.raw_lon.total_cmp(&b.raw_lon))
                .then(a.point_id.cmp(&b.point_id))
        });
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.points.iter().map(|p| p.point_id)
    }

    fn sort_key(&self) -> (i64, u64) {
        (
            self.points[0].timestamp,
            self.ids().min().expect("wildfires are never empty"),
        )
    }
}

pub fn extract_components(g: &FireGraph, points: &[EncodedPoint]) -> Result<Vec<Wildfire>> {
    let by_id: HashMap<u64, &EncodedPoint> = points.iter().map(|p| (p.point_id, p)).collect();
    let nodes: Vec<u64> = g.nodes.iter().copied().collect();
    let slot: HashMap<u64, usize> = nodes.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    for id in &nodes {
        if !by_id.contains_key(id) {
            return Err(Error::UnknownPoint(*id));
        }
    }
    let mut ds = DisjointSet::new(nodes.len());
    for &(a, b) in &g.edges {
        let (Some(&ia), Some(&ib)) = (slot.get(&a), slot.get(&b)) else {
            return Err(Error::UnknownPoint(if slot.contains_key(&a) { b } else { a }));
        };
        ds.union(ia, ib);
    }
    let mut fires: Vec<Wildfire> = ds
        .groups()
        .into_iter()
        .map(|members| Wildfire::new(members.into_iter().map(|i| by_id[&nodes[i]].clone()).collect()))
        .collect();
    fires.sort_by_key(Wildfire::sort_key);
    Ok(fires)
}

/// Full reconstruction from encoded points.
pub fn build_fires(points: &[EncodedPoint], params: &GraphParams) -> Result<Vec<Wildfire>> {
    match points.len() {
        0 => Ok(Vec::new()),
        1 => Ok(vec![Wildfire::new(points.to_vec())]),
        _ => {
            let sets = knn(points, params.k)?;
            let filtered = filter_neighbors(&sets, params.spatial_radius_m, params.temporal_radius_s);
            extract_components(&build_graph(&filtered), points)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_fires: usize,
    pub mean_len: f64,
    /// Population standard deviation.
    pub std_len: f64,
    pub min_len: usize,
    pub max_len: usize,
}

impl DatasetStats {
    /// Label/value rows in the order of the summary table.
    pub fn rows(&self) -> [(&'static str, String); 5] {
        [
            ("Number of Wildfires", self.n_fires.to_string()),
            ("Mean of Wildfire Length", format!("{:.6}", self.mean_len)),
            ("Standard Deviation of Wildfire Length", format!("{:.6}", self.std_len)),
            ("Shortest Wildfire Length", self.min_len.to_string()),
            ("Longest Wildfire Length", self.max_len.to_string()),
        ]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["statistic", "value"])?;
        for (label, value) in self.rows() {
            w.write_record([label, value.as_str()])?;
        }
        w.flush().map_err(|e| Error::io("<stats>", e))?;
        Ok(())
    }
}

pub fn compute_stats(fires: &[Wildfire]) -> Result<DatasetStats> {
    if fires.is_empty() {
        return Err(Error::Empty("no wildfires to summarize"));
    }
    let n = fires.len() as f64;
    let lens: Vec<usize> = fires.iter().map(Wildfire::len).collect();
    let mean = lens.iter().sum::<usize>() as f64 / n;
    let var = lens.iter().map(|&l| (l as f64 - mean).powi(2)).sum::<f64>() / n;
    Ok(DatasetStats {
        n_fires: fires.len(),
        mean_len: mean,
        std_len: var.sqrt(),
        min_len: *lens.iter().min().unwrap(),
        max_len: *lens.iter().max().unwrap(),
    })
}

/// One line per fire: `fire_id,length,id0,id1,...` in within-fire order.
pub fn write_fires<W: Write>(mut out: W, fires: &[Wildfire]) -> Result<()> {
    let io = |e| Error::io("<wildfires>", e);
    for (fire_id, fire) in fires.iter().enumerate() {
        write!(out, "{fire_id},{}", fire.len()).map_err(io)?;
        for id in fire.ids() {
            write!(out, ",{id}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads a fire file back into wildfires, resolving ids against `points`.
/// The stored order is kept as-is.
pub fn read_fires<R: BufRead>(source: R, points: &[EncodedPoint]) -> Result<Vec<Wildfire>> {
    let by_id: HashMap<u64, &EncodedPoint> = points.iter().map(|p| (p.point_id, p)).collect();
    let mut fires = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<wildfires>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = |message: String| Error::Row {
            line: i as u64 + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(row("expected fire_id, length and at least one point id".into()));
        }
        let length: usize = fields[1].parse().map_err(|_| row("bad length".into()))?;
        if fields.len() - 2 != length {
            return Err(row(format!("length {length} but {} ids", fields.len() - 2)));
        }
        let points = fields[2..]
            .iter()
            .map(|f| {
                let id: u64 = f.parse().map_err(|_| row(format!("bad point id {f:?}")))?;
                by_id.get(&id).map(|p| (*p).clone()).ok_or(Error::UnknownPoint(id))
            })
            .collect::<Result<Vec<_>>>()?;
        fires.push(Wildfire { points });
    }
    Ok(fires)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::FEATURE_DIM;

    pub(crate) fn pt(id: u64, lat: f64, lon: f64, t: i64) -> EncodedPoint {
        EncodedPoint {
            point_id: id,
            timestamp: t,
            raw_lat: lat,
            raw_lon: lon,
            features: vec![0.0; FEATURE_DIM],
        }
    }

    // 0.001 degrees of latitude is ~111 m
    const STEP: f64 = 0.001;

    #[test]
    fn knn_requires_two_points() {
        assert!(knn(&[pt(0, 0.0, 0.0, 0)], 8).is_err());
    }

    #[test]
    fn knn_fewer_candidates_than_k() {
        let pts = vec![pt(0, 0.0, 0.0, 0), pt(1, STEP, 0.0, 0), pt(2, 2.0 * STEP, 0.0, 0)];
        let sets = knn(&pts, 8).unwrap();
        for s in &sets {
            assert_eq!(s.neighbors.len(), 2);
            assert!(s.neighbors.iter().all(|n| n.point_id != s.center));
        }
        assert_eq!(sets[0].neighbors[0].point_id, 1);
    }

    #[test]
    fn filter_bounds_are_closed() {
        let set = NeighborSet {
            center: 0,
            neighbors: vec![
                Neighbor { point_id: 1, distance_m: 375.0, time_gap_s: 21_600 },
                Neighbor { point_id: 2, distance_m: 100.0, time_gap_s: 7 * 3600 },
                Neighbor { point_id: 3, distance_m: 400.0, time_gap_s: 3600 },
            ],
        };
        let kept = filter_neighbors(&[set], 375.0, 21_600);
        let ids: Vec<u64> = kept[0].neighbors.iter().map(|n| n.point_id).collect();
        assert_eq!(ids, vec![1]);
    }

    #[test]
    fn graph_edges_are_undirected_union() {
        let sets = vec![
            NeighborSet {
                center: 1,
                neighbors: vec![Neighbor { point_id: 2, distance_m: 1.0, time_gap_s: 0 }],
            },
            NeighborSet { center: 2, neighbors: vec![] },
            NeighborSet { center: 3, neighbors: vec![] },
        ];
        let g = build_graph(&sets);
        assert!(g.has_edge(2, 1));
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edges.len(), 1);
    }

    #[test]
    fn path_is_one_fire_and_isolated_points_are_separate() {
        let pts = vec![
            pt(0, 0.0, 0.0, 0),
            pt(1, STEP, 0.0, 600),
            pt(2, 2.0 * STEP, 0.0, 1200),
            pt(3, 1.0, 1.0, 0),
            pt(4, -1.0, 1.0, 0),
        ];
        let fires = build_fires(&pts, &GraphParams::default()).unwrap();
        let lens: Vec<usize> = fires.iter().map(Wildfire::len).collect();
        assert_eq!(lens, vec![3, 1, 1]);
        assert_eq!(fires[0].ids().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(fires[1].ids().collect::<Vec<_>>(), vec![3]);
    }

    #[test]
    fn time_gap_splits_fires() {
        let pts = vec![pt(0, 0.0, 0.0, 0), pt(1, STEP, 0.0, 7 * 3600)];
        let fires = build_fires(&pts, &GraphParams::default()).unwrap();
        assert_eq!(fires.len(), 2);
    }

    #[test]
    fn same_timestamp_ordered_by_latitude() {
        let pts = vec![pt(0, STEP, 0.0, 100), pt(1, 0.0, 0.0, 100)];
        let fires = build_fires(&pts, &GraphParams::default()).unwrap();
        assert_eq!(fires[0].ids().collect::<Vec<_>>(), vec![1, 0]);
    }

    #[test]
    fn unresolvable_node_errors() {
        let mut g = FireGraph::default();
        g.nodes.insert(9);
        assert!(matches!(extract_components(&g, &[]), Err(Error::UnknownPoint(9))));
    }

    #[test]
    fn stats_population_std() {
        let fire = |n: u64| Wildfire::new((0..n).map(|i| pt(i, 0.0, 0.0, 0)).collect());
        let s = compute_stats(&[fire(1), fire(1), fire(4)]).unwrap();
        assert_eq!((s.n_fires, s.min_len, s.max_len), (3, 1, 4));
        assert!((s.mean_len - 2.0).abs() < 1e-15);
        assert!((s.std_len - 2f64.sqrt()).abs() < 1e-15);
        let single = compute_stats(&[fire(5)]).unwrap();
        assert_eq!((single.mean_len, single.std_len), (5.0, 0.0));
        assert!(compute_stats(&[]).is_err());
    }

    #[test]
    fn fire_file_round_trip() {
        let pts = vec![pt(0, 0.0, 0.0, 0), pt(1, STEP, 0.0, 600), pt(2, 5.0, 0.0, 0)];
        let fires = build_fires(&pts, &GraphParams::default()).unwrap();
        let mut buf = Vec::new();
        write_fires(&mut buf, &fires).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "0,2,0,1\n1,1,2\n");
        assert_eq!(read_fires(buf.as_slice(), &pts).unwrap(), fires);
    }
}

//! Exact k-nearest-neighbour search under great-circle distance.
//!
//! Points are lifted to unit vectors and stored in a 3-d tree. Chord length is
//! monotone in arc length, so the tree prunes with a chord bound derived from
//! the current k-th best haversine distance (slightly inflated to absorb
//! rounding) while the final ranking uses haversine and point id directly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geo::{chord_for_distance, haversine_m, LatLon};

const LEAF_SIZE: usize = 12;
const PRUNE_SLACK: f64 = 1e-9;

#[derive(Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static index over a set of coordinates, keyed by their position in the input.
#[derive(Debug)]
pub struct SphereTree {
    coords: Vec<LatLon>,
    ids: Vec<u64>,
    xyz: Vec<[f64; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    bounds: Vec<([f64; 3], [f64; 3])>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// Position in the slice the tree was built from.
    pub index: usize,
    pub distance_m: f64,
}

#[derive(PartialEq)]
struct Ranked {
    distance_m: f64,
    id: u64,
    index: usize,
}

impl Eq for Ranked {}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance_m
            .total_cmp(&other.distance_m)
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl SphereTree {
    /// `ids` break distance ties (smaller wins).
    pub fn new(coords: Vec<LatLon>, ids: Vec<u64>) -> Self {
        assert_eq!(coords.len(), ids.len());
        let xyz: Vec<[f64; 3]> = coords.iter().map(|c| c.to_unit_vector()).collect();
        let mut tree = SphereTree {
            order: (0..coords.len()).collect(),
            coords,
            ids,
            xyz,
            nodes: Vec::new(),
            bounds: Vec::new(),
        };
        if !tree.coords.is_empty() {
            tree.build(0, tree.order.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.xyz[i][a]);
                hi[a] = hi[a].max(self.xyz[i][a]);
            }
        }
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        self.bounds.push((lo, hi));
        if end - start <= LEAF_SIZE {
            return slot;
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        if hi[axis] == lo[axis] {
            return slot;
        }
        let mid = start + (end - start) / 2;
        let xyz = &self.xyz;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&p, &q| xyz[p][axis].total_cmp(&xyz[q][axis]));
        let value = self.xyz[self.order[mid]][axis];
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[slot] = Node::Split { axis, value, left, right };
        slot
    }

    fn min_dist_sq(&self, node: usize, q: &[f64; 3]) -> f64 {
        let (lo, hi) = &self.bounds[node];
        (0..3)
            .map(|a| {
                let d = if q[a] < lo[a] {
                    lo[a] - q[a]
                } else if q[a] > hi[a] {
                    q[a] - hi[a]
                } else {
                    0.0
                };
                d * d
            })
            .sum()
    }

    /// The `k` points nearest to entry `query`, excluding itself, ordered by
    /// (distance, id).
    pub fn nearest_excluding(&self, query: usize, k: usize) -> Vec<Hit> {
        let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k + 1);
        if k == 0 || self.coords.len() < 2 {
            return Vec::new();
        }
        let q = self.xyz[query];
        let origin = self.coords[query];
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            if heap.len() == k {
                let worst = heap.peek().unwrap().distance_m;
                let bound = chord_for_distance(worst) * (1.0 + PRUNE_SLACK) + 1e-15;
                if self.min_dist_sq(node, &q) > bound * bound {
                    continue;
                }
            }
            match self.nodes[node] {
                Node::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        if i == query {
                            continue;
                        }
                        let cand = Ranked {
                            distance_m: haversine_m(origin, self.coords[i]),
                            id: self.ids[i],
                            index: i,
                        };
                        if heap.len() < k {
                            heap.push(cand);
                        } else if cand < *heap.peek().unwrap() {
                            heap.pop();
                            heap.push(cand);
                        }
                    }
                }
                Node::Split { axis, value, left, right } => {
                    // visit the nearer child first
                    if q[axis] < value {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        heap.into_sorted_vec()
            .into_iter()
            .map(|r| Hit {
                index: r.index,
                distance_m: r.distance_m,
            })
            .collect()
    }
}

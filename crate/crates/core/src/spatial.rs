//! Exact nearest-neighbour and fixed-radius queries.
//!
//! A kd-tree is used for ambient dimension up to [`KD_TREE_MAX_DIM`]; above
//! that the index scans all points. Both paths compute distances with
//! [`dist2`] so their results are bit-identical.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cloud::{dist2, PointCloud};

pub const KD_TREE_MAX_DIM: usize = 16;
const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

#[derive(Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

/// Immutable spatial index over a borrowed point cloud; shareable across threads.
#[derive(Debug)]
pub struct NeighborIndex<'a> {
    cloud: &'a PointCloud,
    perm: Vec<usize>,
    nodes: Vec<Node>,
    use_tree: bool,
}

impl<'a> NeighborIndex<'a> {
    pub fn new(cloud: &'a PointCloud) -> Self {
        Self::with_mode(cloud, cloud.dim() <= KD_TREE_MAX_DIM)
    }

    /// Always scans all points.
    pub fn brute_force(cloud: &'a PointCloud) -> Self {
        Self::with_mode(cloud, false)
    }

    fn with_mode(cloud: &'a PointCloud, use_tree: bool) -> Self {
        let mut index = Self {
            cloud,
            perm: (0..cloud.len()).collect(),
            nodes: Vec::new(),
            use_tree,
        };
        if use_tree && !cloud.is_empty() {
            index.build(0, cloud.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let dim = self.widest_dim(start, end);
        let mid = start + (end - start) / 2;
        let cloud = self.cloud;
        self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            cloud.point(a)[dim].total_cmp(&cloud.point(b)[dim])
        });
        let value = cloud.point(self.perm[mid])[dim];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    fn widest_dim(&self, start: usize, end: usize) -> usize {
        let d = self.cloud.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &i in &self.perm[start..end] {
            for (k, &v) in self.cloud.point(i).iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        (0..d)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0)
    }

    /// Squared distance from `query` to its `k`-th nearest indexed point,
    /// skipping index `exclude`. Duplicates count individually. Returns
    /// `None` when fewer than `k` points are available.
    pub fn kth_dist2(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Option<f64> {
        let found = self.knn(query, k, exclude);
        if found.len() < k {
            return None;
        }
        found.last().map(|&(d, _)| d)
    }

    /// The `k` nearest points as `(dist2, index)`, ascending.
    pub fn knn(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<(f64, usize)> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if self.use_tree && !self.nodes.is_empty() {
            self.knn_node(0, query, k, exclude, &mut heap);
        } else {
            for i in 0..self.cloud.len() {
                if Some(i) != exclude {
                    push_bounded(&mut heap, k, dist2(query, self.cloud.point(i)), i);
                }
            }
        }
        heap.into_sorted_vec()
            .into_iter()
            .map(|c| (c.dist2, c.index))
            .collect()
    }

    fn knn_node(
        &self,
        node: usize,
        query: &[f64],
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.perm[start..end] {
                    if Some(i) != exclude {
                        push_bounded(heap, k, dist2(query, self.cloud.point(i)), i);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = query[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_node(near, query, k, exclude, heap);
                let full = heap.len() >= k;
                let worst = heap.peek().map(|c| c.dist2).unwrap_or(f64::INFINITY);
                if !full || diff * diff <= worst {
                    self.knn_node(far, query, k, exclude, heap);
                }
            }
        }
    }

    /// All indices with squared distance strictly below `radius2`, ascending by index.
    pub fn within(&self, query: &[f64], radius2: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.use_tree && !self.nodes.is_empty() {
            self.within_node(0, query, radius2, &mut out);
            out.sort_unstable();
        } else {
            for i in 0..self.cloud.len() {
                if dist2(query, self.cloud.point(i)) < radius2 {
                    out.push(i);
                }
            }
        }
        out
    }

    fn within_node(&self, node: usize, query: &[f64], radius2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.perm[start..end] {
                    if dist2(query, self.cloud.point(i)) < radius2 {
                        out.push(i);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = query[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.within_node(near, query, radius2, out);
                if diff * diff < radius2 {
                    self.within_node(far, query, radius2, out);
                }
            }
        }
    }
}

fn push_bounded(heap: &mut BinaryHeap<Candidate>, k: usize, dist2: f64, index: usize) {
    let c = Candidate { dist2, index };
    if heap.len() < k {
        heap.push(c);
    } else if let Some(top) = heap.peek() {
        if c < *top {
            heap.pop();
            heap.push(c);
        }
    }
}

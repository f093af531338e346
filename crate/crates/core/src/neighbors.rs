//! Distance metrics and exact k-nearest-neighbour search.
//!
//! Two backends answer every query: a brute-force scan and a kd-tree.
//! Both rank candidates by `(key, index)` where `key` is the metric's
//! comparison key (squared distance for L2), so they return identical
//! neighbour sets, ties included.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::tabular::EncodedMatrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L1,
    L2,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        self.key_to_distance(self.key(a, b))
    }

    /// Monotone surrogate of the distance used for ranking. Summation runs
    /// in coordinate order so every caller gets bit-identical keys.
    #[inline]
    pub fn key(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| {
                    let d = x - y;
                    d * d
                })
                .sum(),
        }
    }

    #[inline]
    pub fn key_to_distance(self, key: f64) -> f64 {
        match self {
            Metric::L1 => key,
            Metric::L2 => key.sqrt(),
        }
    }

    /// Key contribution of a single coordinate gap; a lower bound on the
    /// key of any point whose gap along that axis is at least `gap`.
    #[inline]
    fn axis_key(self, gap: f64) -> f64 {
        match self {
            Metric::L1 => gap.abs(),
            Metric::L2 => gap * gap,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::L1 => "l1",
            Metric::L2 => "l2",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l1" => Ok(Metric::L1),
            "l2" => Ok(Metric::L2),
            other => Err(Error::invalid(format!("unknown metric '{other}' (expected l1 or l2)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    BruteForce,
    #[default]
    Accelerated,
}

const LEAF_SIZE: usize = 16;

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug)]
struct KdTree {
    nodes: Vec<Node>,
    /// Point indices, permuted so every leaf owns a contiguous range.
    order: Vec<usize>,
}

impl KdTree {
    fn build(points: &EncodedMatrix) -> Self {
        let mut tree = KdTree {
            nodes: Vec::new(),
            order: (0..points.nrows()).collect(),
        };
        if points.nrows() > 0 {
            tree.build_node(points, 0, points.nrows());
        }
        tree
    }

    fn build_node(&mut self, points: &EncodedMatrix, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }
        // split on the axis of widest spread
        let d = points.ncols();
        let mut best = (0, 0.0);
        for dim in 0..d {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[start..end] {
                let v = points.row(i)[dim];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best.1 {
                best = (dim, hi - lo);
            }
        }
        if best.1 == 0.0 {
            return id;
        }
        let dim = best.0;
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points.row(a)[dim].total_cmp(&points.row(b)[dim]).then(a.cmp(&b))
        });
        let value = points.row(self.order[mid])[dim];
        let left = self.build_node(points, start, mid);
        let right = self.build_node(points, mid, end);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    key: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key).then(self.index.cmp(&other.index))
    }
}

/// Exact nearest-neighbour index over one point set.
#[derive(Clone, Debug)]
pub struct SearchIndex {
    points: EncodedMatrix,
    metric: Metric,
    backend: Backend,
    tree: Option<KdTree>,
}

impl SearchIndex {
    pub fn build(points: EncodedMatrix, metric: Metric, backend: Backend) -> Self {
        let tree = match backend {
            Backend::Accelerated => Some(KdTree::build(&points)),
            Backend::BruteForce => None,
        };
        SearchIndex {
            points,
            metric,
            backend,
            tree,
        }
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn points(&self) -> &EncodedMatrix {
        &self.points
    }

    fn check_query(&self, query: &[f64]) -> Result<()> {
        if query.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: query.len(),
            });
        }
        Ok(())
    }

    /// The `k` closest points as `(index, distance)`, sorted by distance
    /// then index.
    pub fn knn(&self, query: &[f64], k: usize) -> Result<Vec<(usize, f64)>> {
        self.check_query(query)?;
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if k > self.len() {
            return Err(Error::KExceedsPool { k, pool: self.len() });
        }
        let mut found = match &self.tree {
            None => self.knn_brute(query, k),
            Some(tree) => {
                let mut heap = BinaryHeap::with_capacity(k + 1);
                self.knn_tree(tree, 0, query, k, &mut heap);
                heap.into_vec()
            }
        };
        found.sort_unstable();
        Ok(found
            .into_iter()
            .map(|c| (c.index, self.metric.key_to_distance(c.key)))
            .collect())
    }

    fn knn_brute(&self, query: &[f64], k: usize) -> Vec<Candidate> {
        let mut all: Vec<Candidate> = self
            .points
            .rows()
            .enumerate()
            .map(|(index, p)| Candidate {
                key: self.metric.key(query, p),
                index,
            })
            .collect();
        if k < all.len() {
            all.select_nth_unstable(k - 1);
            all.truncate(k);
        }
        all
    }

    fn knn_tree(&self, tree: &KdTree, node: usize, query: &[f64], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match tree.nodes[node] {
            Node::Leaf { start, end } => {
                for &index in &tree.order[start..end] {
                    let c = Candidate {
                        key: self.metric.key(query, self.points.row(index)),
                        index,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let gap = query[dim] - value;
                let (near, far) = if gap < 0.0 { (left, right) } else { (right, left) };
                self.knn_tree(tree, near, query, k, heap);
                // `<=` keeps equal-distance points reachable for index tie-breaks
                let bound = self.metric.axis_key(gap);
                if heap.len() < k || bound <= heap.peek().expect("heap is full").key {
                    self.knn_tree(tree, far, query, k, heap);
                }
            }
        }
    }

    /// Distance to the closest point.
    pub fn nearest_distance(&self, query: &[f64]) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptyInput("nearest neighbour of an empty set".into()));
        }
        Ok(self.knn(query, 1)?[0].1)
    }

    /// Number of points with distance `<= radius`.
    pub fn count_within(&self, query: &[f64], radius: f64) -> Result<usize> {
        self.check_query(query)?;
        Ok(match &self.tree {
            None => self
                .points
                .rows()
                .filter(|p| self.metric.distance(query, p) <= radius)
                .count(),
            Some(tree) if !tree.nodes.is_empty() => self.count_tree(tree, 0, query, radius),
            Some(_) => 0,
        })
    }

    fn count_tree(&self, tree: &KdTree, node: usize, query: &[f64], radius: f64) -> usize {
        match tree.nodes[node] {
            Node::Leaf { start, end } => tree.order[start..end]
                .iter()
                .filter(|&&i| self.metric.distance(query, self.points.row(i)) <= radius)
                .count(),
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let gap = query[dim] - value;
                let (near, far) = if gap < 0.0 { (left, right) } else { (right, left) };
                let mut n = self.count_tree(tree, near, query, radius);
                if self.metric.key_to_distance(self.metric.axis_key(gap)) <= radius {
                    n += self.count_tree(tree, far, query, radius);
                }
                n
            }
        }
    }
}

/// Which side of the pool a point came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolSource {
    Reference,
    Synthetic,
}

/// Neighbours of one query in a [`PooledIndex`].
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborSet {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
    pub count_reference: usize,
    pub count_synthetic: usize,
}

impl NeighborSet {
    pub fn k(&self) -> usize {
        self.indices.len()
    }
}

/// Reference points followed by synthetic points, searchable as one set.
#[derive(Clone, Debug)]
pub struct PooledIndex {
    index: SearchIndex,
    n_reference: usize,
}

impl PooledIndex {
    pub fn build(
        reference: &EncodedMatrix,
        synthetic: &EncodedMatrix,
        metric: Metric,
        backend: Backend,
    ) -> Result<Self> {
        if reference.ncols() != synthetic.ncols() {
            return Err(Error::Dimension {
                expected: reference.ncols(),
                actual: synthetic.ncols(),
            });
        }
        if reference.ncols() == 0 {
            return Err(Error::invalid("pooled points need at least one dimension"));
        }
        if reference.nrows() + synthetic.nrows() == 0 {
            return Err(Error::EmptyInput("pool has no points".into()));
        }
        let points = EncodedMatrix::vstack(&[reference, synthetic])?;
        Ok(PooledIndex {
            index: SearchIndex::build(points, metric, backend),
            n_reference: reference.nrows(),
        })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn n_reference(&self) -> usize {
        self.n_reference
    }

    pub fn n_synthetic(&self) -> usize {
        self.len() - self.n_reference
    }

    pub fn metric(&self) -> Metric {
        self.index.metric()
    }

    pub fn dim(&self) -> usize {
        self.index.dim()
    }

    pub fn source(&self, i: usize) -> PoolSource {
        if i < self.n_reference {
            PoolSource::Reference
        } else {
            PoolSource::Synthetic
        }
    }

    pub fn sources(&self) -> Vec<PoolSource> {
        (0..self.len()).map(|i| self.source(i)).collect()
    }

    pub fn knn(&self, query: &[f64], k: usize) -> Result<NeighborSet> {
        let found = self.index.knn(query, k)?;
        let count_reference = found.iter().filter(|(i, _)| *i < self.n_reference).count();
        let (indices, distances) = found.into_iter().unzip();
        Ok(NeighborSet {
            indices,
            distances,
            count_reference,
            count_synthetic: k - count_reference,
        })
    }

    /// [`knn`](Self::knn) for every row of `queries`, in row order.
    pub fn knn_batch(&self, queries: &EncodedMatrix, k: usize) -> Result<Vec<NeighborSet>> {
        (0..queries.nrows())
            .into_par_iter()
            .map(|i| self.knn(queries.row(i), k))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Role;

    fn m(xs: &[f64]) -> EncodedMatrix {
        EncodedMatrix::from_scalars(xs, Role::Unlabeled).unwrap()
    }

    #[test]
    fn pool_tags_and_order() {
        let r = EncodedMatrix::from_rows(&vec![vec![0.0, 0.0]; 3], 2, Role::Reference).unwrap();
        let s = EncodedMatrix::from_rows(&vec![vec![1.0, 1.0]; 5], 2, Role::Synthetic).unwrap();
        let pool = PooledIndex::build(&r, &s, Metric::L2, Backend::Accelerated).unwrap();
        assert_eq!(pool.len(), 8);
        let tags: Vec<_> = pool.sources();
        assert_eq!(&tags[..3], &[PoolSource::Reference; 3]);
        assert_eq!(&tags[3..], &[PoolSource::Synthetic; 5]);
    }

    #[test]
    fn empty_synthetic_pool() {
        let r = m(&[0.0, 1.0]);
        let s = EncodedMatrix::from_rows(&[], 1, Role::Synthetic).unwrap();
        let pool = PooledIndex::build(&r, &s, Metric::L2, Backend::Accelerated).unwrap();
        assert!(pool.sources().iter().all(|&t| t == PoolSource::Reference));
        assert_eq!(pool.knn(&[0.2], 2).unwrap().count_reference, 2);
    }

    #[test]
    fn dimension_mismatch() {
        let r = EncodedMatrix::from_rows(&[vec![0.0, 0.0]], 2, Role::Reference).unwrap();
        let s = EncodedMatrix::from_rows(&[vec![0.0, 0.0, 0.0]], 3, Role::Synthetic).unwrap();
        assert!(matches!(
            PooledIndex::build(&r, &s, Metric::L2, Backend::BruteForce),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn hand_checked_neighbours() {
        for backend in [Backend::BruteForce, Backend::Accelerated] {
            let pool = PooledIndex::build(&m(&[0.0]), &m(&[1.0, 2.0]), Metric::L2, backend).unwrap();
            let ns = pool.knn(&[0.9], 2).unwrap();
            assert_eq!(ns.indices, vec![1, 0]);
            assert_eq!((ns.count_reference, ns.count_synthetic), (1, 1));
        }
    }

    #[test]
    fn identical_point_is_neighbour() {
        let pool = PooledIndex::build(&m(&[3.0]), &m(&[5.0]), Metric::L1, Backend::Accelerated).unwrap();
        let ns = pool.knn(&[5.0], 1).unwrap();
        assert_eq!(ns.indices, vec![1]);
        assert_eq!(ns.distances, vec![0.0]);
    }

    #[test]
    fn k_errors() {
        let pool = PooledIndex::build(&m(&[0.0]), &m(&[1.0]), Metric::L2, Backend::Accelerated).unwrap();
        assert!(matches!(
            pool.knn(&[0.0], 3),
            Err(Error::KExceedsPool { k: 3, pool: 2 })
        ));
        assert!(pool.knn(&[0.0], 0).is_err());
        assert!(pool.knn(&[0.0, 1.0], 1).is_err());
    }

    #[test]
    fn ties_prefer_reference_block() {
        // all points at the same distance
        let r = m(&[1.0, -1.0]);
        let s = m(&[1.0, -1.0]);
        for backend in [Backend::BruteForce, Backend::Accelerated] {
            let pool = PooledIndex::build(&r, &s, Metric::L2, backend).unwrap();
            let ns = pool.knn(&[0.0], 2).unwrap();
            assert_eq!(ns.indices, vec![0, 1]);
            assert_eq!(ns.count_synthetic, 0);
        }
    }

    #[test]
    fn count_within_inclusive() {
        for backend in [Backend::BruteForce, Backend::Accelerated] {
            let idx = SearchIndex::build(m(&[0.0, 1.0, 2.0]), Metric::L2, backend);
            assert_eq!(idx.count_within(&[1.0], 1.0).unwrap(), 3);
            assert_eq!(idx.count_within(&[1.0], 0.5).unwrap(), 1);
        }
    }

    #[test]
    fn metric_parse_display() {
        assert_eq!("L2".parse::<Metric>().unwrap(), Metric::L2);
        assert_eq!(Metric::L1.to_string(), "l1");
        assert!("cosine".parse::<Metric>().is_err());
    }
}

//! Small static k-d tree over fixed-dimension points.
//!
//! Built once, queried many times. Supports exact Euclidean nearest
//! neighbour and fixed-radius enumeration; callers layer their own metric
//! on top by re-ranking the enumerated candidates.

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree<const D: usize> {
    points: Vec<[f64; D]>,
    /// Permutation of point ids; leaves own contiguous ranges of it.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

fn sq_dist<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl<const D: usize> KdTree<D> {
    pub fn build(points: Vec<[f64; D]>) -> Self {
        let mut tree = KdTree { order: (0..points.len()).collect(), points, nodes: Vec::new() };
        if !tree.points.is_empty() {
            let n = tree.points.len();
            tree.build_node(0, n);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, id: usize) -> &[f64; D] {
        &self.points[id]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // Split on the dimension of largest spread.
        let mut dim = 0;
        let mut best = f64::NEG_INFINITY;
        for d in 0..D {
            let (lo, hi) = self.order[start..end].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = self.points[i][d];
                (lo.min(v), hi.max(v))
            });
            if hi - lo > best {
                best = hi - lo;
                dim = d;
            }
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| points[a][dim].total_cmp(&points[b][dim]).then(a.cmp(&b)));
        let value = self.points[self.order[mid]][dim];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    /// Exact nearest point id and squared distance. Ties go to the smaller id.
    pub fn nearest(&self, query: &[f64; D]) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_in(0, query, &mut best);
        Some(best)
    }

    fn nearest_in(&self, node: usize, query: &[f64; D], best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = sq_dist(&self.points[i], query);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = query[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_in(near, query, best);
                if diff * diff <= best.1 {
                    self.nearest_in(far, query, best);
                }
            }
        }
    }

    /// Calls `visit` for every point within `radius` (inclusive) of `query`.
    pub fn for_each_within(&self, query: &[f64; D], radius: f64, mut visit: impl FnMut(usize)) {
        if self.points.is_empty() {
            return;
        }
        self.within_in(0, query, radius * radius, &mut visit);
    }

    fn within_in(&self, node: usize, query: &[f64; D], r2: f64, visit: &mut impl FnMut(usize)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if sq_dist(&self.points[i], query) <= r2 {
                        visit(i);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = query[dim] - value;
                if diff <= 0.0 || diff * diff <= r2 {
                    self.within_in(left, query, r2, visit);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.within_in(right, query, r2, visit);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> Vec<[f64; 4]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn empty_tree() {
        let t = KdTree::<4>::build(Vec::new());
        assert!(t.nearest(&[0.0; 4]).is_none());
        let mut hits = 0;
        t.for_each_within(&[0.0; 4], 10.0, |_| hits += 1);
        assert_eq!(hits, 0);
    }

    #[test]
    fn nearest_matches_scan() {
        let pts = cloud(300, 1);
        let t = KdTree::build(pts.clone());
        for q in cloud(200, 2) {
            let (id, d) = t.nearest(&q).unwrap();
            let scan = pts
                .iter()
                .enumerate()
                .map(|(i, p)| (i, sq_dist(p, &q)))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .unwrap();
            assert_eq!((id, d), scan);
        }
    }

    #[test]
    fn radius_matches_scan() {
        let pts = cloud(257, 3);
        let t = KdTree::build(pts.clone());
        for q in cloud(50, 4) {
            let mut got = Vec::new();
            t.for_each_within(&q, 0.7, |i| got.push(i));
            got.sort_unstable();
            let want: Vec<usize> = (0..pts.len()).filter(|&i| sq_dist(&pts[i], &q) <= 0.49).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn duplicate_points_tie_to_lowest_id() {
        let t = KdTree::build(vec![[1.0, 0.0, 0.0, 0.0]; 20]);
        assert_eq!(t.nearest(&[1.0, 0.0, 0.0, 0.0]).unwrap().0, 0);
    }
}

//! Expanded goal manifold `{Rz(φ) · R_g : φ ∈ Σ}` with exact nearest queries
//! under [`dist_r`].
//!
//! Entries are embedded as canonical quaternions in a k-d tree. The tree
//! only proposes candidates; every answer is re-ranked with the exact
//! roll/pitch/yaw distance. Two bounds make the pruning exact:
//!
//! * geodesic angle ≤ |Δroll| + |Δpitch| + |Δyaw| ≤ √3 · dist_r
//! * quaternion chord `min(|p - q|, |p + q|) = 2 sin(angle / 4) ≤ angle / 2`
//!
//! so any entry within `d` of a query under `dist_r` lies within chord
//! `√3/2 · d` of the query or its antipode.

use crate::error::Result;
use crate::kdtree::KdTree;
use crate::so3::{candidate_steps, Axis, Rot3, Rpy};

/// Relative and absolute slack applied to pruning radii.
const REL_SLACK: f64 = 1e-9;
const ABS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldEntry {
    pub phi: f64,
    pub rotation: Rot3,
}

/// Result of a nearest query: position in the schedule, offset and distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Closest {
    pub position: usize,
    pub phi: f64,
    pub dist: f64,
}

#[derive(Debug, Clone)]
pub struct GoalManifoldIndex {
    goal: Rot3,
    sigma: f64,
    entries: Vec<ManifoldEntry>,
    rpy: Vec<Rpy>,
    tree: KdTree<4>,
    /// Body-frame direction mapped onto hand z; constant along the manifold.
    tilt: [f64; 3],
}

fn neg4(q: [f64; 4]) -> [f64; 4] {
    [-q[0], -q[1], -q[2], -q[3]]
}

fn chord(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let (mut m, mut p) = (0.0, 0.0);
    for i in 0..4 {
        m += (a[i] - b[i]) * (a[i] - b[i]);
        p += (a[i] + b[i]) * (a[i] + b[i]);
    }
    m.min(p).sqrt()
}

/// Builds the index over `Rz(φ) · goal` for every φ of `candidate_steps(sigma)`.
pub fn build_goal_manifold(goal: Rot3, sigma: f64) -> Result<GoalManifoldIndex> {
    let schedule = candidate_steps(sigma)?;
    let entries: Vec<ManifoldEntry> = schedule
        .iter()
        .map(|phi| ManifoldEntry { phi, rotation: Rot3::about_axis_unchecked(Axis::Z, phi) * goal })
        .collect();
    let rpy = entries.iter().map(|e| e.rotation.rpy()).collect();
    let tree = KdTree::build(entries.iter().map(|e| e.rotation.quaternion()).collect());
    let m = goal.matrix();
    Ok(GoalManifoldIndex { goal, sigma, entries, rpy, tree, tilt: m[2] })
}

impl GoalManifoldIndex {
    pub fn goal(&self) -> Rot3 {
        self.goal
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn entries(&self) -> &[ManifoldEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Third row of the goal matrix: `R_gᵀ e_z`. Every entry shares it.
    pub fn tilt_axis(&self) -> [f64; 3] {
        self.tilt
    }

    /// Exact nearest entry under `dist_r`; ties go to the earliest schedule position.
    pub fn query_closest(&self, query: &Rot3) -> Closest {
        let q = query.quaternion();
        let rpy = query.rpy();
        let seed = self.nearest_chord(&q);
        let d0 = self.rpy[seed].wrapped_distance(&rpy);
        self.rerank(&q, &rpy, d0).expect("seed entry lies inside its own radius")
    }

    /// Same answer as `query_closest` when its distance is below `rho`,
    /// otherwise `None`. Prunes without re-ranking whenever a lower bound
    /// already rules out the whole manifold.
    pub fn query_within(&self, query: &Rot3, rho: f64) -> Option<Closest> {
        let q = query.quaternion();
        // sin(angle/4) ≤ angle/4 and angle ≤ √3 · dist: min dist ≥ 2·chord/√3.
        let seed = self.nearest_chord(&q);
        let c0 = chord(self.tree.point(seed), &q);
        if 2.0 * c0 / 3f64.sqrt() >= rho * (1.0 + REL_SLACK) + ABS_SLACK {
            return None;
        }
        let rpy = query.rpy();
        let d0 = self.rpy[seed].wrapped_distance(&rpy);
        self.rerank(&q, &rpy, d0.min(rho)).filter(|c| c.dist < rho)
    }

    fn nearest_chord(&self, q: &[f64; 4]) -> usize {
        let (a, da) = self.tree.nearest(q).expect("index is never empty");
        let (b, db) = self.tree.nearest(&neg4(*q)).expect("index is never empty");
        if db < da || (db == da && b < a) {
            b
        } else {
            a
        }
    }

    /// Exact argmin among entries with `dist_r ≤ bound`.
    fn rerank(&self, q: &[f64; 4], rpy: &Rpy, bound: f64) -> Option<Closest> {
        let radius = 0.5 * 3f64.sqrt() * bound * (1.0 + REL_SLACK) + ABS_SLACK;
        let mut best: Option<Closest> = None;
        let mut consider = |i: usize| {
            let d = self.rpy[i].wrapped_distance(rpy);
            let better = match best {
                None => true,
                Some(b) => d < b.dist || (d == b.dist && i < b.position),
            };
            if better {
                best = Some(Closest { position: i, phi: self.entries[i].phi, dist: d });
            }
        };
        self.tree.for_each_within(q, radius, &mut consider);
        self.tree.for_each_within(&neg4(*q), radius, &mut consider);
        best
    }

    /// Exhaustive scan; the correctness oracle for the tree path.
    pub fn query_closest_linear(&self, query: &Rot3) -> Closest {
        let rpy = query.rpy();
        let mut best = Closest { position: 0, phi: self.entries[0].phi, dist: f64::INFINITY };
        for (i, e) in self.rpy.iter().enumerate() {
            let d = e.wrapped_distance(&rpy);
            if d < best.dist {
                best = Closest { position: i, phi: self.entries[i].phi, dist: d };
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{dist_r, euler_zxz_decompose, rot_about_axis, wrap_angle};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const DEG: f64 = PI / 180.0;

    #[test]
    fn quarter_turn_schedule() {
        let idx = build_goal_manifold(Rot3::IDENTITY, PI / 2.0).unwrap();
        let phis: Vec<f64> = idx.entries().iter().map(|e| e.phi).collect();
        assert_eq!(phis, vec![0.0, PI / 2.0, -PI / 2.0, PI]);
    }

    #[test]
    fn zero_offset_entry_is_goal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Rot3::random(&mut rng);
        let idx = build_goal_manifold(g, 2.0 * DEG).unwrap();
        assert_eq!(idx.len(), 180);
        assert_eq!(idx.entries()[0].rotation, g);
    }

    #[test]
    fn invalid_sigma() {
        assert!(build_goal_manifold(Rot3::IDENTITY, 0.0).is_err());
        assert!(build_goal_manifold(Rot3::IDENTITY, 4.0).is_err());
    }

    #[test]
    fn entries_recover_their_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = Rot3::random(&mut rng);
        let idx = build_goal_manifold(g, 5.0 * DEG).unwrap();
        for e in idx.entries() {
            // rotation · g⁻¹ = Rz(φ): theta = 0, offset folded into the first angle.
            let z = euler_zxz_decompose(&(e.rotation * g.inverse()));
            assert!(z.theta < 1e-6);
            assert_abs_diff_eq!(wrap_angle(z.phi + z.psi - e.phi), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn exact_member_and_quarter_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = Rot3::random(&mut rng);
        let sigma = 2.0 * DEG;
        let idx = build_goal_manifold(g, sigma).unwrap();
        let c = idx.query_closest(&g);
        assert_eq!(c.phi, 0.0);
        assert!(c.dist < 1e-12);

        let q = rot_about_axis(Axis::Z, sigma / 4.0).unwrap() * g;
        let c = idx.query_closest(&q);
        assert_eq!(c.phi, 0.0);
        assert_abs_diff_eq!(c.dist, sigma / 4.0, epsilon = 1e-9);
    }

    #[test]
    fn tree_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for sigma in [0.5 * DEG, 2.0 * DEG, 5.0 * DEG] {
            let g = Rot3::random(&mut rng);
            let idx = build_goal_manifold(g, sigma).unwrap();
            for _ in 0..200 {
                let q = Rot3::random(&mut rng);
                let a = idx.query_closest(&q);
                let b = idx.query_closest_linear(&q);
                assert_eq!(a, b);
                assert_abs_diff_eq!(a.dist, dist_r(&idx.entries()[a.position].rotation, &q), epsilon = 1e-12);
                for rho in [0.05, 0.2, 1.0] {
                    let w = idx.query_within(&q, rho);
                    assert_eq!(w, (b.dist < rho).then_some(b));
                }
            }
        }
    }

    #[test]
    fn build_is_deterministic() {
        let g = Rot3::from_rpy(0.3, -0.2, 1.0);
        let a = build_goal_manifold(g, 1.0 * DEG).unwrap();
        let b = build_goal_manifold(g, 1.0 * DEG).unwrap();
        assert_eq!(a.entries(), b.entries());
    }
}

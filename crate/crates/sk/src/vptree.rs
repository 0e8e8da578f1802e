//! Vantage-point tree over gates under the phase-invariant Frobenius metric.

use qcomp_core::linalg::{phase_invariant_distance, UnitaryGate};

/// Slack on pruning comparisons so rounding in the triangle inequality cannot
/// discard the true nearest point.
const PRUNE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Node {
    point: usize,
    radius: f64,
    inner: Option<Box<Node>>,
    outer: Option<Box<Node>>,
}

#[derive(Debug, Clone)]
pub struct VpTree {
    root: Option<Box<Node>>,
}

impl VpTree {
    /// Builds over `points`; the vantage point of each subtree is its first
    /// index, so construction is deterministic.
    pub fn build(points: &[UnitaryGate]) -> Self {
        let mut idx: Vec<usize> = (0..points.len()).collect();
        Self {
            root: build_node(points, &mut idx),
        }
    }

    /// Index and distance of the nearest point; ties go to the smaller index.
    pub fn nearest(&self, points: &[UnitaryGate], query: &UnitaryGate) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        if let Some(root) = &self.root {
            search(root, points, query, &mut best);
        }
        best
    }
}

fn build_node(points: &[UnitaryGate], idx: &mut [usize]) -> Option<Box<Node>> {
    let (vp, rest) = idx.split_first_mut()?;
    let vp = *vp;
    if rest.is_empty() {
        return Some(Box::new(Node {
            point: vp,
            radius: 0.0,
            inner: None,
            outer: None,
        }));
    }
    let mut keyed: Vec<(f64, usize)> = rest
        .iter()
        .map(|&i| (phase_invariant_distance(&points[vp], &points[i]), i))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mid = keyed.len() / 2;
    let radius = keyed[mid].0;
    for (slot, (_, i)) in rest.iter_mut().zip(&keyed) {
        *slot = *i;
    }
    let (inner, outer) = rest.split_at_mut(mid + 1);
    Some(Box::new(Node {
        point: vp,
        radius,
        inner: build_node(points, inner),
        outer: build_node(points, outer),
    }))
}

fn better(cand: (usize, f64), best: Option<(usize, f64)>) -> bool {
    match best {
        None => true,
        Some((bi, bd)) => cand.1 < bd || (cand.1 == bd && cand.0 < bi),
    }
}

fn search(node: &Node, points: &[UnitaryGate], q: &UnitaryGate, best: &mut Option<(usize, f64)>) {
    let d = phase_invariant_distance(&points[node.point], q);
    if better((node.point, d), *best) {
        *best = Some((node.point, d));
    }
    let tau = |b: &Option<(usize, f64)>| b.map_or(f64::INFINITY, |x| x.1) + PRUNE_SLACK;
    let (first, second) = if d <= node.radius {
        (&node.inner, &node.outer)
    } else {
        (&node.outer, &node.inner)
    };
    if let Some(n) = first {
        search(n, points, q, best);
    }
    if let Some(n) = second {
        let t = tau(best);
        let reachable = if d <= node.radius {
            d + t >= node.radius
        } else {
            d - t <= node.radius
        };
        if reachable {
            search(n, points, q, best);
        }
    }
}

/// Exhaustive nearest point, the oracle for [`VpTree::nearest`].
pub fn linear_nearest(points: &[UnitaryGate], query: &UnitaryGate) -> Option<(usize, f64)> {
    let mut best = None;
    for (i, p) in points.iter().enumerate() {
        let d = phase_invariant_distance(p, query);
        if better((i, d), best) {
            best = Some((i, d));
        }
    }
    best
}

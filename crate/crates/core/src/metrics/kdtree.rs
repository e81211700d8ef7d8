use nalgebra::Vector3;

/// Static k-d tree over 3D points for nearest-neighbor queries.
pub struct KdTree {
    /// Point indices arranged so that each subtree occupies a contiguous
    /// slice; the splitting element sits at the median position.
    order: Vec<usize>,
    points: Vec<Vector3<f64>>,
}

impl KdTree {
    pub fn build(points: &[Vector3<f64>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let points = points.to_vec();
        build_recursive(&mut order, &points, 0);
        Self { order, points }
    }

    /// Index of the nearest stored point and its distance.
    pub fn nearest(&self, query: &Vector3<f64>) -> (usize, f64) {
        debug_assert!(!self.points.is_empty());
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, self.order.len(), 0, query, &mut best);
        (best.0, best.1.sqrt())
    }

    fn search(
        &self,
        lo: usize,
        hi: usize,
        axis: usize,
        query: &Vector3<f64>,
        best: &mut (usize, f64),
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = self.points[idx];
        let d2 = (p - query).norm_squared();
        if d2 < best.1 {
            *best = (idx, d2);
        }
        let delta = query[axis] - p[axis];
        let next_axis = (axis + 1) % 3;
        let (near, far) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, next_axis, query, best);
        if delta * delta < best.1 {
            self.search(far.0, far.1, next_axis, query, best);
        }
    }
}

fn build_recursive(order: &mut [usize], points: &[Vector3<f64>], axis: usize) {
    if order.len() <= 1 {
        return;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis]
            .partial_cmp(&points[b][axis])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let next = (axis + 1) % 3;
    let (left, rest) = order.split_at_mut(mid);
    build_recursive(left, points, next);
    build_recursive(&mut rest[1..], points, next);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_points(n: usize, seed: u64) -> Vec<Vector3<f64>> {
        let mut state = seed | 1;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        (0..n)
            .map(|_| Vector3::new(next(), next(), next()))
            .collect()
    }

    #[test]
    fn nearest_matches_brute_force() {
        let pts = pseudo_points(500, 3);
        let tree = KdTree::build(&pts);
        for q in pseudo_points(200, 17) {
            let (idx, dist) = tree.nearest(&q);
            let (bi, bd) = pts
                .iter()
                .enumerate()
                .map(|(i, p)| (i, (p - q).norm()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            assert!((dist - bd).abs() < 1e-12);
            // Ties can differ in index; distances must agree.
            let _ = (idx, bi);
        }
    }
}

use crate::error::{BenoError, Result};

use super::delaunay::Point;

/// Directed edges `(i, j)` from every node to its `k` nearest neighbors,
/// symmetrized by adding the reversed pairs. Distance ties go to the smaller
/// index. Output is sorted and duplicate-free.
pub fn knn_edges(points: &[Point], k: usize) -> Result<Vec<(usize, usize)>> {
    let n = points.len();
    if k >= n {
        return Err(BenoError::InvalidParameter(format!(
            "K = {k} must be smaller than the node count {n}"
        )));
    }
    let mut edges = Vec::with_capacity(2 * n * k);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for (i, p) in points.iter().enumerate() {
        cand.clear();
        cand.extend(points.iter().enumerate().filter(|&(j, _)| j != i).map(|(j, q)| {
            let dx = p[0] - q[0];
            let dy = p[1] - q[1];
            (dx * dx + dy * dy, j)
        }));
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k > 0 && k < cand.len() {
            cand.select_nth_unstable_by(k - 1, by_dist);
        }
        for &(_, j) in cand.iter().take(k) {
            edges.push((i, j));
            edges.push((j, i));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_ties_prefer_smaller_index() {
        let pts = [[1.0, 0.0], [0.0, 0.0], [2.0, 0.0]];
        let e = knn_edges(&pts, 1).unwrap();
        // node 0 is the middle one; 1 and 2 tie, 1 wins
        assert!(e.contains(&(0, 1)));
        assert_eq!(e, vec![(0, 1), (0, 2), (1, 0), (2, 0)]);
    }

    #[test]
    fn k_must_be_below_node_count() {
        let pts = [[0.0, 0.0], [1.0, 0.0]];
        assert!(matches!(knn_edges(&pts, 2), Err(BenoError::InvalidParameter(_))));
    }

    #[test]
    fn grid_degrees_reach_k() {
        let n = 32;
        let pts: Vec<Point> = (0..n * n).map(|k| [(k % n) as f64 / 32.0, (k / n) as f64 / 32.0]).collect();
        let e = knn_edges(&pts, 8).unwrap();
        let mut deg = vec![0usize; pts.len()];
        for &(i, _) in &e {
            deg[i] += 1;
        }
        assert!(deg.iter().all(|&d| d >= 8));
        for &(i, j) in &e {
            assert_ne!(i, j);
            assert!(e.binary_search(&(j, i)).is_ok());
        }
    }
}

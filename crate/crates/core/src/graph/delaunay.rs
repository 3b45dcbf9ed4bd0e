//! Incremental Bowyer-Watson triangulation with a co-circular tie-break pass.

use crate::error::{BenoError, Result};

pub type Point = [f64; 2];

/// Triangle as three point indices, counterclockwise.
pub type Triangle = [usize; 3];

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Positive when `d` lies strictly inside the circumcircle of the
/// counterclockwise triangle `abc`.
pub fn in_circle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
}

fn sorted_pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Delaunay triangulation of `points`.
///
/// Co-circular quadruples are resolved toward the diagonal whose sorted
/// endpoint-index pair is lexicographically smaller.
pub fn delaunay(points: &[Point]) -> Result<Vec<Triangle>> {
    let n = points.len();
    if n < 3 {
        return Err(BenoError::DegenerateGeometry(format!(
            "triangulation needs at least 3 points, got {n}"
        )));
    }
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in points {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(BenoError::DegenerateGeometry("non-finite point".into()));
        }
        min_x = min_x.min(p[0]);
        min_y = min_y.min(p[1]);
        max_x = max_x.max(p[0]);
        max_y = max_y.max(p[1]);
    }
    let span = (max_x - min_x).max(max_y - min_y);
    if span == 0.0 {
        return Err(BenoError::DegenerateGeometry("all points coincide".into()));
    }
    let eps = 1e-12 * span * span;
    let eps_circle = 1e-12 * span * span * span * span;
    let a = points[0];
    let far = points
        .iter()
        .cloned()
        .max_by(|p, q| {
            let dp = (p[0] - a[0]).abs() + (p[1] - a[1]).abs();
            let dq = (q[0] - a[0]).abs() + (q[1] - a[1]).abs();
            dp.total_cmp(&dq)
        })
        .unwrap_or(a);
    if points.iter().all(|&q| orient(a, far, q).abs() <= eps) {
        return Err(BenoError::DegenerateGeometry("points are collinear".into()));
    }

    let mut pts: Vec<Point> = points.to_vec();
    let cx = 0.5 * (min_x + max_x);
    let cy = 0.5 * (min_y + max_y);
    let big = 1e3 * span;
    pts.push([cx - 2.0 * big, cy - big]);
    pts.push([cx + 2.0 * big, cy - big]);
    pts.push([cx, cy + 2.0 * big]);
    let mut tris: Vec<Triangle> = vec![[n, n + 1, n + 2]];

    for (p_idx, &p) in points.iter().enumerate() {
        let mut bad = Vec::new();
        let mut keep = Vec::with_capacity(tris.len());
        for t in tris.drain(..) {
            if in_circle(pts[t[0]], pts[t[1]], pts[t[2]], p) > eps_circle {
                bad.push(t);
            } else {
                keep.push(t);
            }
        }
        if bad.is_empty() {
            return Err(BenoError::DegenerateGeometry(format!(
                "point {p_idx} duplicates an existing vertex"
            )));
        }
        // cavity boundary: directed edges of bad triangles whose twin is not bad
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for t in &bad {
            for k in 0..3 {
                edges.push((t[k], t[(k + 1) % 3]));
            }
        }
        for &(u, v) in &edges {
            if !edges.contains(&(v, u)) {
                keep.push([u, v, p_idx]);
            }
        }
        tris = keep;
    }
    tris.retain(|t| t.iter().all(|&v| v < n));
    flip_cocircular(points, &mut tris, eps_circle);
    for t in tris.iter_mut() {
        canonical_rotation(t);
    }
    tris.sort_unstable();
    Ok(tris)
}

fn canonical_rotation(t: &mut Triangle) {
    let k = (0..3).min_by_key(|&k| t[k]).unwrap_or(0);
    t.rotate_left(k);
}

/// Edge flips that restore the tie-break rule (and any residual strict
/// Delaunay violation) on quads formed by two adjacent triangles.
fn flip_cocircular(points: &[Point], tris: &mut [Triangle], eps_circle: f64) {
    use std::collections::HashMap;

    for _ in 0..64 {
        let mut edge_owner: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for (ti, t) in tris.iter().enumerate() {
            for k in 0..3 {
                edge_owner.insert((t[k], t[(k + 1) % 3]), (ti, k));
            }
        }
        let mut keys: Vec<(usize, usize)> = edge_owner.keys().cloned().filter(|(a, b)| a < b).collect();
        keys.sort_unstable();
        let mut touched = vec![false; tris.len()];
        let mut flipped = false;
        for (a, b) in keys {
            let (Some(&(t1, k1)), Some(&(t2, k2))) = (edge_owner.get(&(a, b)), edge_owner.get(&(b, a))) else {
                continue;
            };
            if touched[t1] || touched[t2] {
                continue;
            }
            let c = tris[t1][(k1 + 2) % 3];
            let d = tris[t2][(k2 + 2) % 3];
            // t1 = (a, b, c) ccw, t2 = (b, a, d) ccw
            let (pa, pb, pc, pd) = (points[a], points[b], points[c], points[d]);
            let convex = orient(pc, pd, pb) > 0.0 && orient(pd, pc, pa) > 0.0;
            if !convex {
                continue;
            }
            let det = in_circle(pa, pb, pc, pd);
            let flip = if det > eps_circle {
                true
            } else if det >= -eps_circle {
                sorted_pair(c, d) < sorted_pair(a, b)
            } else {
                false
            };
            if flip {
                tris[t1] = [c, d, b];
                tris[t2] = [d, c, a];
                touched[t1] = true;
                touched[t2] = true;
                flipped = true;
            }
        }
        if !flipped {
            break;
        }
    }
}

/// Undirected edges `(min, max)` of a triangle list, sorted and deduplicated.
pub fn triangle_edges(tris: &[Triangle]) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = tris
        .iter()
        .flat_map(|t| (0..3).map(move |k| sorted_pair(t[k], t[(k + 1) % 3])))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn circumcircle(a: Point, b: Point, c: Point) -> (Point, f64) {
        let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
        let a2 = a[0] * a[0] + a[1] * a[1];
        let b2 = b[0] * b[0] + b[1] * b[1];
        let c2 = c[0] * c[0] + c[1] * c[1];
        let ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d;
        let uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d;
        let r = ((a[0] - ux).powi(2) + (a[1] - uy).powi(2)).sqrt();
        ([ux, uy], r)
    }

    /// Brute force: no point strictly inside any circumcircle.
    fn assert_empty_circles(points: &[Point], tris: &[Triangle], margin: f64) {
        for t in tris {
            let (c, r) = circumcircle(points[t[0]], points[t[1]], points[t[2]]);
            for (k, p) in points.iter().enumerate() {
                if t.contains(&k) {
                    continue;
                }
                let dist = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt();
                assert!(dist >= r - margin, "point {k} inside circle of {t:?}");
            }
        }
    }

    #[test]
    fn single_triangle() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.2, 0.9]];
        let tris = delaunay(&pts).unwrap();
        assert_eq!(tris.len(), 1);
        assert_eq!(triangle_edges(&tris).len(), 3);
    }

    #[test]
    fn square_corners_use_tie_break_diagonal() {
        // 0 (0,0), 1 (1,0), 2 (0,1), 3 (1,1): diagonals (0,3) and (1,2)
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let tris = delaunay(&pts).unwrap();
        assert_eq!(tris.len(), 2);
        let edges = triangle_edges(&tris);
        assert_eq!(edges.len(), 5);
        assert!(edges.contains(&(0, 3)));
        assert!(!edges.contains(&(1, 2)));
        // both diagonals are valid Delaunay choices
        assert_empty_circles(&pts, &tris, 1e-12);
        let other = vec![[1, 2, 0], [1, 3, 2]];
        assert_empty_circles(&pts, &other, 1e-12);

        // relabel so that the other diagonal carries the smaller pair
        let pts = [[1.0, 0.0], [0.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let edges = triangle_edges(&delaunay(&pts).unwrap());
        assert!(edges.contains(&(0, 3)));
    }

    #[test]
    fn random_points_satisfy_empty_circumcircle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let pts: Vec<Point> = (0..100).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
        let tris = delaunay(&pts).unwrap();
        assert_empty_circles(&pts, &tris, 1e-12);
        // Euler: T = 2n - 2 - hull
        assert!(tris.len() > 150);
        for t in &tris {
            assert!(orient(pts[t[0]], pts[t[1]], pts[t[2]]) > 0.0);
        }
    }

    #[test]
    fn grid_triangulation_is_complete() {
        let n = 6;
        let pts: Vec<Point> = (0..n * n).map(|k| [(k % n) as f64, (k / n) as f64]).collect();
        let tris = delaunay(&pts).unwrap();
        assert_eq!(tris.len(), 2 * (n - 1) * (n - 1));
        assert_empty_circles(&pts, &tris, 1e-9);
        let edges = triangle_edges(&tris);
        // each cell contributes the (bottom-left, top-right) diagonal
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                assert!(edges.contains(&(j * n + i, (j + 1) * n + i + 1)));
            }
        }
    }

    #[test]
    fn collinear_points_are_rejected() {
        let pts = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        assert!(matches!(delaunay(&pts), Err(BenoError::DegenerateGeometry(_))));
        assert!(delaunay(&pts[..2]).is_err());
    }
}

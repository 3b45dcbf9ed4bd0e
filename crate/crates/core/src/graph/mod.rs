//! PDE graph over the interior cells: Delaunay mesh edges united with
//! K-nearest-neighbor edges, plus the per-node, per-edge and boundary
//! feature tables consumed by the model.

pub mod delaunay;
pub mod knn;

use std::cmp::Ordering;

use crate::domain::interior_boundary_distances;
use crate::error::Result;
use crate::fvm::SolutionSample;

pub use delaunay::{delaunay, triangle_edges, Point, Triangle};
pub use knn::knn_edges;

pub const DEFAULT_K: usize = 8;

pub const NODE_FEATURES: usize = 5;
pub const EDGE_FEATURES: usize = 3;
pub const BOUNDARY_FEATURES: usize = 4;

/// Column of the source term in the node features.
pub const NODE_F_COLUMN: usize = 2;
/// Column of the boundary value in the boundary features.
pub const BOUNDARY_G_COLUMN: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct PdeGraph {
    pub node_coords: Vec<Point>,
    /// `[x, y, f, dx, dy]`
    pub node_features: Vec<[f64; NODE_FEATURES]>,
    /// Directed `(i, j)`: the message from `j` into `i`. Grouped by `i`,
    /// each group ordered by the displacement `p_j − p_i`.
    pub edges: Vec<(usize, usize)>,
    /// `[Δx, Δy, ‖Δ‖]` with `Δ = p_i − p_j`.
    pub edge_features: Vec<[f64; EDGE_FEATURES]>,
    /// `[x, y, g, dc]` per boundary interface, in arc-length order.
    pub boundary_sequence: Vec<[f64; BOUNDARY_FEATURES]>,
}

impl PdeGraph {
    pub fn node_count(&self) -> usize {
        self.node_coords.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Applies a node relabeling: node `k` of the result is node `perm[k]`
    /// of `self`. Edge order is re-canonicalized.
    pub fn permuted(&self, perm: &[usize]) -> PdeGraph {
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let node_coords: Vec<Point> = perm.iter().map(|&o| self.node_coords[o]).collect();
        let node_features = perm.iter().map(|&o| self.node_features[o]).collect();
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(i, j)| (inverse[i], inverse[j]))
            .collect();
        let (edges, edge_features) = canonical_edges(&node_coords, edges);
        PdeGraph {
            node_coords,
            node_features,
            edges,
            edge_features,
            boundary_sequence: self.boundary_sequence.clone(),
        }
    }
}

/// The two dual-branch copies of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchInputs {
    /// Boundary values zeroed: carries the source-term response.
    pub interior: PdeGraph,
    /// Source term zeroed: carries the boundary-value response.
    pub boundary: PdeGraph,
}

impl BranchInputs {
    pub fn from_graph(graph: &PdeGraph) -> BranchInputs {
        let mut interior = graph.clone();
        for row in interior.boundary_sequence.iter_mut() {
            row[BOUNDARY_G_COLUMN] = 0.0;
        }
        let mut boundary = graph.clone();
        for row in boundary.node_features.iter_mut() {
            row[NODE_F_COLUMN] = 0.0;
        }
        BranchInputs { interior, boundary }
    }
}

/// Undirected Delaunay edges of the point set, as `(min, max)` pairs.
pub fn mesh_edges(points: &[Point]) -> Result<Vec<(usize, usize)>> {
    Ok(triangle_edges(&delaunay(points)?))
}

/// `E_mesh ∪ E_kn`, both directions of every edge, in canonical order.
pub fn union_edges(points: &[Point], k: usize) -> Result<Vec<(usize, usize)>> {
    let mut edges: Vec<(usize, usize)> = mesh_edges(points)?
        .into_iter()
        .flat_map(|(a, b)| [(a, b), (b, a)])
        .collect();
    edges.extend(knn_edges(points, k)?);
    edges.sort_unstable();
    edges.dedup();
    Ok(canonical_edges(points, edges).0)
}

fn displacement_order(points: &[Point], a: (usize, usize), b: (usize, usize)) -> Ordering {
    a.0.cmp(&b.0).then_with(|| {
        let da = [points[a.1][0] - points[a.0][0], points[a.1][1] - points[a.0][1]];
        let db = [points[b.1][0] - points[b.0][0], points[b.1][1] - points[b.0][1]];
        da[0].total_cmp(&db[0]).then(da[1].total_cmp(&db[1]))
    })
}

/// Orders edges by target node, then by neighbor displacement (a label-free
/// key, so neighbor sums are invariant under relabeling), and computes the
/// edge features.
fn canonical_edges(points: &[Point], mut edges: Vec<(usize, usize)>) -> (Vec<(usize, usize)>, Vec<[f64; EDGE_FEATURES]>) {
    edges.sort_by(|&a, &b| displacement_order(points, a, b));
    let feats = edges
        .iter()
        .map(|&(i, j)| {
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            [dx, dy, (dx * dx + dy * dy).sqrt()]
        })
        .collect();
    (edges, feats)
}

/// Graph over the interior cells of `sample`; the boundary enters only
/// through `boundary_sequence`.
pub fn build_graph(sample: &SolutionSample, k: usize) -> Result<(PdeGraph, BranchInputs)> {
    let domain = &sample.domain;
    let points: Vec<Point> = domain.centers.clone();
    let edges = union_edges(&points, k)?;
    let (edges, edge_features) = canonical_edges(&points, edges);
    let dist = interior_boundary_distances(domain);
    let node_features = points
        .iter()
        .enumerate()
        .map(|(i, p)| [p[0], p[1], sample.f.values[i], dist.dx[i], dist.dy[i]])
        .collect();
    let boundary_sequence = domain
        .boundary
        .interfaces
        .iter()
        .zip(&domain.boundary.g)
        .zip(&dist.dc)
        .map(|((face, &g), &dc)| [face.mid[0], face.mid[1], g, dc])
        .collect();
    let graph = PdeGraph {
        node_coords: points,
        node_features,
        edges,
        edge_features,
        boundary_sequence,
    };
    let branches = BranchInputs::from_graph(&graph);
    Ok((graph, branches))
}

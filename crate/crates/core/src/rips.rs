//! Vietoris–Rips persistence in dimensions 0 and 1 for Euclidean point clouds.
//!
//! Edges enter at their length and triangles at their longest edge; ties are
//! broken lexicographically on vertex indices. Dimension 0 is Kruskal's
//! algorithm; dimension 1 reduces the edge–triangle boundary matrix over Z/2.

use std::cmp::Ordering;

use crate::diagram::{Cell, PersistenceDiagram, PersistencePoint};
use crate::error::{Error, Result};
use crate::union_find::DisjointSet;

/// `len` points of equal dimension stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} coordinates do not split into points of dimension {dim}",
                data.len()
            )));
        }
        if data.len() / dim < 2 {
            return Err(Error::invalid("a point cloud needs at least 2 points"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("point cloud contains non-finite coordinates"));
        }
        Ok(PointCloud { dim, data })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("points have differing dimensions"));
        }
        Self::new(dim, points.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Symmetric matrix of pairwise Euclidean distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

pub fn pairwise_distances(cloud: &PointCloud) -> DistanceMatrix {
    let n = cloud.len();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = cloud
                .point(i)
                .iter()
                .zip(cloud.point(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    DistanceMatrix { n, data }
}

/// Default filtration cap: the diameter, so the complex ends as a full
/// simplex and every 1-cycle dies.
pub fn default_eps_max(dist: &DistanceMatrix) -> f64 {
    dist.diameter()
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    len: f64,
    u: usize,
    v: usize,
}

fn sorted_edges(dist: &DistanceMatrix, eps_max: f64) -> Vec<Edge> {
    let n = dist.len();
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in (u + 1)..n {
            let len = dist.get(u, v);
            if len <= eps_max {
                edges.push(Edge { len, u, v });
            }
        }
    }
    edges.sort_by(|a, b| {
        a.len
            .partial_cmp(&b.len)
            .unwrap_or(Ordering::Equal)
            .then((a.u, a.v).cmp(&(b.u, b.v)))
    });
    edges
}

/// Rips persistence diagram in dimensions `0..=max_dim`.
///
/// Births in dimension 0 are all zero; surviving components are reported
/// as essential points with death `eps_max` and a [`Cell::Cap`] death cell.
/// One-cycles still alive at `eps_max` are capped the same way.
pub fn rips_diagram(dist: &DistanceMatrix, max_dim: usize, eps_max: f64) -> Result<PersistenceDiagram> {
    if !(eps_max > 0.0) || !eps_max.is_finite() {
        return Err(Error::invalid(format!("eps_max must be positive and finite, got {eps_max}")));
    }
    if max_dim > 1 {
        return Err(Error::invalid(format!("max_dim must be 0 or 1, got {max_dim}")));
    }
    let n = dist.len();
    let edges = sorted_edges(dist, eps_max);
    let mut points = Vec::new();

    let mut ds = DisjointSet::new(n);
    // Smallest vertex index of each component; the smaller index survives.
    let mut label: Vec<usize> = (0..n).collect();
    let mut negative = vec![false; edges.len()];
    for (idx, e) in edges.iter().enumerate() {
        let (ru, rv) = (ds.find(e.u), ds.find(e.v));
        if ru == rv {
            continue;
        }
        negative[idx] = true;
        let (keep, dying) = if label[ru] < label[rv] { (label[ru], label[rv]) } else { (label[rv], label[ru]) };
        if e.len > 0.0 {
            points.push(PersistencePoint {
                dim: 0,
                birth: 0.0,
                death: e.len,
                essential: false,
                birth_cell: Cell::Vertex(dying),
                death_cell: Cell::Edge(e.u, e.v),
            });
        }
        let root = ds.union(ru, rv);
        label[root] = keep;
    }
    let mut survivors: Vec<usize> = (0..n).filter(|&v| ds.find(v) == v).map(|r| label[r]).collect();
    survivors.sort_unstable();
    for v in survivors {
        points.push(PersistencePoint {
            dim: 0,
            birth: 0.0,
            death: eps_max,
            essential: true,
            birth_cell: Cell::Vertex(v),
            death_cell: Cell::Cap,
        });
    }

    if max_dim >= 1 {
        points.extend(one_cycles(dist, &edges, &negative, eps_max));
    }
    Ok(PersistenceDiagram::new(points))
}

fn one_cycles(dist: &DistanceMatrix, edges: &[Edge], negative: &[bool], eps_max: f64) -> Vec<PersistencePoint> {
    let n = dist.len();
    let mut edge_rank = vec![usize::MAX; n * n];
    for (idx, e) in edges.iter().enumerate() {
        edge_rank[e.u * n + e.v] = idx;
        edge_rank[e.v * n + e.u] = idx;
    }
    let positive_total = negative.iter().filter(|&&neg| !neg).count();
    if positive_total == 0 {
        return Vec::new();
    }

    // Triangles as (value, boundary edge ranks ascending, vertices).
    let mut triangles: Vec<(f64, [usize; 3], [usize; 3])> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let eij = edge_rank[i * n + j];
            if eij == usize::MAX {
                continue;
            }
            for k in (j + 1)..n {
                let (eik, ejk) = (edge_rank[i * n + k], edge_rank[j * n + k]);
                if eik == usize::MAX || ejk == usize::MAX {
                    continue;
                }
                let mut faces = [eij, eik, ejk];
                faces.sort_unstable();
                triangles.push((edges[faces[2]].len, faces, [i, j, k]));
            }
        }
    }
    // Value first, then the entering (longest) edge, then vertex order.
    triangles.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1[2].cmp(&b.1[2]))
            .then(a.2.cmp(&b.2))
    });

    let mut pivot_owner: Vec<Option<usize>> = vec![None; edges.len()];
    let mut reduced: Vec<Vec<usize>> = Vec::with_capacity(triangles.len());
    let mut paired = 0;
    let mut points = Vec::new();
    for (value, faces, _) in &triangles {
        if paired == positive_total {
            break;
        }
        let mut col: Vec<usize> = faces.to_vec();
        while let Some(&pivot) = col.last() {
            match pivot_owner[pivot] {
                Some(other) => col = symmetric_difference(&col, &reduced[other]),
                None => break,
            }
        }
        if let Some(&pivot) = col.last() {
            pivot_owner[pivot] = Some(reduced.len());
            paired += 1;
            let birth = edges[pivot];
            let killer = edges[faces[2]];
            if *value > birth.len {
                points.push(PersistencePoint {
                    dim: 1,
                    birth: birth.len,
                    death: *value,
                    essential: false,
                    birth_cell: Cell::Edge(birth.u, birth.v),
                    death_cell: Cell::Edge(killer.u, killer.v),
                });
            }
        }
        reduced.push(col);
    }

    for (idx, e) in edges.iter().enumerate() {
        if !negative[idx] && pivot_owner[idx].is_none() && e.len < eps_max {
            points.push(PersistencePoint {
                dim: 1,
                birth: e.len,
                death: eps_max,
                essential: true,
                birth_cell: Cell::Edge(e.u, e.v),
                death_cell: Cell::Cap,
            });
        }
    }
    points
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

//! Image-domain and latent-space topological losses with gradients.
//!
//! Both losses sum the 2-Wasserstein distances of the dimension-0 and
//! dimension-1 diagrams. Gradients flow from diagram coordinates back to the
//! generator cells: pixels for cubical diagrams, edge endpoints for Rips
//! diagrams.

use crate::cubical::cubical_diagram;
use crate::diagram::{Cell, PersistenceDiagram};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rips::{pairwise_distances, rips_diagram, DistanceMatrix, PointCloud};
use crate::wasserstein::{wasserstein, wasserstein_grad, DiagramGradient};

/// Wasserstein order used by both losses.
pub const LOSS_ORDER: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TopoLossResult {
    pub value: f64,
    /// Distances in dimension 0 and dimension 1.
    pub per_dim: [f64; 2],
    /// Gradient with respect to the reconstructed image, row-major.
    pub grad: Vec<f64>,
}

/// `Σ_m W2(D_m(x), D_m(xhat))`, differentiated with respect to `xhat`.
pub fn image_topo_loss(x: &Image, xhat: &Image) -> Result<TopoLossResult> {
    let dx = cubical_diagram(x, 1)?;
    image_topo_loss_against(&dx, x.height(), x.width(), xhat)
}

/// Same as [`image_topo_loss`] with the reference diagram precomputed.
pub fn image_topo_loss_against(
    reference: &PersistenceDiagram,
    height: usize,
    width: usize,
    xhat: &Image,
) -> Result<TopoLossResult> {
    if (xhat.height(), xhat.width()) != (height, width) {
        return Err(Error::invalid(format!(
            "image shapes differ: {height}x{width} vs {}x{}",
            xhat.height(),
            xhat.width()
        )));
    }
    let dxh = cubical_diagram(xhat, 1)?;
    let mut grad = vec![0.0; xhat.len()];
    let mut per_dim = [0.0; 2];
    for (dim, slot) in per_dim.iter_mut().enumerate() {
        let (a, b) = (reference.of_dim(dim), dxh.of_dim(dim));
        let m = wasserstein(&a, &b, LOSS_ORDER)?;
        *slot = m.cost;
        let g = wasserstein_grad(&m, &a, &b)?;
        for (pt, [gb, gd]) in b.iter().zip(&g.right) {
            scatter_pixel(&mut grad, pt.birth_cell, *gb);
            scatter_pixel(&mut grad, pt.death_cell, *gd);
        }
    }
    Ok(TopoLossResult {
        value: per_dim[0] + per_dim[1],
        per_dim,
        grad,
    })
}

fn scatter_pixel(grad: &mut [f64], cell: Cell, g: f64) {
    if let Cell::Pixel(p) = cell {
        grad[p] += g;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentLossResult {
    pub value: f64,
    pub per_dim: [f64; 2],
    /// Gradient with respect to the clean cloud, row-major like its data.
    pub grad_clean: Vec<f64>,
    /// Gradient with respect to the received cloud.
    pub grad_noisy: Vec<f64>,
    /// Generator edges of zero length whose gradient was dropped.
    pub degenerate_edges: usize,
}

/// `Σ_m W2(D_m(S), D_m(S~))` on Rips diagrams sharing one `eps_max`, the
/// larger of the two diameters.
pub fn latent_topo_loss(clean: &PointCloud, noisy: &PointCloud) -> Result<LatentLossResult> {
    if clean.len() != noisy.len() || clean.dim() != noisy.dim() {
        return Err(Error::invalid(format!(
            "latent clouds differ: {}x{} vs {}x{}",
            clean.len(),
            clean.dim(),
            noisy.len(),
            noisy.dim()
        )));
    }
    let (dc, dn) = (pairwise_distances(clean), pairwise_distances(noisy));
    let (ec, en) = (diameter_edge(&dc), diameter_edge(&dn));
    // Capped deaths equal the larger diameter, so their gradient belongs to
    // the edge realizing it.
    let (eps_max, cap_edge, cap_on_clean) = if ec.2 >= en.2 { (ec.2, ec, true) } else { (en.2, en, false) };
    if eps_max <= 0.0 {
        return Err(Error::Degenerate("all latent points coincide".into()));
    }
    let diag_c = rips_diagram(&dc, 1, eps_max)?;
    let diag_n = rips_diagram(&dn, 1, eps_max)?;

    let mut out = LatentLossResult {
        value: 0.0,
        per_dim: [0.0; 2],
        grad_clean: vec![0.0; clean.data().len()],
        grad_noisy: vec![0.0; noisy.data().len()],
        degenerate_edges: 0,
    };
    let cap = Cell::Edge(cap_edge.0, cap_edge.1);
    for dim in 0..2 {
        let (a, b) = (diag_c.of_dim(dim), diag_n.of_dim(dim));
        let m = wasserstein(&a, &b, LOSS_ORDER)?;
        out.per_dim[dim] = m.cost;
        let DiagramGradient { left, right } = wasserstein_grad(&m, &a, &b)?;
        let pairs = a.iter().zip(&left).map(|(p, g)| (p, g, true)).chain(b.iter().zip(&right).map(|(p, g)| (p, g, false)));
        for (pt, g, is_clean) in pairs {
            for (cell, gv) in [(pt.birth_cell, g[0]), (pt.death_cell, g[1])] {
                let (cell, on_clean) = if cell == Cell::Cap { (cap, cap_on_clean) } else { (cell, is_clean) };
                out.degenerate_edges += if on_clean {
                    scatter_edge(&mut out.grad_clean, clean, cell, gv)
                } else {
                    scatter_edge(&mut out.grad_noisy, noisy, cell, gv)
                };
            }
        }
    }
    if out.degenerate_edges > 0 {
        log::warn!(
            "latent topological loss: {} zero-length generator edges contributed no gradient",
            out.degenerate_edges
        );
    }
    out.value = out.per_dim[0] + out.per_dim[1];
    Ok(out)
}

/// Longest edge `(i, j, length)`, first in row-major order on ties.
fn diameter_edge(dist: &DistanceMatrix) -> (usize, usize, f64) {
    let mut best = (0, 1, f64::NEG_INFINITY);
    for i in 0..dist.len() {
        for j in i + 1..dist.len() {
            if dist.get(i, j) > best.2 {
                best = (i, j, dist.get(i, j));
            }
        }
    }
    best
}

/// Chains `g * d|u - v|` onto the endpoints; returns 1 for a degenerate edge.
fn scatter_edge(grad: &mut [f64], cloud: &PointCloud, cell: Cell, g: f64) -> usize {
    let Cell::Edge(i, j) = cell else { return 0 };
    if g == 0.0 {
        return 0;
    }
    let (u, v) = (cloud.point(i), cloud.point(j));
    let len = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if len == 0.0 {
        return 1;
    }
    let dim = cloud.dim();
    for k in 0..dim {
        let d = g * (u[k] - v[k]) / len;
        grad[i * dim + k] += d;
        grad[j * dim + k] -= d;
    }
    0
}
